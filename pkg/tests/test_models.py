import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvamp.errors import (
    DenseCapError,
    InfeasibleRatesError,
    ParameterError,
    ProbabilityOverflowError,
)
from mvamp.models import (
    STAR,
    Family,
    LayerRates,
    MultiViewGraph,
    PriorSpec,
    _triangle_pairs,
    dense_node_cap,
    rates_from_snr,
    read_edges_csv,
    read_population_csv,
    read_spiked_raw,
    rescale_graph,
    sample_graphs,
    sample_population,
    sample_spiked,
    write_edges_csv,
    write_labels_csv,
    write_population_csv,
    write_spiked_raw,
)


# ---------------------------------------------------------------- priors

def test_prior_validation():
    with pytest.raises(ParameterError):
        PriorSpec.multilayer(0, 0.1)
    with pytest.raises(ParameterError):
        PriorSpec.dynamic(3, 1.5)
    with pytest.raises(ParameterError):
        PriorSpec.semi(-0.1, 0.2)
    with pytest.raises(ParameterError):
        PriorSpec(Family.SEMI, 2)
    with pytest.raises(ParameterError):
        PriorSpec("bogus", 1)


def test_eps_delta_roundtrip():
    p = PriorSpec.semi_from_eps_delta(0.2, 0.2)
    # frozen: eps_plus = eps - delta(1 - eps), eps_minus = eps + delta(1 - eps)
    assert p.eps_plus == pytest.approx(0.04, abs=1e-15)
    assert p.eps_minus == pytest.approx(0.36, abs=1e-15)
    assert p.eps == pytest.approx(0.2)
    assert p.delta == pytest.approx(0.2)


def test_eps_delta_infeasible():
    with pytest.raises(ParameterError, match="not realisable"):
        PriorSpec.semi_from_eps_delta(0.2, 0.5)


def test_eps_delta_extremes_snap():
    p = PriorSpec.semi_from_eps_delta(0.5, -1.0)
    assert p.eps_plus == 1.0 and p.eps_minus == 0.0
    full = PriorSpec.semi(1.0, 1.0)
    with pytest.raises(ParameterError):
        full.delta


@given(eps=st.floats(0.0, 0.95), frac=st.floats(-1.0, 1.0))
def test_eps_delta_property(eps, frac):
    delta = frac * min(1.0, eps / (1.0 - eps))
    p = PriorSpec.semi_from_eps_delta(eps, delta)
    assert 0.0 <= p.eps_plus <= 1.0 and 0.0 <= p.eps_minus <= 1.0
    assert p.eps == pytest.approx(eps, abs=1e-12)
    assert p.delta == pytest.approx(delta, abs=1e-9)


def test_prior_dict_roundtrip():
    for p in (PriorSpec.multilayer(3, 0.2), PriorSpec.dynamic(4, 0.05), PriorSpec.semi(0.1, 0.3)):
        assert PriorSpec.from_dict(json.loads(json.dumps(p.to_dict()))) == p


# ---------------------------------------------------------------- populations

def test_population_shapes_and_dtypes():
    pop = sample_population(PriorSpec.multilayer(3, 0.1), 500, seed=1)
    assert pop.X.shape == (500, 3) and pop.Y.shape == (500, 1)
    assert pop.X.dtype == np.int8
    assert set(np.unique(pop.X)) <= {-1, 1}
    assert pop.side_info() is None
    with pytest.raises(ValueError):
        pop.X[0, 0] = 1


def test_population_is_seed_deterministic():
    p = PriorSpec.dynamic(4, 0.2)
    a = sample_population(p, 300, 7)
    b = sample_population(p, 300, 7)
    c = sample_population(p, 300, 8)
    assert np.array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_multilayer_flip_rate():
    pop = sample_population(PriorSpec.multilayer(4, 0.15), 50_000, 3)
    flips = np.mean(pop.X != pop.Y)
    assert abs(flips - 0.15) < 4 * math.sqrt(0.15 * 0.85 / pop.X.size)


def test_dynamic_transition_rate():
    pop = sample_population(PriorSpec.dynamic(5, 0.3), 40_000, 3)
    changes = np.mean(pop.X[:, 1:] != pop.X[:, :-1])
    assert abs(changes - 0.3) < 4 * math.sqrt(0.21 / (4 * 40_000))
    assert abs(pop.X[:, 0].mean()) < 4 / math.sqrt(40_000)


def test_semi_reveal_rates():
    p = PriorSpec.semi(0.1, 0.4)
    pop = sample_population(p, 100_000, 11)
    x, z = pop.X[:, 0], pop.Z
    assert np.all((z == STAR) | (z == x))
    rev_plus = np.mean(z[x > 0] != STAR)
    rev_minus = np.mean(z[x < 0] != STAR)
    assert abs(rev_plus - 0.1) < 0.006
    assert abs(rev_minus - 0.4) < 0.01


# ---------------------------------------------------------------- rates

def test_rates_from_snr_frozen():
    r = rates_from_snr(4.0, 2.0, 1000)
    # frozen from a root-find of the SNR formula
    assert r.a == pytest.approx(6.822764602300327, rel=1e-12)
    assert r.b == pytest.approx(1.1772353976996728, rel=1e-12)
    assert r.lambda_n == pytest.approx(2.0, rel=1e-12)
    assert r.d == pytest.approx(4.0)


@given(d=st.floats(0.5, 50.0), frac=st.floats(0.0, 0.99))
def test_rates_inversion_property(d, frac):
    # b >= 0 needs lambda below the mean degree
    lam = frac * min(d, 1.0)
    n = 10_000
    r = rates_from_snr(d, lam, n)
    assert r.d == pytest.approx(d, rel=1e-12)
    assert r.lambda_n == pytest.approx(lam, rel=1e-9, abs=1e-12)


def test_rates_infeasible():
    with pytest.raises(InfeasibleRatesError) as info:
        rates_from_snr(1.0, 5.0, 1000, layer=2)
    assert info.value.layer == 2
    with pytest.raises(ParameterError):
        LayerRates(1.0, 2.0, 100)
    with pytest.raises(ProbabilityOverflowError):
        LayerRates(200.0, 1.0, 100)


def test_invisible_layer():
    r = LayerRates(0.0, 0.0, 100)
    assert r.invisible and r.lambda_n == 0.0


# ---------------------------------------------------------------- graphs

@pytest.mark.parametrize("m", [2, 3, 7, 50, 301])
def test_triangle_pairs_exhaustive(m):
    k = np.arange(m * (m - 1) // 2)
    i, j = _triangle_pairs(k, m)
    ref = np.array([(a, b) for a in range(m) for b in range(a + 1, m)])
    assert np.array_equal(np.stack([i, j], 1), ref)


def test_graph_structure():
    pop = sample_population(PriorSpec.multilayer(2, 0.1), 400, 5)
    rates = [rates_from_snr(6.0, 1.0, 400), rates_from_snr(10.0, 0.5, 400)]
    g = sample_graphs(pop, rates, 5)
    for l, e in enumerate(g.edges):
        assert np.all(e[:, 0] < e[:, 1])
        assert len({tuple(p) for p in e}) == e.shape[0]
        A = g.adjacency[l]
        assert (A != A.T).nnz == 0
        assert A.diagonal().sum() == 0
    assert np.allclose(g.lambdas, [1.0, 0.5])


def test_graph_edge_frequencies():
    n = 3000
    pop = sample_population(PriorSpec.multilayer(1, 0.0), n, 2)
    r = LayerRates(8.0, 2.0, n)
    g = sample_graphs(pop, [r], 2)
    x = pop.X[:, 0]
    e = g.edges[0]
    same = x[e[:, 0]] == x[e[:, 1]]
    n_plus = int(np.sum(x > 0))
    pairs_in = n_plus * (n_plus - 1) // 2 + (n - n_plus) * (n - n_plus - 1) // 2
    pairs_out = n_plus * (n - n_plus)
    for count, pairs, p in ((same.sum(), pairs_in, 8.0 / n), ((~same).sum(), pairs_out, 2.0 / n)):
        assert abs(count - pairs * p) < 5 * math.sqrt(pairs * p)


def test_graph_deterministic():
    pop = sample_population(PriorSpec.dynamic(2, 0.2), 500, 1)
    rates = [rates_from_snr(5.0, 0.8, 500)] * 2
    a = sample_graphs(pop, rates, 9)
    b = sample_graphs(pop, rates, 9)
    assert all(np.array_equal(x, y) for x, y in zip(a.edges, b.edges))


def test_rescaled_matvec_matches_dense():
    n = 300
    pop = sample_population(PriorSpec.multilayer(2, 0.1), n, 4)
    rates = [rates_from_snr(8.0, 1.2, n), LayerRates(0.0, 0.0, n)]
    rg = rescale_graph(sample_graphs(pop, rates, 4))
    dense = rg.densify()
    v = np.random.default_rng(0).standard_normal(n)
    assert np.allclose(rg.matvec(0, v), dense.matrices[0] @ v, atol=1e-9)
    assert not rg.observed(1)
    assert np.all(rg.matvec(1, v) == 0)
    M = dense.matrices[0]
    d = rates[0].d
    off = M[~np.eye(n, dtype=bool)]
    # centred entries: the mean over pairs is close to zero
    assert abs(off.mean()) < 0.05
    assert rg.layers[0].edge_value == pytest.approx((1 - d / n) / math.sqrt(d * (1 - d / n) / n))


# ---------------------------------------------------------------- spiked

def test_spiked_views():
    n = 200
    pop = sample_population(PriorSpec.multilayer(2, 0.1), n, 3)
    v = sample_spiked(pop, [1.0, 0.0], 3)
    A = v.matrices[0]
    assert np.allclose(A, A.T)
    assert v.observed(0) and not v.observed(1)
    W = v.matrices[1]
    off = W[np.triu_indices(n, 1)]
    assert abs(off.var() - 1.0) < 0.05
    assert abs(np.diag(W).var() - 2.0) < 0.6


def test_dense_cap(monkeypatch):
    pop = sample_population(PriorSpec.multilayer(1, 0.1), 50, 1)
    with pytest.raises(DenseCapError):
        sample_spiked(pop, [1.0], 1, max_nodes=49)
    monkeypatch.setenv("MVAMP_DENSE_CAP", "10")
    assert dense_node_cap() == 10
    with pytest.raises(DenseCapError):
        sample_spiked(pop, [1.0], 1)


def test_spiked_rejects_bad_lambdas():
    pop = sample_population(PriorSpec.multilayer(2, 0.1), 20, 1)
    with pytest.raises(ParameterError):
        sample_spiked(pop, [1.0], 1)
    with pytest.raises(ParameterError):
        sample_spiked(pop, [1.0, -1.0], 1)


# ---------------------------------------------------------------- io

def test_population_and_edges_roundtrip(tmp_path):
    n = 120
    pop = sample_population(PriorSpec.multilayer(2, 0.2), n, 6)
    write_population_csv(pop, tmp_path / "pop.csv")
    assert np.array_equal(read_population_csv(tmp_path / "pop.csv", pop.prior), pop.X)
    rates = [rates_from_snr(5.0, 1.0, n)] * 2
    g = sample_graphs(pop, rates, 6)
    write_edges_csv(g, tmp_path / "e.csv")
    g2 = read_edges_csv(tmp_path / "e.csv", n, rates)
    assert isinstance(g2, MultiViewGraph)
    assert all(np.array_equal(a, b) for a, b in zip(g.edges, g2.edges))


def test_labels_csv_star(tmp_path):
    pop = sample_population(PriorSpec.semi(0.3, 0.3), 50, 2)
    write_labels_csv(pop, tmp_path / "lab.csv")
    lines = (tmp_path / "lab.csv").read_text().splitlines()
    assert lines[0] == "node_id,y,z"
    zs = [ln.split(",")[2] for ln in lines[1:]]
    assert set(zs) <= {"*", "1", "-1"} and "*" in zs


def test_spiked_raw_roundtrip(tmp_path):
    pop = sample_population(PriorSpec.dynamic(2, 0.1), 30, 2)
    v = sample_spiked(pop, [0.5, 1.5], 2)
    write_spiked_raw(v, tmp_path / "s.f64", seed=2)
    v2 = read_spiked_raw(tmp_path / "s.f64")
    assert all(np.array_equal(a, b) for a, b in zip(v.matrices, v2.matrices))
    assert np.array_equal(v.lambdas, v2.lambdas)
    (tmp_path / "s.f64").write_bytes(b"\0" * 16)
    with pytest.raises(ParameterError):
        read_spiked_raw(tmp_path / "s.f64")


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 2**31))
def test_graph_pairs_valid_property(n, seed):
    pop = sample_population(PriorSpec.multilayer(1, 0.2), n, seed)
    g = sample_graphs(pop, [LayerRates(min(n, 5.0), 0.5, n)], seed)
    e = g.edges[0]
    assert np.all((0 <= e) & (e < n))
    assert np.all(e[:, 0] < e[:, 1])
