import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import entropy

from mvamp.errors import ParameterError, RegimeError
from mvamp.models import PriorSpec
from mvamp.state_evolution import QuadratureSpec, se_map
from mvamp.theory import (
    THRESHOLD_NOTE,
    dummy_mse,
    dyn_critical_lambda,
    g_gradient,
    g_hessian,
    g_objective,
    g_objective_difference,
    hessian_at_zero,
    hessian_zero_feasibility,
    implicit_overlap,
    kms_matrix,
    leading_vector_nonnegative,
    limiting_quantities,
    maximize_g,
    ml_critical_lambda,
    ml_criterion,
    ml_determinant_identity,
    scalar_free_energy,
    side_information,
    theta_star,
    threshold_dyn,
    threshold_ml,
)

GH = QuadratureSpec(method="gauss-hermite", nodes=61)


# ---------------------------------------------------------------- free energy

@pytest.mark.parametrize("prior", [PriorSpec.multilayer(2, 0.1), PriorSpec.dynamic(2, 0.2),
                                   PriorSpec.semi(0.1, 0.3)])
def test_free_energy_zero_at_origin(prior):
    assert scalar_free_energy(prior, np.ones(prior.L), np.zeros(prior.L), GH) == pytest.approx(0.0, abs=1e-12)


def test_semi_free_energy_against_direct_integral():
    from scipy.integrate import quad

    g = 1.7
    prior = PriorSpec.semi(0.0, 0.0)

    def integrand(w):
        h = g + math.sqrt(g) * w
        return math.log(math.cosh(h)) * math.exp(-w * w / 2) / math.sqrt(2 * math.pi)

    ref = quad(integrand, -30, 30, epsabs=1e-13)[0]
    # uniform prior: F(g) = E log cosh(g + sqrt(g) W)
    assert scalar_free_energy(prior, [g], [1.0], GH) == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("prior,lam", [(PriorSpec.multilayer(2, 0.1), [1.5, 0.8]),
                                       (PriorSpec.dynamic(2, 0.25), [1.2, 1.6]),
                                       (PriorSpec.semi(0.1, 0.3), [1.3])])
def test_gradient_matches_finite_difference(prior, lam):
    lam = np.asarray(lam)
    q = np.full(prior.L, 0.4)
    grad = g_gradient(prior, lam, q, GH)
    h = 1e-5
    for l in range(prior.L):
        e = np.zeros(prior.L)
        e[l] = h
        fd = (g_objective(prior, lam, q + e, GH) - g_objective(prior, lam, q - e, GH)) / (2 * h)
        assert grad[l] == pytest.approx(fd, abs=1e-6)


def test_hessian_matches_finite_difference():
    prior = PriorSpec.multilayer(2, 0.15)
    lam = np.array([1.3, 0.9])
    q = np.array([0.3, 0.5])
    H = g_hessian(prior, lam, q, GH)
    h = 1e-4
    fd = np.empty((2, 2))
    for b in range(2):
        e = np.zeros(2)
        e[b] = h
        fd[:, b] = (g_gradient(prior, lam, q + e, GH) - g_gradient(prior, lam, q - e, GH)) / (2 * h)
    assert np.allclose(H, fd, atol=1e-6)
    assert np.allclose(H, H.T)


@pytest.mark.parametrize("prior", [PriorSpec.multilayer(3, 0.1), PriorSpec.dynamic(3, 0.2)])
def test_hessian_at_zero_closed_form(prior):
    lam = np.array([0.7, 0.9, 0.4])
    assert np.allclose(hessian_at_zero(prior, lam), g_hessian(prior, lam, np.zeros(3), GH), atol=1e-12)


def test_difference_uses_common_numbers():
    prior = PriorSpec.dynamic(4, 0.2)
    mc = QuadratureSpec(method="montecarlo", samples=20_000, seed=1)
    lam = np.ones(4)
    d, se = g_objective_difference(prior, lam, np.full(4, 0.5), np.full(4, 0.49), mc)
    _, se_single = g_objective(prior, lam, np.full(4, 0.5), mc, return_stderr=True)
    assert se < se_single
    ref = g_objective(prior, lam, np.full(4, 0.5), mc) - g_objective(prior, lam, np.full(4, 0.49), mc)
    assert d == pytest.approx(ref, abs=1e-12)


# ---------------------------------------------------------------- limiting quantities

def test_side_information_against_entropy():
    p = PriorSpec.semi_from_eps_delta(0.2, 0.2)
    ep, em = p.eps_plus, p.eps_minus
    # Z takes values (star, +1, -1); I(X; Z) = H(Z) - H(Z | X)
    pz = [0.5 * (1 - ep) + 0.5 * (1 - em), 0.5 * ep, 0.5 * em]
    h_z_x = 0.5 * entropy([1 - ep, ep]) + 0.5 * entropy([1 - em, em])
    assert side_information(p) == pytest.approx(entropy(pz) - h_z_x, abs=1e-14)
    assert side_information(PriorSpec.semi(1.0, 1.0)) == pytest.approx(math.log(2))
    assert side_information(PriorSpec.multilayer(2, 0.1)) == 0.0


def test_dummy_mse():
    assert np.all(dummy_mse(PriorSpec.dynamic(3, 0.1)) == 1.0)
    p = PriorSpec.semi_from_eps_delta(0.2, 0.2)
    t0 = 0.2 + 0.8 * 0.04
    assert dummy_mse(p)[0] == pytest.approx(1 - t0 * t0)


def test_mi_below_threshold_is_linear():
    r = maximize_g(PriorSpec.semi(0.0, 0.0), [0.8], GH)
    assert np.all(r.q_star == 0)
    assert r.mi_limit == pytest.approx(0.2, abs=1e-12)
    assert r.mmse_layers[0] == pytest.approx(1.0)
    assert r.mmse_implicit is None


@pytest.mark.parametrize("prior,lam", [(PriorSpec.semi(0.0, 0.0), [2.0]),
                                       (PriorSpec.semi_from_eps_delta(0.2, 0.2), [1.5]),
                                       (PriorSpec.multilayer(2, 0.1), [1.5, 1.2])])
def test_mutual_information_derivative_is_quarter_mmse(prior, lam):
    lam = np.asarray(lam, float)
    base = maximize_g(prior, lam, GH, tol=1e-10)
    h = 1e-4
    for l in range(prior.L):
        e = np.zeros(prior.L)
        e[l] = h
        up = maximize_g(prior, lam + e, GH, tol=1e-10).mi_limit
        dn = maximize_g(prior, lam - e, GH, tol=1e-10).mi_limit
        assert (up - dn) / (2 * h) == pytest.approx(base.mmse_layers[l] / 4, abs=2e-4)


def test_mi_bounds():
    prior = PriorSpec.multilayer(2, 0.1)
    for lam in ([0.3, 0.3], [1.5, 1.5], [3.0, 0.5]):
        r = maximize_g(prior, lam, GH)
        assert 0 <= r.mi_limit <= sum(lam) / 4 + 1e-12
        assert r.G_star >= r.G_zero - 1e-12


def test_implicit_overlap_single_layer_identity():
    # with one layer E[y | m] = (1 - 2 rho) E[x | m], so the implicit overlap is (1 - 2 rho)^2 T
    rho, lam, q = 0.15, 2.0, 0.6
    prior = PriorSpec.multilayer(1, rho)
    ov, _ = implicit_overlap(prior, [lam], [q], GH)
    assert ov == pytest.approx((1 - 2 * rho) ** 2 * se_map(prior, [lam * q], GH)[0], abs=1e-10)


def test_implicit_mmse_exceeds_layer_mmse():
    # the global label is hidden behind the flips, so even with perfect layer recovery it stays uncertain
    r = maximize_g(PriorSpec.multilayer(2, 0.1), [1.5, 1.5])
    assert r.q_star[0] == pytest.approx(0.5905, abs=5e-4)
    assert r.mmse_implicit > r.mmse_layers.min()
    assert r.mmse_implicit == pytest.approx(0.7394, abs=2e-3)


def test_limiting_quantities_tuple():
    mi, mmse, imp, dmse = limiting_quantities(PriorSpec.dynamic(2, 0.1), [1.4, 1.4])
    assert mmse.shape == (2,) and imp is None and np.all(dmse == 1)
    assert mi > 0


# ---------------------------------------------------------------- multilayer threshold

def test_ml_criterion_frozen():
    c = 0.8 ** 4
    assert ml_criterion([0.5, 0.6], 0.1) == pytest.approx(
        c * 0.5 / (1 - (1 - c) * 0.5) + c * 0.6 / (1 - (1 - c) * 0.6))
    with pytest.raises(RegimeError):
        ml_criterion([1.2, 0.5], 0.1)


def test_ml_critical_lambda_is_root():
    for L in (2, 3, 5):
        lam_c = ml_critical_lambda(L, 0.1)
        assert ml_criterion(np.full(L, lam_c), 0.1) == pytest.approx(1.0, abs=1e-12)
    assert ml_critical_lambda(4, 0.1) == pytest.approx(0.448672, abs=1e-6)


def test_determinant_identity_example():
    lhs, rhs = ml_determinant_identity([0.5, 0.7, 0.3], 0.2)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_threshold_ml_report():
    rep = threshold_ml([0.9, 0.9], 0.05)
    assert rep.feasible and rep.hessian_max_eig > 0 and rep.signals_agree
    assert rep.note == THRESHOLD_NOTE
    assert rep.critical_lambda == pytest.approx(ml_critical_lambda(2, 0.05))
    low = threshold_ml([0.2, 0.3], 0.1)
    assert not low.feasible and low.hessian_max_eig < 0
    with pytest.raises(ParameterError):
        threshold_ml([0.5, 0.5], 0.7)


@settings(max_examples=60, deadline=None)
@given(l1=st.floats(0.01, 0.99), l2=st.floats(0.01, 0.99), l3=st.floats(0.01, 0.99), rho=st.floats(0.0, 0.49))
def test_ml_threshold_signals_agree(l1, l2, l3, rho):
    crit = ml_criterion([l1, l2, l3], rho)
    if abs(crit - 1) < 1e-9:
        return
    rep = threshold_ml([l1, l2, l3], rho)
    assert rep.signals_agree
    assert rep.leading_eigvec_sign_ok


def test_leading_vector_sign():
    assert leading_vector_nonnegative(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert not leading_vector_nonnegative(np.array([[1.0, -0.9], [-0.9, 1.0]]))


# ---------------------------------------------------------------- dynamic threshold

def test_kms_matrix():
    K = kms_matrix(3, 0.5)
    assert np.allclose(K, [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])


def test_theta_star_frozen():
    assert theta_star(4, 0.1) == pytest.approx(0.40770, abs=1e-5)
    with pytest.raises(ParameterError):
        theta_star(4, 0.5)


@settings(max_examples=40, deadline=None)
@given(L=st.integers(2, 40), rho=st.floats(0.01, 0.49))
def test_dyn_threshold_matches_eigenvalue(L, rho):
    lam_c, t = dyn_critical_lambda(L, rho)
    assert 0 < t < math.pi / (L + 1)
    lam_max = np.linalg.eigvalsh(kms_matrix(L, (1 - 2 * rho) ** 2))[-1]
    assert lam_c == pytest.approx(1 / lam_max, rel=1e-8)


def test_dyn_threshold_endpoints():
    assert threshold_dyn(4, 0.0).critical_lambda == pytest.approx(0.25)
    assert threshold_dyn(4, 0.5).critical_lambda == pytest.approx(1.0)
    assert threshold_dyn(4, 0.5).theta_star is None


def test_dyn_threshold_verdict():
    lam_c = threshold_dyn(5, 0.2).critical_lambda
    above = threshold_dyn(5, 0.2, lam_c * 1.05)
    below = threshold_dyn(5, 0.2, lam_c * 0.95)
    assert above.feasible and above.hessian_max_eig > 0 and above.signals_agree
    assert not below.feasible and below.hessian_max_eig < 0 and below.signals_agree


def test_dyn_threshold_large_L_limit():
    lam_c, _ = dyn_critical_lambda(200, 0.1)
    r = 0.8 ** 2
    assert lam_c == pytest.approx((1 - r) / (1 + r), abs=1e-3)


def test_hessian_feasibility_general():
    rep = hessian_zero_feasibility(PriorSpec.dynamic(3, 0.1), [0.2, 1.5, 0.2])
    assert rep.feasible and rep.leading_eigvec_sign_ok
    with pytest.raises(ParameterError):
        hessian_zero_feasibility(PriorSpec.semi(0.1, 0.1), [1.0])
