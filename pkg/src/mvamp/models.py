"""Priors, latent populations, multilayer graphs and spiked-matrix surrogates.

Three per-node priors are supported:

* ``multilayer`` -- a global label ``y`` uniform on {+1, -1}; each layer label
  ``x_l`` equals ``y`` flipped independently with probability ``rho``.
* ``dynamic`` -- ``x_1`` uniform, then a Markov chain that flips with
  probability ``rho`` between consecutive layers.
* ``semi`` -- a single layer with side information ``z``: the label of a node
  in class +1 (resp. -1) is revealed with probability ``eps_plus``
  (resp. ``eps_minus``), otherwise ``z`` is the unknown symbol.

Side information is stored as an int8 array with ``STAR = 0`` for unrevealed
nodes and +1/-1 for revealed ones.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    DenseCapError,
    InfeasibleRatesError,
    ParameterError,
    ProbabilityOverflowError,
)
from .rng import stream

STAR = 0

DEFAULT_DENSE_CAP = 8000


def dense_node_cap():
    """Node budget for dense spiked matrices (env ``MVAMP_DENSE_CAP`` overrides)."""
    value = os.environ.get("MVAMP_DENSE_CAP")
    return int(value) if value else DEFAULT_DENSE_CAP


class Family(str, Enum):
    MULTILAYER = "multilayer"
    DYNAMIC = "dynamic"
    SEMI = "semi"


def _check_prob(name, value):
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class PriorSpec:
    """Joint per-node law of (x, y, z)."""

    family: Family
    num_layers: int = 1
    rho: float = 0.0
    eps_plus: float = 0.0
    eps_minus: float = 0.0

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise ParameterError(f"unknown model family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "num_layers", int(self.num_layers))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "eps_plus", float(self.eps_plus))
        object.__setattr__(self, "eps_minus", float(self.eps_minus))
        if self.num_layers < 1:
            raise ParameterError(f"num_layers must be positive, got {self.num_layers}")
        _check_prob("rho", self.rho)
        _check_prob("eps_plus", self.eps_plus)
        _check_prob("eps_minus", self.eps_minus)
        if family is Family.SEMI and self.num_layers != 1:
            raise ParameterError("the semi-supervised prior has exactly one layer")

    @classmethod
    def multilayer(cls, num_layers, rho):
        return cls(Family.MULTILAYER, num_layers, rho=rho)

    @classmethod
    def dynamic(cls, num_layers, rho):
        return cls(Family.DYNAMIC, num_layers, rho=rho)

    @classmethod
    def semi(cls, eps_plus, eps_minus):
        return cls(Family.SEMI, 1, eps_plus=eps_plus, eps_minus=eps_minus)

    @classmethod
    def semi_from_eps_delta(cls, eps, delta):
        """Build the semi prior from the (eps, delta) parametrisation.

        Both class-wise revelation rates must be probabilities, which
        restricts |delta| <= eps / (1 - eps).
        """
        if not (0.0 <= eps <= 1.0):
            raise ParameterError(f"eps must lie in [0, 1], got {eps}")
        if eps < 1.0 and abs(delta) > eps / (1.0 - eps) + 1e-12:
            raise ParameterError(
                f"(eps={eps}, delta={delta}) is not realisable: with balanced classes "
                f"|delta| <= eps/(1-eps) = {eps / (1.0 - eps):.6g}"
            )
        eps_plus = eps - delta * (1.0 - eps)
        eps_minus = eps + delta * (1.0 - eps)
        # absorb round-off at the ends of [0, 1] (e.g. delta = -1)
        snap = lambda p: min(max(p, 0.0), 1.0) if -1e-12 < p < 1 + 1e-12 else p  # noqa: E731
        return cls.semi(snap(eps_plus), snap(eps_minus))

    @property
    def L(self):
        return self.num_layers

    @property
    def implicit_layers(self):
        return 1 if self.family is Family.MULTILAYER else 0

    @property
    def has_side_info(self):
        return self.family is Family.SEMI

    @property
    def eps(self):
        return 0.5 * (self.eps_plus + self.eps_minus)

    @property
    def delta(self):
        eps = self.eps
        if eps >= 1.0:
            raise ParameterError("delta is undefined when every label is revealed (eps = 1)")
        return (self.eps_minus - self.eps_plus) / (2.0 - 2.0 * eps)

    def to_dict(self):
        out = {"family": self.family.value, "num_layers": self.num_layers}
        if self.family is Family.SEMI:
            out.update(eps_plus=self.eps_plus, eps_minus=self.eps_minus)
        else:
            out["rho"] = self.rho
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(
            Family(data["family"]),
            data.get("num_layers", 1),
            rho=data.get("rho", 0.0),
            eps_plus=data.get("eps_plus", 0.0),
            eps_minus=data.get("eps_minus", 0.0),
        )


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LatentPopulation:
    """Sampled latent labels: X (n x L), Y (n x L1) and side info Z (n,) or empty."""

    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    prior: PriorSpec

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def L(self):
        return self.X.shape[1]

    def side_info(self):
        """Z as an int8 array, or None when the prior carries no side information."""
        return self.Z if self.Z.size else None


def sample_population(prior: PriorSpec, n: int, seed) -> LatentPopulation:
    """Draw n i.i.d. rows (X_i, Y_i, Z_i) from ``prior``."""
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    rng = stream(seed, "population")
    L = prior.L
    empty = np.zeros((n, 0), dtype=np.int8)
    Z = np.zeros(0, dtype=np.int8)
    if prior.family is Family.MULTILAYER:
        y = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        flips = rng.random((n, L)) < prior.rho
        X = np.where(flips, -y[:, None], y[:, None]).astype(np.int8)
        Y = y[:, None].copy()
    elif prior.family is Family.DYNAMIC:
        X = np.empty((n, L), dtype=np.int8)
        X[:, 0] = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        flips = rng.random((n, L - 1)) < prior.rho
        for l in range(1, L):
            X[:, l] = np.where(flips[:, l - 1], -X[:, l - 1], X[:, l - 1])
        Y = empty
    else:
        x = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        u = rng.random(n)
        reveal = np.where(x > 0, u < prior.eps_plus, u < prior.eps_minus)
        X = x[:, None].copy()
        Z = np.where(reveal, x, STAR).astype(np.int8)
        Y = empty
    return LatentPopulation(_readonly(X), _readonly(Y), _readonly(Z), prior)


@dataclass(frozen=True)
class LayerRates:
    """Edge rates of one layer: within-community a/n, across-community b/n."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (self.a >= self.b >= 0):
            raise ParameterError(f"need a >= b >= 0, got a={self.a}, b={self.b}")
        if self.a > self.n:
            raise ProbabilityOverflowError(f"a/n = {self.a / self.n} exceeds 1")

    @property
    def d(self):
        return 0.5 * (self.a + self.b)

    @property
    def invisible(self):
        return self.a == 0 and self.b == 0

    @property
    def variance_scale(self):
        """d (1 - d/n); positive for every observed layer."""
        return self.d * (1.0 - self.d / self.n)

    @property
    def lambda_n(self):
        v = self.variance_scale
        if v <= 0:
            return 0.0
        return (self.a - self.b) ** 2 / (4.0 * v)


def rates_from_snr(d, lam, n, layer=None) -> LayerRates:
    """Invert the effective-SNR formula: rates with average degree d and SNR lam."""
    if d <= 0:
        raise InfeasibleRatesError(f"average degree must be positive, got {d}", layer)
    if lam < 0:
        raise InfeasibleRatesError(f"SNR must be non-negative, got {lam}", layer)
    half_gap = math.sqrt(lam * d * (1.0 - d / n))
    a, b = d + half_gap, d - half_gap
    if b < 0:
        raise InfeasibleRatesError(f"b = {b:.6g} < 0 for d={d}, lambda={lam}", layer)
    if a > n:
        raise InfeasibleRatesError(f"a = {a:.6g} > n = {n}", layer)
    return LayerRates(a, b, n)


@dataclass(frozen=True)
class MultiViewGraph:
    """L undirected simple graphs on n nodes.

    ``edges[l]`` is an (m_l x 2) int64 array of pairs i < j, and
    ``adjacency[l]`` the symmetric CSR matrix holding both half-edges.
    """

    n: int
    edges: tuple
    rates: tuple
    adjacency: tuple = field(repr=False)

    @property
    def L(self):
        return len(self.edges)

    @property
    def lambdas(self):
        return np.array([r.lambda_n for r in self.rates])

    @classmethod
    def from_edges(cls, n, edges, rates):
        adjacency = tuple(_symmetric_csr(n, e) for e in edges)
        return cls(n, tuple(edges), tuple(rates), adjacency)


def _symmetric_csr(n, e):
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    data = np.ones(rows.size, dtype=np.float64)
    A = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    A.sort_indices()
    return A


def _triangle_pairs(k, m):
    """Map linear indices k of the strict upper triangle (row-major) of an m x m matrix to (i, j)."""
    k = np.asarray(k, dtype=np.int64)
    if k.size == 0:
        return k, k
    b = 2 * m - 1
    i = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * k, 0.0))) / 2.0).astype(np.int64)
    start = lambda r: r * (2 * m - r - 1) // 2  # noqa: E731
    # float sqrt can be off by one near block boundaries
    for _ in range(2):
        i = np.where(start(i) > k, i - 1, i)
        i = np.where(start(i + 1) <= k, i + 1, i)
    j = k - start(i) + i + 1
    return i, j


def _sample_block(rng, count, p):
    if count == 0 or p == 0:
        return np.zeros(0, dtype=np.int64)
    k = rng.binomial(count, p)
    if k == count:
        return np.arange(count, dtype=np.int64)
    picks = rng.choice(count, size=k, replace=False)
    picks.sort()
    return picks.astype(np.int64)


def sample_graphs(pop: LatentPopulation, rates, seed) -> MultiViewGraph:
    """Sample one SBM layer per entry of ``rates`` from the labels in ``pop``.

    Each pair i < j is an edge independently with probability a/n (same label
    in that layer) or b/n (different labels). Pairs are drawn block-wise:
    a binomial edge count followed by a uniform subset, which is equivalent
    to independent Bernoulli trials.
    """
    rates = tuple(rates)
    n = pop.n
    if len(rates) != pop.L:
        raise ParameterError(f"expected {pop.L} layer rates, got {len(rates)}")
    edges = []
    for l, r in enumerate(rates):
        if r.n != n:
            raise ParameterError(f"layer {l}: rates built for n={r.n}, population has n={n}")
        if r.a > n or r.b > n:
            raise ProbabilityOverflowError(f"layer {l}: edge probability exceeds 1")
        rng = stream(seed, "graph", l)
        x = pop.X[:, l]
        plus = np.flatnonzero(x > 0)
        minus = np.flatnonzero(x < 0)
        p_in, p_out = r.a / n, r.b / n
        parts = []
        for group in (plus, minus):
            m = group.size
            picks = _sample_block(rng, m * (m - 1) // 2, p_in)
            i, j = _triangle_pairs(picks, m)
            parts.append(np.stack([group[i], group[j]], axis=1))
        picks = _sample_block(rng, plus.size * minus.size, p_out)
        if minus.size:
            i, j = picks // minus.size, picks % minus.size
        else:
            i = j = picks
        parts.append(np.stack([plus[i], minus[j]], axis=1))
        e = np.concatenate(parts, axis=0)
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = _readonly(np.ascontiguousarray(e[order], dtype=np.int64))
        edges.append(e)
    return MultiViewGraph.from_edges(n, edges, rates)


@dataclass(frozen=True)
class SpikedViews:
    """Dense spiked matrices A_l = sqrt(lambda_l / n) x_l x_l^T + W_l."""

    matrices: tuple = field(repr=False)
    lambdas: np.ndarray
    n: int

    @property
    def L(self):
        return len(self.matrices)

    def observed(self, l):
        return self.lambdas[l] > 0

    def matvec(self, l, v):
        return self.matrices[l] @ v


def sample_goe(rng, n):
    """Symmetric Gaussian noise: off-diagonal variance 1, diagonal variance 2."""
    G = rng.standard_normal((n, n))
    W = G + G.T
    W *= 1.0 / math.sqrt(2.0)
    return W


def sample_spiked(pop: LatentPopulation, lambdas, seed, max_nodes=None) -> SpikedViews:
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.shape != (pop.L,):
        raise ParameterError(f"expected {pop.L} SNR values, got shape {lambdas.shape}")
    if np.any(lambdas < 0) or not np.all(np.isfinite(lambdas)):
        raise ParameterError(f"SNR values must be finite and non-negative, got {lambdas}")
    cap = dense_node_cap() if max_nodes is None else max_nodes
    n = pop.n
    if n > cap:
        raise DenseCapError(f"n = {n} exceeds the dense node budget {cap}")
    mats = []
    for l in range(pop.L):
        W = sample_goe(stream(seed, "spiked", l), n)
        x = pop.X[:, l].astype(np.float64)
        if lambdas[l] > 0:
            W += math.sqrt(lambdas[l] / n) * np.outer(x, x)
        mats.append(_readonly(W))
    return SpikedViews(tuple(mats), _readonly(lambdas.copy()), n)


@dataclass(frozen=True)
class RescaledLayer:
    """Centered, scaled adjacency (G - d/n) / sqrt(d(1-d/n)/n), off-diagonal only.

    Stored as ``edge_coef * adjacency + offset * (ones - I)`` so that the
    matrix-vector product costs O(edges + n).
    """

    adjacency: sp.csr_matrix = field(repr=False)
    edge_coef: float
    offset: float
    invisible: bool

    @property
    def edge_value(self):
        """Entry of the rescaled matrix at an edge, (1 - d/n) / sqrt(d(1-d/n)/n)."""
        return self.edge_coef + self.offset

    def matvec(self, v):
        if self.invisible:
            return np.zeros_like(v, dtype=np.float64)
        out = self.adjacency @ v
        out *= self.edge_coef
        out += self.offset * (v.sum(axis=0) - v)
        return out

    def dense(self):
        n = self.adjacency.shape[0]
        if self.invisible:
            return np.zeros((n, n))
        M = self.edge_coef * self.adjacency.toarray() + self.offset
        np.fill_diagonal(M, 0.0)
        return M


@dataclass(frozen=True)
class RescaledGraph:
    layers: tuple
    lambdas: np.ndarray
    n: int

    @property
    def L(self):
        return len(self.layers)

    def observed(self, l):
        return not self.layers[l].invisible and self.lambdas[l] > 0

    def matvec(self, l, v):
        return self.layers[l].matvec(v)

    def densify(self):
        return SpikedViews(tuple(layer.dense() for layer in self.layers), self.lambdas, self.n)


def rescale_graph(g: MultiViewGraph) -> RescaledGraph:
    layers = []
    lambdas = []
    n = g.n
    for A, r in zip(g.adjacency, g.rates):
        v = r.variance_scale
        if r.invisible or v <= 0:
            layers.append(RescaledLayer(A, 0.0, 0.0, True))
            lambdas.append(0.0)
            continue
        scale = math.sqrt(v / n)
        layers.append(RescaledLayer(A, 1.0 / scale, -(r.d / n) / scale, False))
        lambdas.append(r.lambda_n)
    return RescaledGraph(tuple(layers), _readonly(np.array(lambdas)), n)


# ---------------------------------------------------------------------------
# dumps

def write_population_csv(pop: LatentPopulation, path):
    """Write X as rows (node_id, layer, x); layers are 1-based."""
    path = Path(path)
    n, L = pop.X.shape
    with path.open("w", newline="") as fh:
        fh.write("node_id,layer,x\n")
        for i in range(n):
            for l in range(L):
                fh.write(f"{i},{l + 1},{int(pop.X[i, l])}\n")


def write_labels_csv(pop: LatentPopulation, path):
    """Write implicit labels and side information: (node_id, y, z) with z=* for unrevealed."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("node_id,y,z\n")
        for i in range(pop.n):
            y = int(pop.Y[i, 0]) if pop.Y.shape[1] else ""
            if pop.Z.size:
                z = "*" if pop.Z[i] == STAR else str(int(pop.Z[i]))
            else:
                z = ""
            fh.write(f"{i},{y},{z}\n")


def read_population_csv(path, prior: PriorSpec):
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    n = int(data[:, 0].max()) + 1
    L = int(data[:, 1].max())
    X = np.zeros((n, L), dtype=np.int8)
    X[data[:, 0], data[:, 1] - 1] = data[:, 2]
    return X


def write_edges_csv(g: MultiViewGraph, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("layer,i,j\n")
        for l, e in enumerate(g.edges):
            for i, j in e:
                fh.write(f"{l + 1},{i},{j}\n")


def read_edges_csv(path, n, rates):
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    edges = []
    for l in range(len(rates)):
        e = data[data[:, 0] == l + 1][:, 1:] if data.size else np.zeros((0, 2), np.int64)
        edges.append(_readonly(np.ascontiguousarray(e)))
    return MultiViewGraph.from_edges(n, edges, rates)


def write_spiked_raw(views: SpikedViews, path, seed=None):
    """Write the L matrices as little-endian float64 row-major, plus a JSON sidecar."""
    path = Path(path)
    with path.open("wb") as fh:
        for M in views.matrices:
            fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())
    meta = {"n": views.n, "L": views.L, "lambdas": [float(x) for x in views.lambdas], "seed": seed}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta


def read_spiked_raw(path) -> SpikedViews:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    n, L = meta["n"], meta["L"]
    flat = np.fromfile(path, dtype="<f8")
    if flat.size != L * n * n:
        raise ParameterError(f"{path}: expected {L * n * n} values, found {flat.size}")
    mats = tuple(_readonly(flat[l * n * n:(l + 1) * n * n].reshape(n, n).astype(np.float64)) for l in range(L))
    return SpikedViews(mats, _readonly(np.array(meta["lambdas"], dtype=np.float64)), n)
