"""State evolution for the scalar Gaussian channel.

For a prior p and SNR vector gamma the channel observes
``m_l = gamma_l * X_l + sqrt(gamma_l) * W_l`` and the Bayes map is
``T_l(gamma) = E[X_l * E[x_l | m, Z]]``.  Bayes-optimal AMP is tracked by
``q <- T(lambda * q)``; a general denoiser is tracked by the moment pair
``(mu, kappa)``.

Expectations are taken either by Monte Carlo (antithetic noise pairs, fixed
seed so that the map is a deterministic smooth function of gamma) or by
Gauss-Hermite tensor quadrature over the noise combined with exact
enumeration of the latent states.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .denoisers import DenoiserOutput, _log_prior_table, _states, bayes_denoiser
from .errors import NumericalError, ParameterError
from .models import STAR, Family, PriorSpec, sample_population
from .rng import stream

QUADRATURE_POINT_BUDGET = 4_000_000

AUTO_QUADRATURE_POINTS = 250_000


@dataclass(frozen=True)
class QuadratureSpec:
    """How Gaussian-channel expectations are evaluated.

    ``method`` is "auto", "montecarlo" or "gauss-hermite". "auto" picks the
    exact tensor quadrature whenever its point count stays below
    ``AUTO_QUADRATURE_POINTS`` (always for the semi prior, L <= 2 for the
    others) and Monte Carlo otherwise.
    """

    method: str = "auto"
    nodes: int = 61
    samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("auto", "montecarlo", "gauss-hermite"):
            raise ParameterError(f"unknown quadrature method {self.method!r}")
        if self.nodes < 1:
            raise ParameterError("nodes must be at least 1")
        if self.samples < 2:
            raise ParameterError("samples must be at least 2")

    def resolve(self, prior: PriorSpec):
        if self.method != "auto":
            return self.method
        points = self.nodes ** prior.L * 2 ** (prior.L + prior.implicit_layers)
        if prior.family is Family.SEMI or points <= AUTO_QUADRATURE_POINTS:
            return "gauss-hermite"
        return "montecarlo"

    def to_dict(self):
        return {"method": self.method, "nodes": self.nodes, "samples": self.samples, "seed": self.seed}


class ChannelSampler:
    """Weighted points (X, Y, Z, W) representing the channel law.

    ``evaluate(fn)`` calls ``fn(x, y, z, w)`` and returns per-point values;
    for Monte Carlo the antithetic partner ``-w`` is averaged in, so each
    returned row is one independent pair.
    """

    def __init__(self, x, y, z, w, weights, stochastic):
        self.x = x
        self.y = y
        self.z = z
        self.w = w
        self.weights = weights
        self.stochastic = stochastic

    @property
    def size(self):
        return self.x.shape[0]

    def evaluate(self, fn):
        v = np.asarray(fn(self.x, self.y, self.z, self.w), dtype=np.float64)
        if self.stochastic:
            v = 0.5 * (v + np.asarray(fn(self.x, self.y, self.z, -self.w), dtype=np.float64))
        return v

    def mean(self, v):
        return np.tensordot(self.weights, v, axes=(0, 0))

    def stderr(self, v):
        if not self.stochastic:
            return np.zeros(v.shape[1:])
        return v.std(axis=0, ddof=1) / math.sqrt(v.shape[0])

    def reduce(self, v):
        return self.mean(v), self.stderr(v)


def _gh_rule(nodes):
    t, w = hermegauss(nodes)
    return t, w / w.sum()


def _latent_states(prior: PriorSpec):
    """Every (x, y, z) with positive probability, with its probability."""
    if prior.family is Family.SEMI:
        ep, em = prior.eps_plus, prior.eps_minus
        table = [
            (1.0, STAR, 0.5 * (1.0 - ep)),
            (-1.0, STAR, 0.5 * (1.0 - em)),
            (1.0, 1, 0.5 * ep),
            (-1.0, -1, 0.5 * em),
        ]
        table = [row for row in table if row[2] > 0]
        x = np.array([[r[0]] for r in table])
        z = np.array([r[1] for r in table], dtype=np.int8)
        p = np.array([r[2] for r in table])
        return x, np.zeros((len(table), 0)), z, p
    x, logp = _log_prior_table(prior, "lex")
    L = prior.L
    s = _states(L + prior.implicit_layers, "lex").astype(np.float64)
    p = np.exp(logp)
    keep = p > 0
    return x[keep], s[keep, L:], None, p[keep]


@functools.lru_cache(maxsize=16)
def channel_sampler(prior: PriorSpec, quad: QuadratureSpec) -> ChannelSampler:
    method = quad.resolve(prior)
    L = prior.L
    if method == "montecarlo":
        pairs = quad.samples // 2
        pop = sample_population(prior, pairs, quad.seed)
        w = stream(quad.seed, "channel").standard_normal((pairs, L))
        x = pop.X.astype(np.float64)
        y = pop.Y.astype(np.float64)
        z = pop.side_info()
        weights = np.full(pairs, 1.0 / pairs)
        return ChannelSampler(x, y, z, w, weights, True)
    xs, ys, zs, ps = _latent_states(prior)
    t, tw = _gh_rule(quad.nodes)
    n_grid = quad.nodes ** L
    if n_grid * xs.shape[0] > QUADRATURE_POINT_BUDGET:
        raise ParameterError(
            f"tensor quadrature needs {n_grid * xs.shape[0]} points; use Monte Carlo for L={L}"
        )
    grids = np.meshgrid(*([t] * L), indexing="ij")
    wgrid = np.stack([g.ravel() for g in grids], axis=1)
    wweights = np.ones(n_grid)
    for g in np.meshgrid(*([tw] * L), indexing="ij"):
        wweights = wweights * g.ravel()
    S = xs.shape[0]
    x = np.repeat(xs, n_grid, axis=0)
    y = np.repeat(ys, n_grid, axis=0)
    z = None if zs is None else np.repeat(zs, n_grid)
    w = np.tile(wgrid, (S, 1))
    weights = np.repeat(ps, n_grid) * np.tile(wweights, S)
    return ChannelSampler(x, y, z, w, weights, False)


def _check_gamma(prior, gamma):
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (prior.L,)).copy()
    if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
        raise ParameterError(f"gamma must be finite and non-negative, got {gamma}")
    return gamma


def _finite(value, what, gamma):
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite {what} at gamma={np.asarray(gamma).tolist()}")
    return value


def _denoise_values(den, m, z):
    out = den(m, z)
    return out.e if isinstance(out, DenoiserOutput) else np.asarray(out)


def se_map(prior: PriorSpec, gamma, quad: QuadratureSpec = QuadratureSpec(), return_stderr=False):
    """T(gamma) for the Bayes-optimal denoiser of ``prior``."""
    gamma = _check_gamma(prior, gamma)
    sampler = channel_sampler(prior, quad)
    den = bayes_denoiser(prior, clamp=True)
    sq = np.sqrt(gamma)

    def fn(x, y, z, w):
        return x * _denoise_values(den, gamma * x + sq * w, z)

    v = sampler.evaluate(fn)
    mean, se = sampler.reduce(v)
    _finite(mean, "map value", gamma)
    mean = np.clip(mean, 0.0, 1.0)
    return (mean, se) if return_stderr else mean


@dataclass
class SEProfile:
    q: np.ndarray
    t: int = 0
    mu: np.ndarray | None = None
    kappa: np.ndarray | None = None


@dataclass
class FixedPointResult:
    """Outcome of a fixed-point iteration started from ``q0``."""

    q: np.ndarray
    q0: np.ndarray
    iterations: int
    converged: bool
    residual: float
    reached_zero: bool
    history: list = field(default_factory=list, repr=False)

    @property
    def profile(self):
        return SEProfile(self.q.copy(), self.iterations)


def se_fixed_point(prior: PriorSpec, lambdas, q0, tol=1e-6, max_iter=10_000,
                   quad: QuadratureSpec = QuadratureSpec(), keep_history=False) -> FixedPointResult:
    """Iterate q <- T(lambda * q) from q0.

    The stopping rule accounts for slow linear contraction near critical
    points: with r the observed contraction ratio, iteration stops once
    |dq| / (1 - r) < tol, an estimate of the distance to the limit. A
    limit within 10 * tol of zero is snapped to the exact zero fixed point
    when T(0) = 0.
    """
    lambdas = _check_gamma(prior, lambdas)
    q = np.broadcast_to(np.asarray(q0, dtype=np.float64), (prior.L,)).copy()
    if np.any(q < 0) or np.any(q > 1):
        raise ParameterError(f"q0 must lie in [0, 1]^L, got {q}")
    start = q.copy()
    history = [q.copy()] if keep_history else []
    prev_step = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        q_new = se_map(prior, lambdas * q, quad)
        step = float(np.max(np.abs(q_new - q)))
        q = q_new
        if keep_history:
            history.append(q.copy())
        if step == 0.0:
            converged = True
            break
        r = 0.0 if prev_step is None or prev_step == 0 else min(step / prev_step, 0.999)
        prev_step = step
        if step < tol and step / (1.0 - r) < tol:
            converged = True
            break
    t_zero = se_map(prior, np.zeros(prior.L), quad)
    reached_zero = False
    if np.all(t_zero == 0.0) and np.max(q) <= 10.0 * tol:
        q = np.zeros(prior.L)
        reached_zero = True
    residual = float(np.max(np.abs(se_map(prior, lambdas * q, quad) - q)))
    return FixedPointResult(q, start, it, converged, residual, reached_zero, history)


DEFAULT_STARTS = (1.0, 0.5, 1e-3)


def se_fixed_points(prior, lambdas, starts=DEFAULT_STARTS, **kwargs):
    """Fixed points reached from each of the constant starts."""
    return [se_fixed_point(prior, lambdas, np.full(prior.L, s), **kwargs) for s in starts]


@dataclass
class GeneralStep:
    mu: np.ndarray
    kappa: np.ndarray
    mu_se: np.ndarray
    kappa_se: np.ndarray
    diff_se: np.ndarray


def se_general_step(prior: PriorSpec, denoiser, mu, kappa, lambdas,
                    quad: QuadratureSpec = QuadratureSpec()) -> GeneralStep:
    """One step of the (mu, kappa) recursion for an arbitrary denoiser.

    ``denoiser(m, z)`` returns posterior-mean-like values (or a
    DenoiserOutput). The channel input is
    m_l = lambda_l mu_l X_l + sqrt(lambda_l kappa_l) W_l.
    """
    lambdas = _check_gamma(prior, lambdas)
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (prior.L,))
    kappa = np.broadcast_to(np.asarray(kappa, dtype=np.float64), (prior.L,))
    if np.any(kappa < 0):
        raise ParameterError(f"kappa must be non-negative, got {kappa}")
    sampler = channel_sampler(prior, quad)
    mean_coef = lambdas * mu
    noise_coef = np.sqrt(lambdas * kappa)
    L = prior.L

    def fn(x, y, z, w):
        e = _denoise_values(denoiser, mean_coef * x + noise_coef * w, z)
        return np.concatenate([x * e, e * e, x * e - e * e], axis=1)

    v = sampler.evaluate(fn)
    mean, se = sampler.reduce(v)
    _finite(mean, "moments", lambdas * mu)
    return GeneralStep(mean[:L], mean[L:2 * L], se[:L], se[L:2 * L], se[2 * L:])


@dataclass
class RayScan:
    t: np.ndarray
    values: np.ndarray  # (K, L)
    stderr: np.ndarray  # (K, L)
    second_diff: np.ndarray  # (K-2, L), interior points
    second_diff_se: np.ndarray
    flagged: list  # (interior index, layer) with second difference > 3 SE

    @property
    def concave(self):
        return not self.flagged


def ray_concavity_scan(prior: PriorSpec, gamma, t_grid, quad: QuadratureSpec = QuadratureSpec(),
                       threshold=3.0) -> RayScan:
    """Evaluate t -> T(t * gamma) and check discrete concavity.

    Second differences use the three-point divided-difference weights so
    that non-uniform grids are handled; their standard errors come from the
    per-sample combination under common random numbers.
    """
    gamma = _check_gamma(prior, gamma)
    if not np.any(gamma > 0):
        raise ParameterError("direction gamma must be non-zero")
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or t.size < 3 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ParameterError("t_grid must be an increasing sequence of at least 3 non-negative values")
    sampler = channel_sampler(prior, quad)
    den = bayes_denoiser(prior, clamp=True)

    def samples_at(s):
        g = s * gamma
        sq = np.sqrt(g)
        return sampler.evaluate(lambda x, y, z, w: x * _denoise_values(den, g * x + sq * w, z))

    K, L = t.size, prior.L
    values = np.empty((K, L))
    errs = np.empty((K, L))
    d2 = np.empty((K - 2, L))
    d2_se = np.empty((K - 2, L))
    window = []
    for k in range(K):
        v = samples_at(t[k])
        values[k], errs[k] = sampler.reduce(v)
        window.append(v)
        if len(window) > 3:
            window.pop(0)
        if k >= 2:
            h1, h2 = t[k - 1] - t[k - 2], t[k] - t[k - 1]
            c = np.array([2.0 / (h1 * (h1 + h2)), -2.0 / (h1 * h2), 2.0 / (h2 * (h1 + h2))])
            comb = c[0] * window[0] + c[1] * window[1] + c[2] * window[2]
            d2[k - 2], d2_se[k - 2] = sampler.reduce(comb)
    tiny = 1e-12 * np.maximum(1.0, np.abs(d2))
    flagged = [(int(i), int(l)) for i, l in zip(*np.nonzero(d2 > threshold * d2_se + tiny))]
    return RayScan(t, values, errs, d2, d2_se, flagged)


def write_fixed_point_csv(result: FixedPointResult, path, stderr=None):
    """Rows (iteration, layer, value, stderr) along the recorded history."""
    history = result.history or [result.q]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "layer", "value", "stderr"])
        for it, q in enumerate(history):
            for l, v in enumerate(q):
                se = "" if stderr is None else format(float(stderr[l]), ".17g")
                w.writerow([it, l + 1, format(float(v), ".17g"), se])


def write_scan_csv(scan: RayScan, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "layer", "value", "stderr"])
        for k, tk in enumerate(scan.t):
            for l in range(scan.values.shape[1]):
                w.writerow([format(float(tk), ".17g"), l + 1,
                            format(float(scan.values[k, l]), ".17g"),
                            format(float(scan.stderr[k, l]), ".17g")])
