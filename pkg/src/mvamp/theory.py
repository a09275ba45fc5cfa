"""Free energies, the variational objective G, limiting information
quantities and weak-recovery thresholds.

Conventions
-----------
``F(lam, q)`` is the raw scalar-channel free energy
``E log sum_{x,y} p(x, y | Z) exp(sum_l gamma_l x_l X_l + sqrt(gamma_l) W_l x_l)``
with ``gamma = lam * q``, so that ``F(lam, 0) = 0``. The objective is
``G(q) = F(lam, q) - sum_l lam_l (q_l**2 + 2 q_l) / 4`` and the limiting
mutual information per node is ``i_p + sum(lam) / 4 - max_q G(q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import xlogy

from .denoisers import (
    LOG2,
    denoise_ml_global,
    dyn_log_partition,
    logcosh,
    posterior_moments,
    prior_correlation,
)
from .errors import ParameterError, RegimeError, SolverError
from .models import Family, PriorSpec
from .state_evolution import (
    DEFAULT_STARTS,
    QuadratureSpec,
    _check_gamma,
    _finite,
    channel_sampler,
    se_fixed_point,
    se_map,
)

THRESHOLD_NOTE = (
    "information-theoretic threshold; that no estimator succeeds below it "
    "is conjectural"
)


# ---------------------------------------------------------------------------
# free energy

def _log_softplus_pair(h):
    """log(1 + tanh h) and log(1 - tanh h), finite for all h."""
    return LOG2 - np.logaddexp(0.0, -2.0 * h), LOG2 - np.logaddexp(0.0, 2.0 * h)


def _semi_free_energy_samples(prior, gamma, w):
    """Per-noise free energy of the semi prior with X integrated out."""
    eps = prior.eps
    if eps >= 1.0:
        return np.full(w.shape[0], gamma[0])
    delta = prior.delta
    g = gamma[0]
    h = g + math.sqrt(g) * w[:, 0]
    lp, lm = _log_softplus_pair(h)
    with np.errstate(divide="ignore"):
        a, b = np.log1p(delta) - LOG2, np.log1p(-delta) - LOG2
    # log(1 + delta t) and log(1 - delta t) as mixtures of log(1 +- t)
    log_1p = np.logaddexp(a + lp, b + lm)
    log_1m = np.logaddexp(b + lp, a + lm)
    body = 2.0 * logcosh(h)
    if delta > -1.0:
        body = body + (1.0 + delta) * log_1p
    if delta < 1.0:
        body = body + (1.0 - delta) * log_1m
    return eps * g + 0.5 * (1.0 - eps) * body


def _free_energy_fn(prior, gamma):
    sq = np.sqrt(gamma)
    if prior.family is Family.MULTILAYER:
        with np.errstate(divide="ignore"):
            ls, lf = np.log1p(-prior.rho), np.log(prior.rho)

        def fn(x, y, z, w):
            u = gamma * x + sq * w
            a_plus = np.logaddexp(ls + u, lf - u).sum(axis=1)
            a_minus = np.logaddexp(ls - u, lf + u).sum(axis=1)
            return (np.logaddexp(a_plus, a_minus) - LOG2)[:, None]
    elif prior.family is Family.DYNAMIC:
        def fn(x, y, z, w):
            return dyn_log_partition(gamma * x + sq * w, prior.rho)[:, None]
    else:
        def fn(x, y, z, w):
            return _semi_free_energy_samples(prior, gamma, w)[:, None]
    return fn


def scalar_free_energy(prior: PriorSpec, lambdas, q, quad: QuadratureSpec = QuadratureSpec(),
                       return_stderr=False):
    """F(lambda, q) via the closed forms of each prior."""
    lambdas = _check_gamma(prior, lambdas)
    q = _check_gamma(prior, q)
    gamma = lambdas * q
    sampler = channel_sampler(prior, quad)
    v = sampler.evaluate(_free_energy_fn(prior, gamma))
    mean, se = sampler.reduce(v)
    _finite(mean, "free energy", gamma)
    return (float(mean[0]), float(se[0])) if return_stderr else float(mean[0])


def _quadratic_term(lambdas, q):
    return float(np.sum(lambdas * (q * q + 2.0 * q)) / 4.0)


def g_objective(prior, lambdas, q, quad: QuadratureSpec = QuadratureSpec(), return_stderr=False):
    lambdas = _check_gamma(prior, lambdas)
    q = _check_gamma(prior, q)
    f, se = scalar_free_energy(prior, lambdas, q, quad, return_stderr=True)
    g = f - _quadratic_term(lambdas, q)
    return (g, se) if return_stderr else g


def g_objective_difference(prior, lambdas, q1, q2, quad: QuadratureSpec = QuadratureSpec()):
    """G(q1) - G(q2) with its standard error under common random numbers."""
    lambdas = _check_gamma(prior, lambdas)
    q1, q2 = _check_gamma(prior, q1), _check_gamma(prior, q2)
    sampler = channel_sampler(prior, quad)
    f1 = _free_energy_fn(prior, lambdas * q1)
    f2 = _free_energy_fn(prior, lambdas * q2)
    v = sampler.evaluate(lambda x, y, z, w: f1(x, y, z, w) - f2(x, y, z, w))
    mean, se = sampler.reduce(v)
    diff = float(mean[0]) - _quadratic_term(lambdas, q1) + _quadratic_term(lambdas, q2)
    return diff, float(se[0])


def g_gradient(prior, lambdas, q, quad: QuadratureSpec = QuadratureSpec()):
    """(lambda_l / 2) (T_l(lambda * q) - q_l)."""
    lambdas = _check_gamma(prior, lambdas)
    q = _check_gamma(prior, q)
    return 0.5 * lambdas * (se_map(prior, lambdas * q, quad) - q)


def g_hessian(prior, lambdas, q, quad: QuadratureSpec = QuadratureSpec(), return_stderr=False):
    """(1/2) lam lam^T * E[Cov(x | m)^2] - (1/2) diag(lam), by enumeration per sample."""
    lambdas = _check_gamma(prior, lambdas)
    q = _check_gamma(prior, q)
    gamma = lambdas * q
    sq = np.sqrt(gamma)
    L = prior.L
    sampler = channel_sampler(prior, quad)

    def fn(x, y, z, w):
        mean, second = posterior_moments(prior, gamma * x + sq * w, z)
        cov = second - mean[:, :, None] * mean[:, None, :]
        return (cov * cov).reshape(-1, L * L)

    v = sampler.evaluate(fn)
    mean, se = sampler.reduce(v)
    outer = np.outer(lambdas, lambdas)
    H = 0.5 * outer * mean.reshape(L, L) - 0.5 * np.diag(lambdas)
    if return_stderr:
        return H, 0.5 * outer * se.reshape(L, L)
    return H


def hessian_at_zero(prior: PriorSpec, lambdas):
    """Closed form (1/2) lam lam^T * C^2 - (1/2) diag(lam), C the prior correlation."""
    lambdas = _check_gamma(prior, lambdas)
    C = prior_correlation(prior)
    return 0.5 * np.outer(lambdas, lambdas) * C * C - 0.5 * np.diag(lambdas)


# ---------------------------------------------------------------------------
# maximisation and limiting quantities

def side_information(prior: PriorSpec):
    """i_p = I(x, y; z) per node (zero when no side information is observed)."""
    if prior.family is not Family.SEMI:
        return 0.0
    eps = prior.eps
    if eps >= 1.0:
        return LOG2
    d = prior.delta
    return float(eps * LOG2 + 0.5 * (1.0 - eps) * (xlogy(1.0 + d, 1.0 + d) + xlogy(1.0 - d, 1.0 - d)))


def dummy_mse(prior: PriorSpec):
    """Co-membership MSE of the best constant-in-graph estimator."""
    if prior.family is not Family.SEMI:
        return np.ones(prior.L)
    t0 = prior.eps + (1.0 - prior.eps) * prior.delta ** 2 if prior.eps < 1.0 else 1.0
    return np.array([1.0 - t0 * t0])


def implicit_overlap(prior: PriorSpec, lambdas, q, quad: QuadratureSpec = QuadratureSpec()):
    """E[Y E(Y | m)] for the multilayer global label at channel SNR lam * q, with its SE."""
    if prior.family is not Family.MULTILAYER:
        raise ParameterError("implicit labels exist only for the multilayer prior")
    gamma = _check_gamma(prior, lambdas) * _check_gamma(prior, q)
    sq = np.sqrt(gamma)
    sampler = channel_sampler(prior, quad)
    rho = prior.rho

    def fn(x, y, z, w):
        return (y[:, 0] * denoise_ml_global(gamma * x + sq * w, rho, clamp=True))[:, None]

    mean, se = sampler.reduce(sampler.evaluate(fn))
    return float(mean[0]), float(se[0])


@dataclass
class FreeEnergyResult:
    q_star: np.ndarray
    G_star: float
    G_star_se: float
    G_zero: float
    mi_limit: float
    mmse_layers: np.ndarray
    mmse_implicit: float | None
    mmse_implicit_se: float | None
    dmse: np.ndarray
    i_p: float
    fixed_points_examined: list = field(default_factory=list)
    near_degenerate: bool = False
    converged: bool = True


def _distinct(points, atol=1e-4):
    out = []
    for q in points:
        if not any(np.max(np.abs(q - r)) <= atol for r in out):
            out.append(q)
    return out


def maximize_g(prior: PriorSpec, lambdas, quad: QuadratureSpec = QuadratureSpec(), tol=1e-6,
               max_iter=10_000, starts=DEFAULT_STARTS, tie_sigmas=3.0) -> FreeEnergyResult:
    """Maximise G over the fixed points of q -> T(lam * q) reached from several starts.

    Candidates are compared by G differences under common random numbers; a
    runner-up within ``tie_sigmas`` standard errors (or 1e-10 for exact
    quadrature) sets ``near_degenerate``.
    """
    lambdas = _check_gamma(prior, lambdas)
    results = [se_fixed_point(prior, lambdas, np.full(prior.L, s), tol=tol, max_iter=max_iter, quad=quad)
               for s in starts]
    candidates = [r.q for r in results]
    zero = np.zeros(prior.L)
    zero_is_fixed = bool(np.all(se_map(prior, zero, quad) == 0.0))
    if zero_is_fixed:
        candidates.append(zero)
    candidates = _distinct(candidates)
    values = []
    for c in candidates:
        g, se = g_objective(prior, lambdas, c, quad, return_stderr=True)
        values.append((g, se))
    best = int(np.argmax([g for g, _ in values]))
    q_star = candidates[best]
    near = False
    for k, c in enumerate(candidates):
        if k == best:
            continue
        diff, se = g_objective_difference(prior, lambdas, q_star, c, quad)
        if diff < max(tie_sigmas * se, 1e-10):
            near = True
    G_star, G_se = values[best]
    i_p = side_information(prior)
    mi = i_p + float(np.sum(lambdas)) / 4.0 - G_star
    mmse_implicit = mmse_implicit_se = None
    if prior.family is Family.MULTILAYER:
        ov, ov_se = implicit_overlap(prior, lambdas, q_star, quad)
        mmse_implicit = 1.0 - ov * ov
        mmse_implicit_se = 2.0 * abs(ov) * ov_se
    return FreeEnergyResult(
        q_star=q_star,
        G_star=G_star,
        G_star_se=G_se,
        G_zero=0.0,
        mi_limit=mi,
        mmse_layers=1.0 - q_star * q_star,
        mmse_implicit=mmse_implicit,
        mmse_implicit_se=mmse_implicit_se,
        dmse=dummy_mse(prior),
        i_p=i_p,
        fixed_points_examined=[(c, g) for c, (g, _) in zip(candidates, values)],
        near_degenerate=near,
        converged=all(r.converged for r in results),
    )


def limiting_quantities(prior: PriorSpec, lambdas, quad: QuadratureSpec = QuadratureSpec(), **kwargs):
    """(mi_limit, mmse_layers, mmse_implicit, dmse)."""
    r = maximize_g(prior, lambdas, quad, **kwargs)
    return r.mi_limit, r.mmse_layers, r.mmse_implicit, r.dmse


# ---------------------------------------------------------------------------
# thresholds

@dataclass
class ThresholdReport:
    feasible: bool
    criterion_value: float | None
    critical_lambda: float | None
    theta_star: float | None
    hessian_max_eig: float
    leading_eigvec_sign_ok: bool
    signals_agree: bool = True
    note: str = THRESHOLD_NOTE

    def to_dict(self):
        return {
            "feasible": bool(self.feasible),
            "criterion_value": self.criterion_value,
            "critical_lambda": self.critical_lambda,
            "theta_star": self.theta_star,
            "hessian_max_eig": self.hessian_max_eig,
            "leading_eigvec_sign_ok": bool(self.leading_eigvec_sign_ok),
            "signals_agree": bool(self.signals_agree),
            "note": self.note,
        }


def _check_rho_half(rho, strict_low=False):
    rho = float(rho)
    low_ok = rho > 0.0 if strict_low else rho >= 0.0
    if not (low_ok and rho <= 0.5):
        raise ParameterError(f"rho must lie in {'(0' if strict_low else '[0'}, 1/2], got {rho}")
    return rho


def ml_criterion(lambdas, rho):
    """sum_l c lam_l / (1 - (1 - c) lam_l) with c = (1 - 2 rho)^4, for lam_l <= 1."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if np.any(lambdas < 0):
        raise ParameterError(f"lambdas must be non-negative, got {lambdas}")
    if np.any(lambdas > 1.0):
        raise RegimeError(
            "the criterion is defined for lambda_l <= 1; a layer with lambda > 1 "
            "is already weakly recoverable on its own"
        )
    c = (1.0 - 2.0 * rho) ** 4
    denom = 1.0 - (1.0 - c) * lambdas
    if np.any(denom <= 0):
        raise RegimeError("criterion denominator vanishes (lambda_l = 1 with rho = 1/2)")
    return float(np.sum(c * lambdas / denom))


def ml_critical_lambda(L, rho):
    """Equal-SNR critical value 1 / (1 + (L - 1)(1 - 2 rho)^4)."""
    return 1.0 / (1.0 + (L - 1) * (1.0 - 2.0 * rho) ** 4)


def _eig_report(H):
    evals = np.linalg.eigvalsh(H)
    max_eig = float(evals[-1])
    return max_eig, leading_vector_nonnegative(H)


def leading_vector_nonnegative(H, tol=1e-9):
    """True when the top eigenvector of symmetric H is entrywise non-negative up to a global sign.

    Uses a dense symmetric eigensolver; when the top eigenvalue is repeated
    any non-negative vector in its eigenspace's basis counts.
    """
    evals, evecs = np.linalg.eigh(H)
    top = evals[-1]
    scale = max(1.0, float(np.max(np.abs(evals))))
    for k in np.nonzero(evals >= top - 1e-10 * scale)[0]:
        v = evecs[:, k]
        v = v if v.sum() >= 0 else -v
        if np.all(v >= -tol):
            return True
    return False


def threshold_ml(lambdas, rho) -> ThresholdReport:
    """Weak-recovery verdict for the multilayer model with all lam_l <= 1."""
    rho = _check_rho_half(rho)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    crit = ml_criterion(lambdas, rho)
    prior = PriorSpec.multilayer(lambdas.size, rho)
    H = hessian_at_zero(prior, lambdas)
    max_eig, sign_ok = _eig_report(H)
    feasible = crit > 1.0
    crit_lam = None
    if np.allclose(lambdas, lambdas[0]):
        crit_lam = ml_critical_lambda(lambdas.size, rho)
    return ThresholdReport(feasible, crit, crit_lam, None, max_eig, sign_ok,
                           signals_agree=(max_eig > 0) == feasible)


def ml_determinant_identity(lambdas, rho):
    """Both sides of (-1)^L det(2 H(0)) = prod_l d_l (1 - criterion), d_l = lam_l (1 - (1-c) lam_l)."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    L = lambdas.size
    c = (1.0 - 2.0 * rho) ** 4
    H = hessian_at_zero(PriorSpec.multilayer(L, rho), lambdas)
    lhs = (-1) ** L * np.linalg.det(2.0 * H)
    d = lambdas * (1.0 - (1.0 - c) * lambdas)
    rhs = float(np.prod(d)) * (1.0 - ml_criterion(lambdas, rho))
    return float(lhs), rhs


def _theta_equation(L, rho):
    r = (1.0 - 2.0 * rho) ** 2
    return lambda t: math.sin((L + 1) * t) - 2.0 * r * math.sin(L * t) + r * r * math.sin((L - 1) * t)


def theta_star(L, rho, grid=4096):
    """Smallest positive root of sin((L+1)t) - 2 r sin(L t) + r^2 sin((L-1)t), r = (1-2 rho)^2."""
    L = int(L)
    if L < 1:
        raise ParameterError(f"L must be positive, got {L}")
    rho = float(rho)
    if not (0.0 < rho < 0.5):
        raise ParameterError(f"rho must lie in (0, 1/2), got {rho}")
    f = _theta_equation(L, rho)
    upper = math.pi / (L + 1)
    ts = np.linspace(upper / grid, upper, grid)
    vals = np.array([f(t) for t in ts])
    change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    if change.size == 0:
        raise SolverError(f"no sign change of the angle equation on (0, pi/(L+1)] for L={L}, rho={rho}")
    k = int(change[0])
    lo, hi = float(ts[k]), float(ts[k + 1])
    if vals[k] == 0.0:
        return lo
    root = bisect(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(root)) >= 1e-12:
        raise SolverError(f"angle equation residual {abs(f(root)):.3g} too large at L={L}, rho={rho}")
    return float(root)


def kms_matrix(L, r):
    """Kac-Murdock-Szego matrix (r^{|i-j|})."""
    k = np.abs(np.subtract.outer(np.arange(L), np.arange(L)))
    return np.power(float(r), k)


def dyn_critical_lambda(L, rho):
    """Equal-SNR dynamic threshold (1 - 2 r cos t* + r^2) / (1 - r^2) with r = (1-2 rho)^2."""
    r = (1.0 - 2.0 * rho) ** 2
    t = theta_star(L, rho)
    return (1.0 - 2.0 * r * math.cos(t) + r * r) / (1.0 - r * r), t


def threshold_dyn(L, rho, lam=None) -> ThresholdReport:
    """Critical equal SNR of the dynamic model, optionally with a verdict at ``lam``.

    The closed form is cross-checked against 1 / lambda_max of the KMS
    matrix; the endpoint rho = 1/2 (independent layers) and rho = 0 (frozen
    chain) go through the eigenvalue route only.
    """
    L = int(L)
    rho = _check_rho_half(rho)
    K = kms_matrix(L, (1.0 - 2.0 * rho) ** 2)
    lam_max = float(np.linalg.eigvalsh(K)[-1])
    if 0.0 < rho < 0.5:
        lam_c, t = dyn_critical_lambda(L, rho)
        if abs(lam_c * lam_max - 1.0) > 1e-6:
            raise SolverError(f"closed-form threshold {lam_c} disagrees with 1/lambda_max = {1 / lam_max}")
    else:
        lam_c, t = 1.0 / lam_max, None
    probe = lam_c if lam is None else float(lam)
    prior = PriorSpec.dynamic(L, rho)
    H = hessian_at_zero(prior, np.full(L, probe))
    max_eig, sign_ok = _eig_report(H)
    if lam is None:
        return ThresholdReport(False, None, lam_c, t, max_eig, sign_ok)
    feasible = probe > lam_c
    crit = probe * lam_max
    return ThresholdReport(feasible, crit, lam_c, t, max_eig, sign_ok,
                           signals_agree=(max_eig > 0) == feasible)


def hessian_zero_feasibility(prior: PriorSpec, lambdas) -> ThresholdReport:
    """General-SNR test: is there v > 0 with v^T H(0) v > 0?

    Implemented as max-eig(H(0)) > 0 together with a non-negativity check of
    the leading eigenvector; ``signals_agree`` is False whenever the two
    disagree.
    """
    if prior.family is Family.SEMI:
        raise ParameterError("the zero-Hessian test applies to the multilayer and dynamic priors")
    lambdas = _check_gamma(prior, lambdas)
    H = hessian_at_zero(prior, lambdas)
    max_eig, sign_ok = _eig_report(H)
    feasible = max_eig > 0
    return ThresholdReport(feasible, max_eig, None, None, max_eig, sign_ok,
                           signals_agree=sign_ok or not feasible)
