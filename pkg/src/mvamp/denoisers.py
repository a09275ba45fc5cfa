"""Posterior-mean denoisers for the L-dimensional Gaussian scalar channel.

All denoisers act row-wise on an array ``m`` of shape ``(..., L)`` of
pseudo-observations and return the posterior mean ``e = E[x | m, z]`` under
the tilted law ``p(x, y | z) * exp(<m, x>)``. Because the tilt is linear in
``m_l`` and ``x_l**2 = 1``, the own-coordinate derivative is the posterior
variance ``1 - e_l**2``; the denoisers return it analytically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .errors import EnumerationBudgetError, ParameterError
from .models import STAR, Family, PriorSpec

LOG2 = np.log(2.0)

ENUMERATION_BUDGET = 20

RHO_MIN = 1e-8


@dataclass(frozen=True)
class DenoiserOutput:
    e: np.ndarray
    de: np.ndarray


def logcosh(u):
    """log(cosh(u)) without overflow."""
    a = np.abs(u)
    return a - LOG2 + np.log1p(np.exp(-2.0 * a))


def _as_rows(m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 0:
        m = m[None]
    return m


def _rho_bar(rho, clamp=False, rho_min=RHO_MIN):
    rho = float(rho)
    if clamp:
        rho = min(max(rho, rho_min), 1.0 - rho_min)
    elif not (0.0 < rho < 1.0):
        raise ParameterError(f"rho must lie in (0, 1) for the multilayer denoiser, got {rho} (pass clamp=True)")
    return 0.5 * np.log((1.0 - rho) / rho)


def _ml_logits(m, rho_bar):
    s_plus = logcosh(m + rho_bar).sum(axis=-1)
    s_minus = logcosh(m - rho_bar).sum(axis=-1)
    return s_plus - s_minus


def denoise_ml(m, rho, clamp=False, rho_min=RHO_MIN) -> DenoiserOutput:
    """Multilayer prior: mix the two conditional-on-y tanh responses."""
    m = _as_rows(m)
    rb = _rho_bar(rho, clamp, rho_min)
    w = expit(_ml_logits(m, rb))[..., None]  # P(y = +1 | m)
    e = w * np.tanh(m + rb) + (1.0 - w) * np.tanh(m - rb)
    return DenoiserOutput(e, 1.0 - e * e)


def denoise_ml_global(m, rho, clamp=False, rho_min=RHO_MIN):
    """E[y | m] for the multilayer prior."""
    m = _as_rows(m)
    rb = _rho_bar(rho, clamp, rho_min)
    return np.tanh(0.5 * _ml_logits(m, rb))


def _log_transition(rho):
    with np.errstate(divide="ignore"):
        return np.log1p(-rho), np.log(rho)


def _dyn_forward(m, rho):
    """Log-domain forward table g[l, s] (s=0 for +1, s=1 for -1), shape (L, 2, ...)."""
    L = m.shape[-1]
    log_same, log_flip = _log_transition(rho)
    g = np.empty((L, 2) + m.shape[:-1])
    g[0, 0] = m[..., 0] - LOG2
    g[0, 1] = -m[..., 0] - LOG2
    for l in range(1, L):
        g[l, 0] = m[..., l] + np.logaddexp(g[l - 1, 0] + log_same, g[l - 1, 1] + log_flip)
        g[l, 1] = -m[..., l] + np.logaddexp(g[l - 1, 0] + log_flip, g[l - 1, 1] + log_same)
    return g


def denoise_dyn(m, rho) -> DenoiserOutput:
    """Markov-chain prior: forward filter then backward smoothing of the means.

    The backward pass uses E[x_l | x_{l+1} = b, m_1..m_l] =
    tanh((g_l(+) - g_l(-)) / 2 + b * rho_bar), which stays finite for
    rho in {0, 1} where rho_bar is infinite.
    """
    m = _as_rows(m)
    rho = float(rho)
    if not (0.0 <= rho <= 1.0):
        raise ParameterError(f"rho must lie in [0, 1], got {rho}")
    L = m.shape[-1]
    g = _dyn_forward(m, rho)
    half_h = 0.5 * (g[:, 0] - g[:, 1])
    with np.errstate(divide="ignore"):
        rb = 0.5 * (np.log1p(-rho) - np.log(rho)) if 0 < rho < 1 else (np.inf if rho == 0 else -np.inf)
    e = np.empty_like(m)
    e[..., L - 1] = np.tanh(half_h[L - 1])
    for l in range(L - 2, -1, -1):
        p_next = 0.5 * (1.0 + e[..., l + 1])
        e[..., l] = p_next * np.tanh(half_h[l] + rb) + (1.0 - p_next) * np.tanh(half_h[l] - rb)
    return DenoiserOutput(e, 1.0 - e * e)


def dyn_log_partition(m, rho):
    """log E_x[exp(<m, x>)] under the Markov-chain prior, via the forward table."""
    m = _as_rows(m)
    g = _dyn_forward(m, float(rho))
    return np.logaddexp(g[-1, 0], g[-1, 1])


def _semi_rows(m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim >= 1 and m.shape[-1] == 1:
        return m[..., 0], True
    return m, False


def denoise_semi(m, z, delta) -> DenoiserOutput:
    """Single layer with side information.

    ``z`` is an int8 array with 0 for the unknown symbol (or None for all
    unknown). For unrevealed nodes ``e = (tanh m + delta) / (1 + delta tanh m)
    = tanh(m + atanh delta)``, the second form staying finite at |delta| = 1.
    """
    delta = float(delta)
    if not (-1.0 <= delta <= 1.0) or np.isnan(delta):
        raise ParameterError(f"|delta| must be at most 1, got {delta}")
    m_flat, had_axis = _semi_rows(m)
    with np.errstate(divide="ignore"):
        shift = np.arctanh(delta)
    e = np.tanh(m_flat + shift)
    de = 1.0 - e * e
    if z is not None:
        z = np.asarray(z)
        revealed = z != STAR
        e = np.where(revealed, z, e).astype(np.float64)
        de = np.where(revealed, 0.0, de)
    if had_axis:
        e, de = e[..., None], de[..., None]
    return DenoiserOutput(e, de)


def bayes_denoiser(prior: PriorSpec, clamp=False):
    """Return ``f(m, z) -> DenoiserOutput`` for the Bayes-optimal denoiser of ``prior``."""
    if prior.family is Family.MULTILAYER:
        rho = prior.rho
        return lambda m, z=None: denoise_ml(m, rho, clamp=clamp)
    if prior.family is Family.DYNAMIC:
        rho = prior.rho
        return lambda m, z=None: denoise_dyn(m, rho)
    # with every label revealed delta is undefined and never used
    delta = prior.delta if prior.eps < 1.0 else 0.0
    return lambda m, z=None: denoise_semi(m, z, delta)


# ---------------------------------------------------------------------------
# enumeration oracle

def _states(count, order):
    idx = np.arange(2 ** count, dtype=np.int64)
    if order == "gray":
        idx = idx ^ (idx >> 1)
    elif order != "lex":
        raise ParameterError(f"unknown enumeration order {order!r}")
    bits = (idx[:, None] >> np.arange(count)[None, :]) & 1
    return 1 - 2 * bits  # bit 0 -> +1


def _log_prior_table(prior: PriorSpec, order):
    """States (S x L) for x and log p(x, y) after summing nothing out (y kept in extra columns)."""
    L = prior.L
    L1 = prior.implicit_layers
    if L + L1 > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(
            f"enumeration over 2^{L + L1} states exceeds the budget 2^{ENUMERATION_BUDGET}"
        )
    s = _states(L + L1, order)
    x = s[:, :L]
    with np.errstate(divide="ignore"):
        log_same, log_flip = np.log1p(-prior.rho), np.log(prior.rho)
    if prior.family is Family.MULTILAYER:
        y = s[:, L]
        agree = x == y[:, None]
        logp = -LOG2 + np.where(agree, log_same, log_flip).sum(axis=1)
    elif prior.family is Family.DYNAMIC:
        logp = np.full(s.shape[0], -LOG2)
        if L > 1:
            agree = x[:, 1:] == x[:, :-1]
            logp = logp + np.where(agree, log_same, log_flip).sum(axis=1)
    else:
        logp = np.full(s.shape[0], -LOG2)
    return x.astype(np.float64), logp


def _semi_log_prior(prior, x, z):
    """log p(x, z) for each row of z (n,) and each state in x (S, 1)."""
    with np.errstate(divide="ignore"):
        lp_plus_star = np.log1p(-prior.eps_plus)
        lp_minus_star = np.log1p(-prior.eps_minus)
        lp_plus_rev = np.log(prior.eps_plus)
        lp_minus_rev = np.log(prior.eps_minus)
    xs = x[:, 0][None, :]
    zz = z[:, None]
    star = np.where(xs > 0, lp_plus_star, lp_minus_star)
    rev = np.where(xs > 0, lp_plus_rev, lp_minus_rev)
    return -LOG2 + np.where(zz == STAR, star, np.where(zz == xs, rev, -np.inf))


def _log_weights(prior, m, z, order):
    m = _as_rows(m)
    if m.shape[-1] != prior.L:
        raise ParameterError(f"expected {prior.L} coordinates, got {m.shape[-1]}")
    flat = m.reshape(-1, prior.L)
    x, logp = _log_prior_table(prior, order)
    if prior.family is Family.SEMI:
        if z is None:
            zz = np.full(flat.shape[0], STAR, dtype=np.int8)
        else:
            zz = np.broadcast_to(np.asarray(z), m.shape[:-1]).reshape(-1)
        logw = flat @ x.T + _semi_log_prior(prior, x, zz)
    else:
        logw = flat @ x.T + logp[None, :]
    return m.shape, x, logw


def denoise_bruteforce(prior: PriorSpec, m, z=None, order="lex"):
    """Exact E[x | m, z] by enumerating every latent state (x, y)."""
    shape, x, logw = _log_weights(prior, m, z, order)
    out = np.empty((logw.shape[0], prior.L))
    for l in range(prior.L):
        plus = x[:, l] > 0
        lse_p = logsumexp(logw[:, plus], axis=1)
        lse_m = logsumexp(logw[:, ~plus], axis=1)
        out[:, l] = np.tanh(0.5 * (lse_p - lse_m))
    return out.reshape(shape)


def bruteforce_global(prior: PriorSpec, m, order="lex"):
    """Exact E[y | m] for the multilayer prior by enumeration."""
    if prior.family is not Family.MULTILAYER:
        raise ParameterError("the global label exists only for the multilayer prior")
    shape, _, logw = _log_weights(prior, m, None, order)
    y = _states(prior.L + 1, order)[:, prior.L]
    lse_p = logsumexp(logw[:, y > 0], axis=1)
    lse_m = logsumexp(logw[:, y < 0], axis=1)
    return np.tanh(0.5 * (lse_p - lse_m)).reshape(shape[:-1])


def posterior_moments(prior: PriorSpec, m, z=None):
    """Posterior mean (..., L) and second moment (..., L, L) by enumeration."""
    shape, x, logw = _log_weights(prior, m, z, "lex")
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    mean = w @ x
    second = np.einsum("ns,sa,sb->nab", w, x, x)
    L = prior.L
    return mean.reshape(shape), second.reshape(shape[:-1] + (L, L))


def prior_correlation(prior: PriorSpec):
    """E[x_a x_b] under the prior (L x L)."""
    L = prior.L
    r = 1.0 - 2.0 * prior.rho
    if prior.family is Family.MULTILAYER:
        C = np.full((L, L), r * r)
        np.fill_diagonal(C, 1.0)
        return C
    if prior.family is Family.DYNAMIC:
        k = np.abs(np.subtract.outer(np.arange(L), np.arange(L)))
        return r ** k
    return np.ones((1, 1))


def all_states(L):
    """Every x in {+1, -1}^L as rows, in lexicographic order."""
    return np.array(list(itertools.product([1, -1], repeat=L)), dtype=np.float64)
