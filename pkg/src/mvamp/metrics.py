"""Recovery metrics for +-1 community labels."""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


def _pair(xhat, x):
    xhat = np.asarray(xhat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if xhat.shape != x.shape:
        raise ParameterError(f"length mismatch: {xhat.shape} vs {x.shape}")
    if x.size == 0:
        raise ParameterError("empty label vectors")
    return xhat, x


def overlap(xhat, x):
    """|<xhat, x>| / n."""
    xhat, x = _pair(xhat, x)
    return float(abs(xhat @ x) / x.size)


def accuracy(xhat, x):
    """Fraction of agreeing labels under the better of the two global signs."""
    xhat, x = _pair(xhat, x)
    agree = float(np.mean(xhat == x))
    return max(agree, 1.0 - agree)


def comembership_mse(chat, x):
    """(2 / (n(n-1))) sum_{i<j} (x_i x_j - c_ij)^2.

    ``chat`` is either a full n x n matrix or a vector u standing for the
    rank-one estimate c_ij = u_i u_j. In the factored case the sum expands as
    sum_{i<j} [1 - 2 x_i x_j u_i u_j + u_i^2 u_j^2]
      = n(n-1)/2 - (S_xu^2 - S_uu) + (S_uu^2 - S_u4) / 2
    with S_xu = sum x_i u_i, S_uu = sum u_i^2, S_u4 = sum u_i^4, so memory
    stays O(n).
    """
    x = np.asarray(x, dtype=np.float64)
    chat = np.asarray(chat, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ParameterError("need at least two nodes")
    pairs = n * (n - 1) / 2.0
    if chat.ndim == 1:
        if chat.shape != x.shape:
            raise ParameterError(f"length mismatch: {chat.shape} vs {x.shape}")
        u = chat
        s_xu = float(x @ u)
        u2 = u * u
        s_uu = float(u2.sum())
        s_u4 = float(u2 @ u2)
        total = pairs - (s_xu * s_xu - s_uu) + 0.5 * (s_uu * s_uu - s_u4)
        return max(total, 0.0) / pairs
    if chat.shape != (n, n):
        raise ParameterError(f"expected an {n} x {n} estimate, got {chat.shape}")
    iu = np.triu_indices(n, 1)
    diff = np.outer(x, x)[iu] - chat[iu]
    return float(diff @ diff) / pairs


@dataclass
class RecoveryScore:
    overlap: np.ndarray
    accuracy: np.ndarray
    global_accuracy: float | None
    mse_est: np.ndarray


def recovery_score(xhat, X, soft=None, yhat=None, Y=None):
    """Per-layer overlap/accuracy, optional global accuracy and co-membership MSE.

    ``soft`` (n x L posterior means) feeds the factored MSE; without it the
    hard estimates are used.
    """
    xhat = np.asarray(xhat)
    X = np.asarray(X)
    L = X.shape[1]
    ov = np.array([overlap(xhat[:, l], X[:, l]) for l in range(L)])
    acc = np.array([accuracy(xhat[:, l], X[:, l]) for l in range(L)])
    u = xhat if soft is None else soft
    mse = np.array([comembership_mse(u[:, l], X[:, l]) for l in range(L)])
    g = None
    if yhat is not None and Y is not None:
        g = accuracy(yhat, Y)
    return RecoveryScore(ov, acc, g, mse)
