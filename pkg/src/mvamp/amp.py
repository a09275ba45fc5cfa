"""Coupled approximate message passing across L views.

Each iteration denoises the current pseudo-observations row-wise, multiplies
every layer's matrix by its column of posterior means, and subtracts the
Onsager memory term:

    m^{t+1}_{:, l} = sqrt(lam_l / n) A_l e^t_{:, l} - lam_l d^t_l e^{t-1}_{:, l}

with d^t_l the empirical mean of the denoiser derivative and e^{-1} = 0.
The same recursion runs on dense spiked matrices and on rescaled sparse
graphs; any object with ``n``, ``L``, ``lambdas``, ``observed(l)`` and
``matvec(l, v)`` works as a view.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .denoisers import DenoiserOutput, bayes_denoiser, denoise_dyn, denoise_ml_global
from .errors import DivergedRunError, ParameterError
from .models import Family, LatentPopulation, MultiViewGraph, PriorSpec, rescale_graph
from .rng import stream


@dataclass
class AmpConfig:
    prior: PriorSpec
    iterations: int = 100
    lambdas: np.ndarray | None = None  # defaults to the views' SNRs
    denoiser: object = None  # defaults to the Bayes denoiser of ``prior``
    record_every: int = 0  # 0 keeps only the initial and final iterates
    early_stop_tol: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ParameterError(f"iterations must be at least 1, got {self.iterations}")
        if self.lambdas is not None:
            self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
            if np.any(self.lambdas < 0):
                raise ParameterError(f"lambdas must be non-negative, got {self.lambdas}")
        if self.record_every < 0:
            raise ParameterError("record_every must be non-negative")

    def resolved_denoiser(self):
        return self.denoiser if self.denoiser is not None else bayes_denoiser(self.prior, clamp=True)


@dataclass
class AmpTrajectory:
    """Iterates and diagnostics of one run.

    ``overlaps[t, l] = (1/n) sum_i X_il e_il(m^t)`` for t = 0..T (soft
    overlaps, NaN when no truth was supplied) and ``onsager[t]`` is d^t.
    """

    snapshots: dict
    onsager: np.ndarray
    overlaps: np.ndarray
    init_overlap: np.ndarray
    final_m: np.ndarray
    final_e: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray | None
    iterations: int
    stopped_early: bool = False
    lambdas: np.ndarray = field(default=None, repr=False)


def warm_init(pop: LatentPopulation, fraction, seed):
    """Each entry independently equals the true label with probability ``fraction``, else 0."""
    if not (0.0 <= fraction <= 1.0):
        raise ParameterError(f"fraction must lie in [0, 1], got {fraction}")
    rng = stream(seed, "warm")
    mask = rng.random(pop.X.shape) < fraction
    return np.where(mask, pop.X, 0).astype(np.float64)


def sign_with_ties(v):
    """sign(v) with sign(0) = +1."""
    return np.where(np.asarray(v) >= 0, 1, -1).astype(np.int8)


def _denoise(den, m, z):
    out = den(m, z)
    if not isinstance(out, DenoiserOutput):
        raise ParameterError("AMP needs a denoiser returning values and derivatives")
    return out.e, out.de


def run_amp(views, pop: LatentPopulation | None, cfg: AmpConfig, m0, z=None) -> AmpTrajectory:
    """Run ``cfg.iterations`` steps of coupled AMP from ``m0``.

    ``pop`` is read only for logging overlaps; side information is taken
    from ``z`` or, when omitted, from ``pop.Z`` (it is observed data).
    """
    n, L = views.n, views.L
    m = np.array(m0, dtype=np.float64)
    if m.shape != (n, L):
        raise ParameterError(f"m0 has shape {m.shape}, expected {(n, L)}")
    lambdas = np.asarray(views.lambdas if cfg.lambdas is None else cfg.lambdas, dtype=np.float64)
    if lambdas.shape != (L,):
        raise ParameterError(f"expected {L} SNR values, got {lambdas.shape}")
    if z is None and pop is not None:
        z = pop.side_info()
    truth = None if pop is None else pop.X.astype(np.float64)
    den = cfg.resolved_denoiser()
    active = [l for l in range(L) if lambdas[l] > 0 and views.observed(l)]
    scale = np.sqrt(lambdas / n)
    guard = 1e3 * (1.0 + L * float(lambdas.sum()))
    T = cfg.iterations

    overlaps = np.full((T + 1, L), np.nan)
    onsager = np.zeros((T, L))
    snapshots = {0: m.copy()}
    init_overlap = np.full(L, np.nan) if truth is None else (truth * m).mean(axis=0)
    e_prev = np.zeros((n, L))
    stopped = False
    t_done = T
    for t in range(T):
        e, de = _denoise(den, m, z)
        d = de.mean(axis=0)
        onsager[t] = d
        if truth is not None:
            overlaps[t] = (truth * e).mean(axis=0)
            if cfg.early_stop_tol is not None and t > 0 and \
                    np.max(np.abs(overlaps[t] - overlaps[t - 1])) < cfg.early_stop_tol:
                stopped = True
                t_done = t
                break
        m_new = np.zeros((n, L))
        for l in active:
            m_new[:, l] = scale[l] * views.matvec(l, e[:, l]) - lambdas[l] * d[l] * e_prev[:, l]
        if not np.all(np.isfinite(m_new)) or np.max(np.abs(m_new)) > guard:
            raise DivergedRunError(f"iterates diverged at step {t + 1}", t + 1, m.copy())
        e_prev = e
        m = m_new
        if cfg.record_every and (t + 1) % cfg.record_every == 0:
            snapshots[t + 1] = m.copy()
    if stopped:
        overlaps = overlaps[: t_done + 1]
        onsager = onsager[:t_done]
        e_final = e
    else:
        e_final, _ = _denoise(den, m, z)
        if truth is not None:
            overlaps[T] = (truth * e_final).mean(axis=0)
    snapshots[t_done] = m.copy()
    y_hat = None
    if cfg.prior.family is Family.MULTILAYER:
        y_hat = sign_with_ties(denoise_ml_global(m, cfg.prior.rho, clamp=True))
    return AmpTrajectory(
        snapshots=snapshots,
        onsager=onsager,
        overlaps=overlaps,
        init_overlap=init_overlap,
        final_m=m,
        final_e=e_final,
        x_hat=sign_with_ties(e_final),
        y_hat=y_hat,
        iterations=t_done,
        stopped_early=stopped,
        lambdas=lambdas,
    )


def run_amp_on_graph(g: MultiViewGraph, pop, cfg: AmpConfig, m0, z=None) -> AmpTrajectory:
    """Same recursion on the centred, rescaled adjacency matrices (never densified)."""
    return run_amp(rescale_graph(g), pop, cfg, m0, z)


@dataclass
class LabelEstimates:
    layers: np.ndarray  # (n, L) in {+1, -1}
    global_labels: np.ndarray | None  # multilayer only
    first_moment: np.ndarray | None  # dynamic only, layer-1 estimate


def estimate_labels(traj: AmpTrajectory, prior: PriorSpec, z=None) -> LabelEstimates:
    """Hard labels from the final iterate; every sign uses the sign(0) = +1 rule."""
    m = traj.final_m
    den = bayes_denoiser(prior, clamp=True)
    layers = sign_with_ties(den(m, z).e)
    glob = first = None
    if prior.family is Family.MULTILAYER:
        glob = sign_with_ties(denoise_ml_global(m, prior.rho, clamp=True))
    elif prior.family is Family.DYNAMIC:
        first = sign_with_ties(denoise_dyn(m, prior.rho).e[:, 0])
    return LabelEstimates(layers, glob, first)


def write_trajectory_csv(traj: AmpTrajectory, path):
    """Rows (t, layer, overlap, onsager); the onsager column is empty at the last step."""
    T = traj.overlaps.shape[0] - 1
    L = traj.overlaps.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "layer", "overlap", "onsager"])
        for t in range(T + 1):
            for l in range(L):
                ons = format(float(traj.onsager[t, l]), ".17g") if t < traj.onsager.shape[0] else ""
                w.writerow([t, l + 1, format(float(traj.overlaps[t, l]), ".17g"), ons])


def write_snapshots_raw(traj: AmpTrajectory, path):
    """Dump recorded iterates as little-endian float64 row-major (t-major), with a JSON sidecar."""
    steps = sorted(traj.snapshots)
    with open(path, "wb") as fh:
        for t in steps:
            fh.write(np.ascontiguousarray(traj.snapshots[t], dtype="<f8").tobytes())
    n, L = traj.final_m.shape
    meta = {"n": n, "L": L, "steps": steps, "lambdas": [float(x) for x in traj.lambdas]}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
