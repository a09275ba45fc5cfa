"""Experiment drivers: phase diagrams, SE-vs-AMP trajectories and MI curves.

Every cell/repetition derives its seed from ``(seed_base, cell, rep)`` so a
single row can be recomputed in isolation. CSV files start with two comment
lines, the schema tag and the full sweep spec as JSON, followed by the
header and data rows; wall-clock times go to a separate manifest so that
CSV bodies are byte-identical across runs.
"""

from __future__ import annotations

import csv
import itertools
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .amp import AmpConfig, run_amp, run_amp_on_graph, sign_with_ties, warm_init
from .denoisers import bayes_denoiser, denoise_dyn
from .errors import MvampError, ParameterError
from .metrics import accuracy
from .models import Family, PriorSpec, rates_from_snr, sample_graphs, sample_population, sample_spiked
from .rng import derive_seed
from .state_evolution import QuadratureSpec, _latent_states, se_general_step
from .theory import maximize_g, ml_criterion, threshold_dyn

SCHEMA_VERSION = 1


@dataclass
class SweepSpec:
    """A grid experiment.

    For the multilayer diagram ``axis1`` sets lambda of layer 1 and
    ``axis2`` the remaining layers; for the dynamic diagram ``axis1`` is rho
    and ``axis2`` the common lambda. ``degrees=None`` runs on spiked
    matrices, otherwise on sparse graphs with these average degrees.
    """

    model: PriorSpec
    axis1: list
    axis2: list
    n: int = 4000
    degrees: list | None = None
    repetitions: int = 5
    iterations: int = 100
    warm: float = 0.1
    seed_base: int = 0
    output: str | None = None
    workers: int | None = None

    def __post_init__(self):
        self.axis1 = [float(v) for v in self.axis1]
        self.axis2 = [float(v) for v in self.axis2]
        if not self.axis1 or not self.axis2:
            raise ParameterError("sweep grid must be non-empty")
        if self.repetitions < 1:
            raise ParameterError("repetitions must be at least 1")
        if self.degrees is not None:
            self.degrees = [float(d) for d in self.degrees]
            if len(self.degrees) != self.model.L:
                raise ParameterError(f"expected {self.model.L} degrees, got {len(self.degrees)}")

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "axis1": self.axis1,
            "axis2": self.axis2,
            "n": self.n,
            "degrees": self.degrees,
            "repetitions": self.repetitions,
            "iterations": self.iterations,
            "warm": self.warm,
            "seed_base": self.seed_base,
        }


def worker_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("MVAMP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map(fn, items, workers):
    items = list(items)
    workers = min(worker_count(workers), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, kind, spec_dict, header, rows):
    """Write a versioned CSV: '# schema' and '# spec' comment lines, header, rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema: mvamp-{kind}/{SCHEMA_VERSION}\n")
        fh.write("# spec: " + json.dumps(spec_dict, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Return (spec dict, header, rows as lists of strings)."""
    spec = None
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# spec: "):
            spec = json.loads(line[len("# spec: "):])
        elif not line.startswith("#"):
            body.append(line)
    rows = list(csv.reader(body))
    return spec, rows[0], rows[1:]


def write_manifest(path, spec_dict, seeds, wall_clock):
    import scipy

    manifest = {
        "spec": spec_dict,
        "seeds": seeds,
        "versions": {
            "mvamp": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "platform": platform.platform(),
        },
        "wall_clock_seconds": wall_clock,
    }
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def write_gnuplot_matrix(path, xs, ys, Z):
    """Nonuniform matrix layout: first row '<ny> y...', then 'x z(x, y...)' per row."""
    with open(path, "w") as fh:
        fh.write(" ".join([str(len(ys))] + [_fmt(y) for y in ys]) + "\n")
        for i, x in enumerate(xs):
            fh.write(" ".join([_fmt(x)] + [_fmt(z) for z in Z[i]]) + "\n")


def _outputs(output, kind):
    """Resolve (csv path, manifest path) from an output file or directory."""
    if output is None:
        return None, None
    p = Path(output)
    if p.suffix != ".csv":
        p.mkdir(parents=True, exist_ok=True)
        p = p / f"{kind}.csv"
    return p, p.with_suffix(".manifest.json")


# ---------------------------------------------------------------------------
# one AMP repetition

def simulate(prior: PriorSpec, lambdas, n, seed, iterations=100, warm=0.1, degrees=None):
    """Sample a population and its views, run AMP from a warm start, return the trajectory and population."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    pop = sample_population(prior, n, seed)
    cfg = AmpConfig(prior, iterations)
    m0 = warm_init(pop, warm, seed)
    if degrees is None:
        views = sample_spiked(pop, lambdas, seed)
        traj = run_amp(views, pop, cfg, m0)
    else:
        rates = [rates_from_snr(d, lam, n, layer=l + 1) for l, (d, lam) in enumerate(zip(degrees, lambdas))]
        g = sample_graphs(pop, rates, seed)
        traj = run_amp_on_graph(g, pop, cfg, m0)
    return traj, pop


def _score(prior, traj, pop):
    if prior.family is Family.MULTILAYER:
        return accuracy(traj.y_hat, pop.Y[:, 0])
    if prior.family is Family.DYNAMIC:
        first = sign_with_ties(denoise_dyn(traj.final_m, prior.rho).e[:, 0])
        return accuracy(first, pop.X[:, 0])
    return accuracy(traj.x_hat[:, 0], pop.X[:, 0])


def _cell_job(job):
    prior_dict, lambdas, n, degrees, iterations, warm, seeds = job
    prior = PriorSpec.from_dict(prior_dict)
    scores = []
    try:
        for seed in seeds:
            traj, pop = simulate(prior, lambdas, n, seed, iterations, warm, degrees)
            scores.append(_score(prior, traj, pop))
    except MvampError as exc:
        return scores, f"{type(exc).__name__}: {exc}"
    return scores, ""


def _cell_seeds(spec, cell):
    return [derive_seed(spec.seed_base, cell, rep) for rep in range(spec.repetitions)]


def _summ(scores):
    if not scores:
        return float("nan"), float("nan")
    a = np.asarray(scores)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


@dataclass
class SweepResult:
    header: list
    rows: list
    csv_path: Path | None = None
    manifest_path: Path | None = None
    extra: dict = field(default_factory=dict)


def _grid_lambdas_ml(spec, a1, a2):
    lam = np.full(spec.model.L, a2)
    lam[0] = a1
    return lam


def run_phase_diagram_ml(spec: SweepSpec) -> SweepResult:
    """Mean global-label accuracy over a (lambda_1, lambda_rest) grid."""
    if spec.model.family is not Family.MULTILAYER:
        raise ParameterError("the multilayer phase diagram needs a multilayer prior")
    cells = list(itertools.product(spec.axis1, spec.axis2))
    prior_dict = spec.model.to_dict()
    jobs = []
    for k, (a1, a2) in enumerate(cells):
        lam = _grid_lambdas_ml(spec, a1, a2)
        jobs.append((prior_dict, lam.tolist(), spec.n, spec.degrees, spec.iterations, spec.warm,
                     _cell_seeds(spec, k)))
    t0 = time.perf_counter()
    results = _map(_cell_job, jobs, spec.workers)
    wall = time.perf_counter() - t0
    rows = []
    for (a1, a2), (scores, err) in zip(cells, results):
        lam = _grid_lambdas_ml(spec, a1, a2)
        try:
            crit = ml_criterion(lam, spec.model.rho)
        except MvampError:
            crit = None  # outside the regime where the criterion is defined
        mean, std = _summ(scores)
        rows.append([a1, a2, mean, std, len(scores), crit, err])
    header = ["lambda1", "lambda2", "mean_accuracy", "std_accuracy", "reps", "criterion", "error"]
    return _finish(spec, "phase-ml", header, rows, wall, jobs)


def run_phase_diagram_dyn(spec: SweepSpec) -> SweepResult:
    """Mean first-layer accuracy over a (rho, lambda) grid with equal SNR across layers."""
    if spec.model.family is not Family.DYNAMIC:
        raise ParameterError("the dynamic phase diagram needs a dynamic prior")
    L = spec.model.L
    cells = list(itertools.product(spec.axis1, spec.axis2))
    jobs = []
    for k, (rho, lam) in enumerate(cells):
        prior_dict = PriorSpec.dynamic(L, rho).to_dict()
        jobs.append((prior_dict, [lam] * L, spec.n, spec.degrees, spec.iterations, spec.warm,
                     _cell_seeds(spec, k)))
    t0 = time.perf_counter()
    results = _map(_cell_job, jobs, spec.workers)
    wall = time.perf_counter() - t0
    rows = []
    for (rho, lam), (scores, err) in zip(cells, results):
        try:
            lam_c = threshold_dyn(L, rho).critical_lambda
        except MvampError:
            lam_c = None
        mean, std = _summ(scores)
        rows.append([rho, lam, mean, std, len(scores), lam_c, err])
    header = ["rho", "lambda", "mean_accuracy", "std_accuracy", "reps", "lambda_c", "error"]
    return _finish(spec, "phase-dyn", header, rows, wall, jobs)


def _finish(spec, kind, header, rows, wall, jobs):
    csv_path, manifest_path = _outputs(spec.output, kind)
    result = SweepResult(header, rows)
    if csv_path is not None:
        spec_dict = spec.to_dict()
        result.csv_path = write_csv(csv_path, kind, spec_dict, header, rows)
        seeds = [job[-1] for job in jobs]
        result.manifest_path = write_manifest(manifest_path, spec_dict, seeds, wall)
        xs, ys = spec.axis1, spec.axis2
        Z = np.array([r[2] for r in rows], dtype=float).reshape(len(xs), len(ys))
        write_gnuplot_matrix(csv_path.with_suffix(".matrix.dat"), xs, ys, Z)
    return result


# ---------------------------------------------------------------------------
# SE versus AMP

def warm_moments(prior: PriorSpec, fraction, denoiser=None):
    """Exact (mu, kappa) = (E[X E(m0, Z)], E[E(m0, Z)^2]) under the warm-start law.

    m0_l equals X_l with probability ``fraction`` independently, else 0;
    the expectation enumerates latent states and reveal masks.
    """
    den = denoiser or bayes_denoiser(prior, clamp=True)
    xs, _, zs, ps = _latent_states(prior)
    L = prior.L
    masks = np.array(list(itertools.product([0.0, 1.0], repeat=L)))
    pm = np.prod(np.where(masks > 0, fraction, 1.0 - fraction), axis=1)
    x = np.repeat(xs, masks.shape[0], axis=0)
    mk = np.tile(masks, (xs.shape[0], 1))
    w = np.repeat(ps, masks.shape[0]) * np.tile(pm, xs.shape[0])
    z = None if zs is None else np.repeat(zs, masks.shape[0])
    e = den(mk * x, z).e
    return w @ (x * e), w @ (e * e)


def se_trajectory(prior: PriorSpec, lambdas, T, fraction, quad: QuadratureSpec = QuadratureSpec()):
    """Predicted q^t for t = 0..T+1: q^0 = fraction, q^t = mu^t afterwards."""
    den = bayes_denoiser(prior, clamp=True)
    mu, kappa = warm_moments(prior, fraction, den)
    out = [np.full(prior.L, float(fraction)), mu]
    for _ in range(T):
        step = se_general_step(prior, den, mu, kappa, lambdas, quad)
        mu, kappa = step.mu, step.kappa
        out.append(mu)
    return np.array(out)


def _se_amp_job(job):
    prior_dict, lambdas, n, degrees, T, warm, seed = job
    prior = PriorSpec.from_dict(prior_dict)
    traj, pop = simulate(prior, lambdas, n, seed, T, warm, degrees)
    return np.vstack([traj.init_overlap[None, :], traj.overlaps])


def run_se_vs_amp(model: PriorSpec, lambdas, n=4000, reps=5, T=50, warm=0.1, seed_base=0,
                  degrees=None, output=None, workers=None, quad: QuadratureSpec = QuadratureSpec()):
    """Rows (t, layer, empirical mean overlap, its standard error, SE q^t).

    Row t = 0 is the warm start itself ((1/n) sum X m0 against the reveal
    fraction); row t >= 1 is the soft overlap (1/n) sum X E(m^{t-1})
    against mu^t from the (mu, kappa) recursion.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    jobs = [(model.to_dict(), lambdas.tolist(), n, degrees, T, warm, derive_seed(seed_base, 0, r))
            for r in range(reps)]
    t0 = time.perf_counter()
    runs = np.array(_map(_se_amp_job, jobs, workers))  # (reps, T+2, L)
    wall = time.perf_counter() - t0
    pred = se_trajectory(model, lambdas, T, warm, quad)
    mean = runs.mean(axis=0)
    se = runs.std(axis=0, ddof=1) / np.sqrt(reps) if reps > 1 else np.zeros_like(mean)
    rows = []
    for t in range(T + 2):
        for l in range(model.L):
            rows.append([t, l + 1, mean[t, l], se[t, l], pred[t, l]])
    header = ["t", "layer", "empirical_overlap", "empirical_stderr", "se_q"]
    spec_dict = {"model": model.to_dict(), "lambdas": lambdas.tolist(), "n": n, "reps": reps, "T": T,
                 "warm": warm, "seed_base": seed_base, "degrees": degrees, "quadrature": quad.to_dict()}
    result = SweepResult(header, rows, extra={"runs": runs, "prediction": pred})
    csv_path, manifest_path = _outputs(output, "se-vs-amp")
    if csv_path is not None:
        result.csv_path = write_csv(csv_path, "se-vs-amp", spec_dict, header, rows)
        result.manifest_path = write_manifest(manifest_path, spec_dict, [j[-1] for j in jobs], wall)
    return result


# ---------------------------------------------------------------------------
# MI curve

def run_mi_curve_semi(eps_plus, eps_minus, lambdas, quad: QuadratureSpec = QuadratureSpec(),
                      tol=1e-6, output=None) -> SweepResult:
    """Rows (lambda, mi_limit, q_star, mmse, dmse, near_degenerate)."""
    prior = PriorSpec.semi(eps_plus, eps_minus)
    rows = []
    t0 = time.perf_counter()
    for lam in lambdas:
        r = maximize_g(prior, [float(lam)], quad, tol=tol)
        rows.append([float(lam), r.mi_limit, float(r.q_star[0]), float(r.mmse_layers[0]),
                     float(r.dmse[0]), bool(r.near_degenerate)])
    wall = time.perf_counter() - t0
    header = ["lambda", "mi_limit", "q_star", "mmse", "dmse", "near_degenerate"]
    spec_dict = {"model": prior.to_dict(), "lambdas": [float(x) for x in lambdas],
                 "quadrature": quad.to_dict(), "tol": tol}
    result = SweepResult(header, rows)
    csv_path, manifest_path = _outputs(output, "mi-semi")
    if csv_path is not None:
        result.csv_path = write_csv(csv_path, "mi-semi", spec_dict, header, rows)
        result.manifest_path = write_manifest(manifest_path, spec_dict, [], wall)
    return result
