"""Command-line interface.

    mvamp <command> [options]

Commands: ``generate``, ``amp``, ``se``, ``theory {threshold-ml, threshold-dyn,
hessian, mi, mi-curve}`` and ``sweep {phase-ml, phase-dyn, se-vs-amp,
mi-semi}``. Every option mirrors a key of the resolved run configuration
(JSON); values are taken from built-in defaults, then ``--config FILE``,
then explicit flags. ``--dry-run`` prints the resolved configuration.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 invalid or
infeasible parameters.
"""

from __future__ import annotations

import argparse
import copy
import difflib
import json
import sys
from pathlib import Path

import numpy as np

from .errors import MvampError, NumericalError, ParameterError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_PARAMETER = 0, 2, 3, 4

BASE_DEFAULTS = {
    "model": {"family": "multilayer", "num_layers": 2, "rho": 0.1, "eps_plus": 0.0, "eps_minus": 0.0},
    "channel": {"lambdas": [1.5, 1.5], "degrees": None, "n": 4000},
    "algo": {
        "iterations": 100,
        "warm": 0.1,
        "tol": 1e-6,
        "max_iter": 10000,
        "quad": {"method": "auto", "nodes": 61, "samples": 200000, "seed": 0},
    },
    "io": {"output": None, "raw": False, "plot": True},
    "seed": 0,
}


def _linspace(lo, hi, k):
    return [float(v) for v in np.linspace(lo, hi, k)]


COMMAND_DEFAULTS = {
    "generate": {},
    "amp": {},
    "se": {"algo": {"q0": None, "scan": False, "direction": None, "t_max": 2.0, "grid_points": 40}},
    "theory threshold-ml": {"channel": {"lambdas": [0.6, 0.6]}, "algo": {"rho_values": None}},
    "theory threshold-dyn": {"model": {"family": "dynamic", "num_layers": 4, "rho": 0.1},
                             "channel": {"lambdas": None}, "algo": {"rho_values": None}},
    "theory hessian": {},
    "theory mi": {},
    "theory mi-curve": {"model": {"family": "semi", "num_layers": 1, "eps_plus": 0.0, "eps_minus": 0.0},
                        "channel": {"lambdas": _linspace(0.0, 3.0, 31)}},
    "sweep phase-ml": {"algo": {"axis1": _linspace(0.1, 2.0, 20), "axis2": _linspace(0.1, 2.0, 20),
                                "reps": 5, "workers": None}},
    "sweep phase-dyn": {"model": {"family": "dynamic", "num_layers": 4, "rho": 0.1},
                        "algo": {"axis1": _linspace(0.0, 0.5, 20), "axis2": _linspace(0.1, 2.0, 20),
                                 "reps": 5, "workers": None}},
    "sweep se-vs-amp": {"algo": {"iterations": 50, "reps": 5, "workers": None}},
    "sweep mi-semi": {"model": {"family": "semi", "num_layers": 1, "eps_plus": 0.0, "eps_minus": 0.0},
                      "channel": {"lambdas": _linspace(0.0, 3.0, 31)}},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def defaults_for(command):
    return _merge(BASE_DEFAULTS, COMMAND_DEFAULTS[command])


# ---------------------------------------------------------------------------
# argument parsing

def _grid_token(text):
    """A number, or 'lo:hi:count' for an evenly spaced grid."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid spec must be lo:hi:count, got {text!r}")
        lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
        if k < 1:
            raise argparse.ArgumentTypeError("grid count must be positive")
        return _linspace(lo, hi, k)
    try:
        return [float(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or lo:hi:count grid: {text!r}") from None


def _flatten(tokens):
    return [v for tok in tokens for v in tok]


# (flag, config path, argparse kwargs)
MODEL_FLAGS = [
    ("--model", "model.family", dict(choices=["multilayer", "dynamic", "semi"])),
    ("--L", "model.num_layers", dict(type=int)),
    ("--rho", "model.rho", dict(type=float)),
    ("--eps-plus", "model.eps_plus", dict(type=float)),
    ("--eps-minus", "model.eps_minus", dict(type=float)),
]
CHANNEL_FLAGS = [
    ("--lambda", "channel.lambdas", dict(type=_grid_token, nargs="+")),
    ("--degree", "channel.degrees", dict(type=float, nargs="+")),
    ("--n", "channel.n", dict(type=int)),
]
AMP_FLAGS = [
    ("--iterations", "algo.iterations", dict(type=int)),
    ("--warm", "algo.warm", dict(type=float)),
]
SE_FLAGS = [
    ("--tol", "algo.tol", dict(type=float)),
    ("--max-iter", "algo.max_iter", dict(type=int)),
    ("--quad-method", "algo.quad.method", dict(choices=["auto", "montecarlo", "gauss-hermite"])),
    ("--quad-nodes", "algo.quad.nodes", dict(type=int)),
    ("--quad-samples", "algo.quad.samples", dict(type=int)),
    ("--quad-seed", "algo.quad.seed", dict(type=int)),
]
SWEEP_FLAGS = [
    ("--axis1", "algo.axis1", dict(type=_grid_token, nargs="+")),
    ("--axis2", "algo.axis2", dict(type=_grid_token, nargs="+")),
    ("--reps", "algo.reps", dict(type=int)),
    ("--workers", "algo.workers", dict(type=int)),
]
IO_FLAGS = [
    ("--output", "io.output", dict()),
    ("--seed", "seed", dict(type=int)),
]
SCAN_FLAGS = [
    ("--q0", "algo.q0", dict(type=float, nargs="+")),
    ("--scan", "algo.scan", dict(action="store_const", const=True)),
    ("--direction", "algo.direction", dict(type=float, nargs="+")),
    ("--t-max", "algo.t_max", dict(type=float)),
    ("--grid-points", "algo.grid_points", dict(type=int)),
]
THRESHOLD_FLAGS = [("--rho-values", "algo.rho_values", dict(type=_grid_token, nargs="+"))]
GRID_PATHS = {"channel.lambdas", "algo.axis1", "algo.axis2", "algo.rho_values"}

COMMAND_FLAGS = {
    "generate": MODEL_FLAGS + CHANNEL_FLAGS + IO_FLAGS + [("--raw", "io.raw", dict(action="store_const", const=True))],
    "amp": MODEL_FLAGS + CHANNEL_FLAGS + AMP_FLAGS + IO_FLAGS,
    "se": MODEL_FLAGS + CHANNEL_FLAGS + SE_FLAGS + SCAN_FLAGS + IO_FLAGS,
    "theory threshold-ml": MODEL_FLAGS + CHANNEL_FLAGS + THRESHOLD_FLAGS + IO_FLAGS,
    "theory threshold-dyn": MODEL_FLAGS + CHANNEL_FLAGS + THRESHOLD_FLAGS + IO_FLAGS,
    "theory hessian": MODEL_FLAGS + CHANNEL_FLAGS + IO_FLAGS,
    "theory mi": MODEL_FLAGS + CHANNEL_FLAGS + SE_FLAGS + IO_FLAGS,
    "theory mi-curve": MODEL_FLAGS + CHANNEL_FLAGS + SE_FLAGS + IO_FLAGS,
    "sweep phase-ml": MODEL_FLAGS + CHANNEL_FLAGS + AMP_FLAGS + SWEEP_FLAGS + IO_FLAGS,
    "sweep phase-dyn": MODEL_FLAGS + CHANNEL_FLAGS + AMP_FLAGS + SWEEP_FLAGS + IO_FLAGS,
    "sweep se-vs-amp": MODEL_FLAGS + CHANNEL_FLAGS + AMP_FLAGS + SE_FLAGS + SWEEP_FLAGS + IO_FLAGS,
    "sweep mi-semi": MODEL_FLAGS + CHANNEL_FLAGS + SE_FLAGS + IO_FLAGS,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _dest(path):
    return "cfg__" + path.replace(".", "__")


def _add_common(p, command):
    p.add_argument("--config", help="JSON run configuration; explicit flags override it")
    p.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--eps", type=float, default=None, help="semi prior: mean revelation rate")
    p.add_argument("--delta", type=float, default=None, help="semi prior: revelation imbalance")
    p.add_argument("--no-plot", dest="cfg__io__plot", action="store_const", const=False, default=None,
                   help="skip PNG figures")
    for flag, path, kw in COMMAND_FLAGS[command]:
        p.add_argument(flag, dest=_dest(path), default=None, **kw)
    p.set_defaults(_command=command, _parser=p)


def build_parser():
    parser = _Parser(prog="mvamp", description="Coupled AMP for multi-view stochastic block models.")
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name in ("generate", "amp", "se"):
        _add_common(sub.add_parser(name, help=f"{name} command"), name)
    for group, names in (("theory", ["threshold-ml", "threshold-dyn", "hessian", "mi", "mi-curve"]),
                         ("sweep", ["phase-ml", "phase-dyn", "se-vs-amp", "mi-semi"])):
        g = sub.add_parser(group, help=f"{group} commands")
        gs = g.add_subparsers(dest="sub", required=True, parser_class=_Parser)
        for name in names:
            _add_common(gs.add_parser(name, help=f"{group} {name}"), f"{group} {name}")
    return parser


def _set_path(cfg, path, value):
    keys = path.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def _option_strings(parser):
    out = []
    for action in parser._actions:
        out.extend(s for s in action.option_strings if s.startswith("--"))
    return out


def parse_args(argv):
    """Parse argv into (command, resolved config dict, dry_run flag)."""
    parser = build_parser()
    ns, extras = parser.parse_known_args(argv)
    if extras:
        known = _option_strings(ns._parser)
        notes = []
        for tok in extras:
            flag = tok.split("=")[0]
            close = difflib.get_close_matches(flag, known, n=1) if flag.startswith("-") else []
            notes.append(f"{tok} (did you mean {close[0]}?)" if close else tok)
        raise UsageError(f"{ns._parser.prog}: error: unrecognized arguments: {', '.join(notes)}")
    command = ns._command
    cfg = defaults_for(command)
    explicit_layers = False
    if ns.config:
        try:
            loaded = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        loaded.pop("subcommand", None)
        cfg = _merge(cfg, loaded)
        explicit_layers = "num_layers" in loaded.get("model", {})
    for key, value in vars(ns).items():
        if not key.startswith("cfg__") or value is None:
            continue
        path = key[len("cfg__"):].replace("__", ".")
        if path in GRID_PATHS:
            value = _flatten(value)
        if path == "model.num_layers":
            explicit_layers = True
        _set_path(cfg, path, value)
    if ns.eps is not None or ns.delta is not None:
        from .models import PriorSpec

        eps = 0.0 if ns.eps is None else ns.eps
        delta = 0.0 if ns.delta is None else ns.delta
        p = PriorSpec.semi_from_eps_delta(eps, delta)
        cfg["model"].update(family="semi", eps_plus=p.eps_plus, eps_minus=p.eps_minus)
    resolve(cfg, explicit_layers)
    cfg = {"subcommand": command, **cfg}
    return command, cfg, ns.dry_run


def resolve(cfg, explicit_layers=False):
    """Normalise a configuration in place; idempotent."""
    model = cfg["model"]
    if model["family"] == "semi" and not explicit_layers:
        model["num_layers"] = 1
    L = int(model["num_layers"])
    ch = cfg["channel"]
    for key in ("lambdas", "degrees"):
        v = ch.get(key)
        if v is not None:
            v = [float(x) for x in v]
            if len(v) == 1 and L > 1:
                v = v * L
            ch[key] = v
    return cfg


# ---------------------------------------------------------------------------
# command implementations

def _emit(obj):
    print(json.dumps(_jsonable(obj), sort_keys=True))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def _prior(cfg):
    from .models import PriorSpec

    return PriorSpec.from_dict(cfg["model"])


def _quad(cfg):
    from .state_evolution import QuadratureSpec

    return QuadratureSpec(**cfg["algo"]["quad"])


def _lambdas(cfg, L):
    lam = cfg["channel"]["lambdas"]
    if lam is None:
        raise ParameterError("this command needs --lambda")
    if len(lam) != L:
        raise ParameterError(f"expected {L} SNR values, got {len(lam)}")
    return np.asarray(lam, dtype=np.float64)


def _outdir(cfg, required=False):
    out = cfg["io"]["output"]
    if out is None:
        if required:
            raise UsageError("this command needs --output")
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_generate(cfg):
    from .models import (
        rates_from_snr,
        sample_graphs,
        sample_population,
        sample_spiked,
        write_edges_csv,
        write_labels_csv,
        write_population_csv,
        write_spiked_raw,
    )

    prior = _prior(cfg)
    lam = _lambdas(cfg, prior.L)
    n, seed = cfg["channel"]["n"], cfg["seed"]
    out = _outdir(cfg, required=True)
    pop = sample_population(prior, n, seed)
    write_population_csv(pop, out / "population.csv")
    write_labels_csv(pop, out / "labels.csv")
    summary = {"n": n, "L": prior.L, "population": str(out / "population.csv")}
    degrees = cfg["channel"]["degrees"]
    if degrees is not None:
        rates = [rates_from_snr(d, l, n, layer=k + 1) for k, (d, l) in enumerate(zip(degrees, lam))]
        g = sample_graphs(pop, rates, seed)
        write_edges_csv(g, out / "edges.csv")
        summary.update(edges=str(out / "edges.csv"), edge_counts=[int(e.shape[0]) for e in g.edges],
                       a=[r.a for r in rates], b=[r.b for r in rates])
    if cfg["io"]["raw"] or degrees is None:
        views = sample_spiked(pop, lam, seed)
        if cfg["io"]["raw"]:
            write_spiked_raw(views, out / "spiked.f64", seed=seed)
            summary["spiked"] = str(out / "spiked.f64")
    _emit(summary)


def cmd_amp(cfg):
    from .amp import write_trajectory_csv
    from .harness import simulate
    from .metrics import accuracy

    prior = _prior(cfg)
    lam = _lambdas(cfg, prior.L)
    a = cfg["algo"]
    traj, pop = simulate(prior, lam, cfg["channel"]["n"], cfg["seed"], a["iterations"], a["warm"],
                         cfg["channel"]["degrees"])
    result = {
        "iterations": traj.iterations,
        "overlaps": traj.overlaps[-1],
        "accuracy": [accuracy(traj.x_hat[:, l], pop.X[:, l]) for l in range(prior.L)],
    }
    if traj.y_hat is not None:
        result["global_accuracy"] = accuracy(traj.y_hat, pop.Y[:, 0])
    out = _outdir(cfg)
    if out is not None:
        write_trajectory_csv(traj, out / "trajectory.csv")
        result["csv"] = str(out / "trajectory.csv")
        if cfg["io"]["plot"]:
            from .plotting import plot_trajectory

            plot_trajectory(traj, out / "trajectory.png")
    _emit(result)


def cmd_se(cfg):
    from .state_evolution import ray_concavity_scan, se_fixed_point, write_fixed_point_csv, write_scan_csv
    from .theory import maximize_g

    prior = _prior(cfg)
    a = cfg["algo"]
    quad = _quad(cfg)
    out = _outdir(cfg)
    if a.get("scan"):
        direction = a.get("direction") or [1.0] * prior.L
        t = np.linspace(0.0, a["t_max"], a["grid_points"])
        scan = ray_concavity_scan(prior, direction, t, quad)
        result = {"direction": direction, "concave": scan.concave, "flagged": scan.flagged,
                  "max_second_difference": float(np.max(scan.second_diff))}
        if out is not None:
            write_scan_csv(scan, out / "scan.csv")
            result["csv"] = str(out / "scan.csv")
            if cfg["io"]["plot"]:
                from .plotting import plot_scan

                plot_scan(scan, out / "scan.png")
        _emit(result)
        return
    lam = _lambdas(cfg, prior.L)
    if a.get("q0") is not None:
        q0 = np.broadcast_to(np.asarray(a["q0"], float), (prior.L,))
        fp = se_fixed_point(prior, lam, q0, tol=a["tol"], max_iter=a["max_iter"], quad=quad,
                            keep_history=out is not None)
        result = {"q_star": fp.q, "iterations": fp.iterations, "converged": fp.converged,
                  "residual": fp.residual, "reached_zero": fp.reached_zero}
        if out is not None:
            write_fixed_point_csv(fp, out / "fixed_point.csv")
            result["csv"] = str(out / "fixed_point.csv")
        _emit(result)
        return
    r = maximize_g(prior, lam, quad, tol=a["tol"], max_iter=a["max_iter"])
    _emit(_free_energy_summary(r))


def _free_energy_summary(r):
    return {
        "q_star": r.q_star,
        "mi_limit": r.mi_limit,
        "G_star": r.G_star,
        "mmse": r.mmse_layers,
        "mmse_implicit": r.mmse_implicit,
        "dmse": r.dmse,
        "i_p": r.i_p,
        "converged": r.converged,
        "near_degenerate": r.near_degenerate,
    }


def _threshold_rows(cfg, kind):
    from .theory import threshold_dyn, threshold_ml

    prior = cfg["model"]
    L = int(prior["num_layers"])
    rhos = cfg["algo"].get("rho_values") or [prior["rho"]]
    lam = cfg["channel"]["lambdas"]
    rows = []
    for rho in rhos:
        if kind == "ml":
            rep = threshold_ml(_lambdas(cfg, L), rho)
            lam_col = " ".join(format(v, ".17g") for v in lam)
        else:
            probe = None
            if lam is not None:
                probe = lam[0]
                if any(v != probe for v in lam):
                    raise ParameterError("the dynamic threshold takes a common lambda")
            rep = threshold_dyn(L, rho, probe)
            lam_col = "" if probe is None else format(probe, ".17g")
        rows.append((L, rho, lam_col, rep))
    return rows


def cmd_threshold(cfg, kind):
    from .harness import write_csv

    rows = _threshold_rows(cfg, kind)
    out = _outdir(cfg)
    table = []
    for L, rho, lam_col, rep in rows:
        d = rep.to_dict()
        _emit({"L": L, "rho": rho, **d})
        table.append([L, rho, lam_col, rep.criterion_value, rep.critical_lambda, rep.theta_star,
                      rep.hessian_max_eig, rep.feasible])
    if out is not None:
        header = ["L", "rho", "lambda", "criterion", "lambda_c", "theta_star", "max_eig", "feasible"]
        spec = {k: v for k, v in cfg.items() if k != "io"}
        write_csv(out / f"threshold-{kind}.csv", f"threshold-{kind}", spec, header, table)


def cmd_hessian(cfg):
    from .theory import hessian_at_zero, hessian_zero_feasibility

    prior = _prior(cfg)
    lam = _lambdas(cfg, prior.L)
    rep = hessian_zero_feasibility(prior, lam)
    _emit({"hessian": hessian_at_zero(prior, lam), **rep.to_dict()})


def cmd_mi(cfg):
    from .theory import maximize_g

    prior = _prior(cfg)
    lam = _lambdas(cfg, prior.L)
    a = cfg["algo"]
    _emit(_free_energy_summary(maximize_g(prior, lam, _quad(cfg), tol=a["tol"], max_iter=a["max_iter"])))


def cmd_mi_curve(cfg):
    from .harness import run_mi_curve_semi

    prior = _prior(cfg)
    if prior.family.value != "semi":
        raise ParameterError("the MI curve is defined for the semi prior")
    out = _outdir(cfg)
    a = cfg["algo"]
    res = run_mi_curve_semi(prior.eps_plus, prior.eps_minus, cfg["channel"]["lambdas"], _quad(cfg),
                            tol=a["tol"], output=None if out is None else out / "mi-semi.csv")
    for row in res.rows:
        _emit(dict(zip(res.header, row)))
    if out is not None and cfg["io"]["plot"]:
        from .plotting import plot_mi_curve

        plot_mi_curve(res, out / "mi-semi.png")


def _sweep_spec(cfg):
    from .harness import SweepSpec

    a = cfg["algo"]
    return SweepSpec(
        model=_prior(cfg),
        axis1=a["axis1"],
        axis2=a["axis2"],
        n=cfg["channel"]["n"],
        degrees=cfg["channel"]["degrees"],
        repetitions=a["reps"],
        iterations=a["iterations"],
        warm=a["warm"],
        seed_base=cfg["seed"],
        output=cfg["io"]["output"],
        workers=a["workers"],
    )


def cmd_phase(cfg, kind):
    from . import harness, plotting

    spec = _sweep_spec(cfg)
    if kind == "ml":
        res = harness.run_phase_diagram_ml(spec)
    else:
        res = harness.run_phase_diagram_dyn(spec)
    if res.csv_path is not None and cfg["io"]["plot"]:
        png = res.csv_path.with_suffix(".png")
        (plotting.plot_phase_ml if kind == "ml" else plotting.plot_phase_dyn)(res, png)
    _emit({"cells": len(res.rows), "csv": None if res.csv_path is None else str(res.csv_path),
           "errors": sum(1 for r in res.rows if r[-1])})


def cmd_se_vs_amp(cfg):
    from . import harness, plotting

    prior = _prior(cfg)
    lam = _lambdas(cfg, prior.L)
    a = cfg["algo"]
    res = harness.run_se_vs_amp(prior, lam, n=cfg["channel"]["n"], reps=a["reps"], T=a["iterations"],
                                warm=a["warm"], seed_base=cfg["seed"], degrees=cfg["channel"]["degrees"],
                                output=cfg["io"]["output"], workers=a["workers"], quad=_quad(cfg))
    if res.csv_path is not None and cfg["io"]["plot"]:
        plotting.plot_se_vs_amp(res, res.csv_path.with_suffix(".png"))
    gaps = [abs(r[2] - r[4]) for r in res.rows]
    _emit({"rows": len(res.rows), "max_abs_gap": max(gaps),
           "csv": None if res.csv_path is None else str(res.csv_path)})


DISPATCH = {
    "generate": cmd_generate,
    "amp": cmd_amp,
    "se": cmd_se,
    "theory threshold-ml": lambda c: cmd_threshold(c, "ml"),
    "theory threshold-dyn": lambda c: cmd_threshold(c, "dyn"),
    "theory hessian": cmd_hessian,
    "theory mi": cmd_mi,
    "theory mi-curve": cmd_mi_curve,
    "sweep phase-ml": lambda c: cmd_phase(c, "ml"),
    "sweep phase-dyn": lambda c: cmd_phase(c, "dyn"),
    "sweep se-vs-amp": cmd_se_vs_amp,
    "sweep mi-semi": cmd_mi_curve,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        command, cfg, dry_run = parse_args(argv)
    except SystemExit as exc:  # --help and argparse's own exits
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"mvamp: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    if dry_run:
        print(json.dumps(cfg, indent=2, sort_keys=True))
        return EXIT_OK
    try:
        DISPATCH[command](cfg)
    except UsageError as exc:
        print(f"mvamp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"mvamp: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except NumericalError as exc:
        print(f"mvamp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MvampError as exc:
        print(f"mvamp: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TypeError, KeyError) as exc:
        print(f"mvamp: malformed configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
