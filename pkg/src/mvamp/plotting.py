"""PNG figures written next to the CSV outputs (headless matplotlib)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def heatmap(path, xs, ys, Z, xlabel, ylabel, title=None, contour=None, contour_label=None,
            curve=None, curve_label=None):
    """Colour map of Z[i, j] over (xs[i], ys[j]), optional level-1 contour and overlay curve."""
    xs, ys, Z = np.asarray(xs, float), np.asarray(ys, float), np.asarray(Z, float)
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    if xs.size > 1 and ys.size > 1:
        mesh = ax.pcolormesh(xs, ys, Z.T, shading="nearest", cmap="viridis", vmin=0.5, vmax=1.0)
        fig.colorbar(mesh, ax=ax, label="accuracy")
        if contour is not None and np.any(np.isfinite(contour)):
            C = np.ma.masked_invalid(np.asarray(contour, float).T)
            ax.contour(xs, ys, C, levels=[1.0], colors="red", linewidths=1.5)
            if contour_label:
                ax.plot([], [], color="red", lw=1.5, label=contour_label)
                ax.legend(loc="upper right", fontsize=8)
    else:
        ax.scatter(np.repeat(xs, ys.size), np.tile(ys, xs.size), c=Z.ravel(), cmap="viridis",
                   vmin=0.5, vmax=1.0)
    if curve is not None:
        cx, cy = curve
        ax.plot(cx, cy, color="red", lw=1.5, label=curve_label)
        ax.set_ylim(ys.min(), ys.max())
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if curve_label:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def lines(path, series, xlabel, ylabel, title=None):
    """``series`` maps a label to (x, y) or (x, y, style)."""
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    for label, data in series.items():
        style = data[2] if len(data) > 2 else "-"
        ax.plot(data[0], data[1], style, label=label, lw=1.4, ms=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_phase_ml(result, path):
    rows = result.rows
    xs = sorted({r[0] for r in rows})
    ys = sorted({r[1] for r in rows})
    Z = np.array([r[2] for r in rows], float).reshape(len(xs), len(ys))
    crit = np.array([np.nan if r[5] is None else r[5] for r in rows], float).reshape(len(xs), len(ys))
    return heatmap(path, xs, ys, Z, r"$\lambda^{(1)}$", r"$\lambda^{(2)}$", "global-label accuracy",
                   contour=crit, contour_label="criterion = 1")


def plot_phase_dyn(result, path):
    rows = result.rows
    xs = sorted({r[0] for r in rows})
    ys = sorted({r[1] for r in rows})
    Z = np.array([r[2] for r in rows], float).reshape(len(xs), len(ys))
    lam_c = {}
    for r in rows:
        if r[5] is not None:
            lam_c[r[0]] = r[5]
    cx = [x for x in xs if x in lam_c]
    curve = (cx, [lam_c[x] for x in cx]) if cx else None
    return heatmap(path, xs, ys, Z, r"$\rho$", r"$\lambda$", "first-layer accuracy",
                   curve=curve, curve_label=r"$\lambda_c$")


def plot_se_vs_amp(result, path):
    rows = result.rows
    layers = sorted({r[1] for r in rows})
    series = {}
    for l in layers:
        sel = [r for r in rows if r[1] == l]
        t = [r[0] for r in sel]
        series[f"AMP layer {l}"] = (t, [r[2] for r in sel], "o")
        series[f"SE layer {l}"] = (t, [r[4] for r in sel], "-")
    return lines(path, series, "t", "overlap", "state evolution vs AMP")


def plot_mi_curve(result, path):
    rows = result.rows
    lam = [r[0] for r in rows]
    series = {"mutual information": (lam, [r[1] for r in rows]), "overlap q*": (lam, [r[2] for r in rows])}
    return lines(path, series, r"$\lambda$", "value", "limiting quantities")


def plot_scan(scan, path):
    series = {f"layer {l + 1}": (scan.t, scan.values[:, l]) for l in range(scan.values.shape[1])}
    return lines(path, series, "t", r"$T_l(t\gamma)$", "state evolution map along a ray")


def plot_trajectory(traj, path):
    T = traj.overlaps.shape[0]
    series = {f"layer {l + 1}": (np.arange(T), traj.overlaps[:, l]) for l in range(traj.overlaps.shape[1])}
    return lines(path, series, "t", "overlap", "AMP trajectory")
