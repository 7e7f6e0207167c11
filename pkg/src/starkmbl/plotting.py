"""Static figures written next to the delimited results.

Uses the object-oriented matplotlib API with the Agg canvas only, so nothing
here touches pyplot state or needs a display.
"""

import numpy as np
from matplotlib import rcParams
from matplotlib.figure import Figure

from .spectra import R_MEAN_GOE, R_MEAN_POISSON

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 3.4
markers = ["o", "+", "x", "s", "^", "v", "D"]
colors = ["#d62728", "#1f77b4", "#bcbd22", "#2ca02c", "#9467bd", "#8c564b", "#17becf"]

params = {
    "axes.labelsize": 9,
    "font.size": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.markersize": 3,
    "lines.linewidth": 1,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure(width=fig_width, height=None):
    rcParams.update(params)
    return Figure(figsize=(width, height or width * golden_mean))


def _style(i):
    return dict(marker=markers[i % len(markers)], color=colors[i % len(colors)])


def _save(fig, path, tag=""):
    fig.savefig(path, metadata={"Description": tag} if tag else None)
    return path


def _select(records, eps):
    by_L = {}
    for r in records:
        if abs(r.eps - eps) < 1e-9:
            by_L.setdefault(r.L, []).append(r)
    return {L: sorted(v, key=lambda r: r.F) for L, v in sorted(by_L.items())}


def plot_gap_ratio(records, eps, path, tag=""):
    """``<r>`` against ``F`` per system size with the Poisson and GOE reference lines."""
    fig = _figure()
    ax = fig.add_subplot()
    for i, (L, recs) in enumerate(_select(records, eps).items()):
        F = [r.F for r in recs]
        ax.errorbar(F, [r.mean_r for r in recs], yerr=[r.stderr_r for r in recs],
                    label=f"L={L}", capsize=1.5, **_style(i))
    ax.axhline(R_MEAN_GOE, ls="--", color="0.6")
    ax.axhline(R_MEAN_POISSON, ls="--", color="0.6")
    ax.set_xlabel(r"$F$")
    ax.set_ylabel(r"$\langle r\rangle$")
    ax.set_title(rf"$\epsilon={eps:g}$")
    ax.legend(frameon=False)
    return _save(fig, path, tag)


def plot_entropy(records, eps, path, tag=""):
    """``<S>`` against ``F`` with the entropy variance in an inset."""
    fig = _figure(height=fig_width * 0.8)
    ax = fig.add_subplot()
    inset = ax.inset_axes([0.55, 0.5, 0.4, 0.42])
    for i, (L, recs) in enumerate(_select(records, eps).items()):
        F = [r.F for r in recs]
        ax.plot(F, [r.mean_S for r in recs], label=f"L={L}", **_style(i))
        inset.plot(F, [r.var_S for r in recs], **_style(i))
    ax.set_xlabel(r"$F$")
    ax.set_ylabel(r"$\langle S\rangle$")
    ax.set_title(rf"$\epsilon={eps:g}$")
    inset.set_ylabel(r"$\sigma^2$", fontsize=7)
    inset.tick_params(labelsize=6)
    ax.legend(frameon=False, loc="lower left")
    return _save(fig, path, tag)


def plot_collapse(data, result, path, tag=""):
    """Curves in the rescaled coordinate ``(F - F_c) L^(1/nu)``."""
    fig = _figure()
    ax = fig.add_subplot()
    for i, L in enumerate(data.sizes):
        F, y, err = data.curves[L]
        x = (F - result.F_c) * float(L) ** (1.0 / result.nu)
        ax.errorbar(x, y, yerr=err, label=f"L={L}", capsize=1.5, **_style(i))
    ax.set_xlabel(r"$(F-F_c)L^{1/\nu}$")
    ax.set_ylabel(r"$\langle r\rangle$")
    ax.set_title(
        rf"$F_c={result.F_c:.3f}\pm{result.F_c_err:.3f}$, $\nu={result.nu:.2f}\pm{result.nu_err:.2f}$"
    )
    ax.legend(frameon=False)
    return _save(fig, path, tag)


def plot_phase_diagram(records, L, edge, path, tag=""):
    """Colour map of ``<r>`` over ``(F, eps)`` at size ``L`` with fitted critical fields."""
    recs = [r for r in records if r.L == L]
    eps = sorted({r.eps for r in recs})
    F = sorted({r.F for r in recs})
    grid = np.full((len(eps), len(F)), np.nan)
    for r in recs:
        grid[eps.index(r.eps), F.index(r.F)] = r.mean_r
    fig = _figure(height=fig_width * 0.85)
    ax = fig.add_subplot()
    if eps and F:
        mesh = ax.pcolormesh(F, eps, grid, shading="nearest", cmap="viridis",
                             vmin=R_MEAN_POISSON, vmax=R_MEAN_GOE)
        fig.colorbar(mesh, ax=ax, label=r"$\langle r\rangle$")
    if edge:
        ax.errorbar([res.F_c for _, res in edge], [e for e, _ in edge],
                    xerr=[res.F_c_err for _, res in edge], fmt="o", color="red",
                    capsize=1.5, label="collapse $F_c$")
        ax.legend(frameon=False, loc="upper right")
    ax.set_xlabel(r"$F$")
    ax.set_ylabel(r"$\epsilon$")
    ax.set_title(f"L={L}")
    return _save(fig, path, tag)
