"""Finite-size-scaling collapse of ``<r>(F)`` curves.

For a trial ``(F_c, nu)`` each curve is mapped to ``x = (F - F_c) L^(1/nu)``
and interpolated with a natural cubic spline. The cost is

    D = 1/(2 w R) * sum_{i<j} int_{-wR}^{wR} (y_i(x) - y_j(x))^2 dx,

where ``R`` is the rescaled width of the smallest system's curve. Each pair is
integrated only where both splines are defined; a pair whose common domain
misses the window adds a fixed penalty.

Natural cubic interpolation commutes with affine changes of the abscissa, so
the splines are built once in ``F`` and evaluated at ``F_c + x / L^(1/nu)``.
The squared difference of two cubic pieces is a degree-6 polynomial, so 4-point
Gauss-Legendre on the merged breakpoints integrates it exactly.
"""

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from .errors import ParameterError

log = logging.getLogger(__name__)

DEFAULT_W_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))
NU_RANGE = (0.3, 2.0)
GRID_STEP = 0.02
EMPTY_OVERLAP_PENALTY = 1e3
FLAT_TOL = 1e-12

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)

METHOD_METADATA = {
    "spline": "cubic, natural end conditions",
    "quadrature": "4-point Gauss-Legendre per breakpoint interval (exact for spline differences)",
    "optimizer": "grid search then bounded Nelder-Mead, independently per w",
    "averaging": "mean and std over widths whose optimum is off the search boundary",
    "R_anchor": "smallest system size",
    "empty_overlap_penalty": EMPTY_OVERLAP_PENALTY,
}


@dataclass
class CollapseInput:
    """Curves ``L -> (F, y, stderr)``; ``F`` strictly increasing, at least 5 points each."""

    curves: dict
    eps: float | None = None

    def __post_init__(self):
        if len(self.curves) < 2:
            raise ParameterError("a collapse needs at least two system sizes")
        clean = {}
        for L, c in sorted(self.curves.items()):
            F, y = np.asarray(c[0], float), np.asarray(c[1], float)
            err = np.asarray(c[2], float) if len(c) > 2 and c[2] is not None else np.zeros_like(y)
            if F.shape != y.shape or F.ndim != 1:
                raise ParameterError(f"curve L={L}: F and y must be 1D of equal length")
            if len(F) < 5:
                raise ParameterError(f"curve L={L}: need at least 5 points, got {len(F)}")
            if np.any(np.diff(F) <= 0):
                raise ParameterError(f"curve L={L}: F must be strictly increasing")
            clean[int(L)] = (F, y, err)
        self.curves = clean

    @property
    def sizes(self):
        return sorted(self.curves)

    @property
    def F_range(self):
        lo = min(c[0][0] for c in self.curves.values())
        hi = max(c[0][-1] for c in self.curves.values())
        return float(lo), float(hi)

    @classmethod
    def from_records(cls, records, eps, observable="mean_r"):
        """Group sweep records at energy density ``eps`` into curves per ``L``."""
        curves = {}
        for r in records:
            if abs(r.eps - eps) < 1e-9:
                curves.setdefault(r.L, []).append((r.F, getattr(r, observable), r.stderr_r))
        out = {}
        for L, pts in curves.items():
            pts.sort()
            F, y, e = (np.array(v, dtype=float) for v in zip(*pts))
            out[L] = (F, y, e)
        return cls(out, eps)


@dataclass
class CollapseResult:
    F_c: float
    nu: float
    F_c_err: float
    nu_err: float
    D_min: float
    per_w_fits: list
    flags: list = field(default_factory=list)
    eps: float | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "F_c": self.F_c,
            "nu": self.nu,
            "F_c_err": self.F_c_err,
            "nu_err": self.nu_err,
            "D_min": self.D_min,
            "per_w_fits": [
                {"w": w, "F_c": fc, "nu": nu, "D": d} for w, fc, nu, d in self.per_w_fits
            ],
            "flags": list(self.flags),
            "metadata": self.metadata,
        }


def rescale(F_values, F_c: float, nu: float, L: int) -> np.ndarray:
    """``x = (F - F_c) * L**(1/nu)``."""
    if not nu > 0:
        raise ParameterError(f"nu must be positive, got {nu}")
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    return (np.asarray(F_values, dtype=float) - F_c) * float(L) ** (1.0 / nu)


class _Cost:
    """Collapse cost for all window widths at once."""

    def __init__(self, data: CollapseInput, w_grid):
        self.w = np.asarray(w_grid, dtype=float)
        if np.any(self.w <= 0) or np.any(self.w > 1):
            raise ParameterError("window widths must lie in (0, 1]")
        self.sizes = data.sizes
        self.splines = []
        for L in self.sizes:
            F, y, _ = data.curves[L]
            self.splines.append((F, CubicSpline(F, y, bc_type="natural")))
        F0 = self.splines[0][0]
        self.span0 = F0[-1] - F0[0]
        self.pairs = [
            (i, j) for i in range(len(self.sizes)) for j in range(i + 1, len(self.sizes))
        ]

    def __call__(self, F_c, nu) -> np.ndarray:
        scale = np.array([float(L) ** (1.0 / nu) for L in self.sizes])
        R = self.span0 * scale[0]
        half = self.w * R
        knots = [(F - F_c) * s for (F, _), s in zip(self.splines, scale)]
        total = np.zeros_like(self.w)
        for i, j in self.pairs:
            a = max(knots[i][0], knots[j][0])
            b = min(knots[i][-1], knots[j][-1])
            lo = np.clip(-half, a, b)
            hi = np.clip(half, a, b)
            empty = lo >= hi
            if np.all(empty):
                total += EMPTY_OVERLAP_PENALTY
                continue
            t = np.concatenate([knots[i], knots[j], lo, hi])
            t = np.unique(t[(t >= a) & (t <= b)])
            mid = 0.5 * (t[1:] + t[:-1])
            rad = 0.5 * (t[1:] - t[:-1])
            x = mid[:, None] + rad[:, None] * _GL_X
            yi = self.splines[i][1](F_c + x / scale[i])
            yj = self.splines[j][1](F_c + x / scale[j])
            piece = rad * ((yi - yj) ** 2 @ _GL_W)
            cum = np.concatenate([[0.0], np.cumsum(piece)])
            integral = cum[np.searchsorted(t, hi)] - cum[np.searchsorted(t, lo)]
            total += np.where(empty, EMPTY_OVERLAP_PENALTY, integral / (2 * half))
        return total


def collapse_cost(data: CollapseInput, F_c: float, nu: float, w: float) -> float:
    """Collapse cost ``D(F_c, nu)`` for window width ``w`` in ``(0, 1]``."""
    if not nu > 0:
        raise ParameterError(f"nu must be positive, got {nu}")
    if not 0 < w <= 1:
        raise ParameterError(f"window width must lie in (0, 1], got {w}")
    return float(_Cost(data, [w])(F_c, nu)[0])


def _grid(lo, hi, step):
    n = int(np.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def fit_collapse(
    data: CollapseInput,
    w_grid=DEFAULT_W_GRID,
    nu_range=NU_RANGE,
    step: float = GRID_STEP,
    F_c_range=None,
) -> CollapseResult:
    """Fit ``(F_c, nu)`` for every window width, then average over widths.

    For each ``w`` the optimum of a coarse grid over ``F_c`` (the swept F range
    by default) and ``nu`` seeds a bounded Nelder-Mead refinement. The result
    carries the mean over ``w`` and the standard deviation over ``w`` as error
    bars. ``D_min`` is the cost at the averaged parameters with the widest
    window.

    A per-``w`` optimum pinned to the search boundary is flagged and left out
    of the average, unless every width ends on the boundary. A flat cost
    landscape (curves that coincide for every trial parameter) is flagged as
    unidentifiable.
    """
    w_grid = tuple(float(w) for w in w_grid)
    if not w_grid:
        raise ParameterError("empty window-width grid")
    cost = _Cost(data, w_grid)
    F_lo, F_hi = F_c_range if F_c_range is not None else data.F_range
    Fc_axis = _grid(F_lo, F_hi, step)
    nu_axis = _grid(nu_range[0], nu_range[1], step)
    table = np.empty((len(Fc_axis), len(nu_axis), len(w_grid)))
    for a, fc in enumerate(Fc_axis):
        for b, nu in enumerate(nu_axis):
            table[a, b] = cost(fc, nu)

    flags = []
    if np.all(table.max(axis=(0, 1)) - table.min(axis=(0, 1)) < FLAT_TOL):
        flags.append("unidentifiable")

    bounds = [(F_lo, F_hi), nu_range]
    per_w = []
    interior = []
    for k, w in enumerate(w_grid):
        a, b = np.unravel_index(np.argmin(table[:, :, k]), table.shape[:2])
        x0 = np.array([Fc_axis[a], nu_axis[b]])
        simplex = np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])
        for col, (lo, hi) in enumerate(bounds):
            simplex[:, col] = np.clip(simplex[:, col], lo, hi)
            if simplex[1 + col, col] == x0[col]:
                simplex[1 + col, col] = x0[col] - step
        res = minimize(
            lambda p, k=k: cost(p[0], p[1])[k],
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            options={"initial_simplex": simplex, "xatol": 1e-5, "fatol": 1e-14, "maxiter": 2000},
        )
        fc, nu = (float(v) for v in res.x)
        d = float(res.fun)
        if d > table[a, b, k]:
            fc, nu, d = float(x0[0]), float(x0[1]), float(table[a, b, k])
        per_w.append((w, fc, nu, d))
        edge = step / 2
        if min(fc - F_lo, F_hi - fc) < edge or min(nu - nu_range[0], nu_range[1] - nu) < edge:
            flag = f"boundary_hit(w={w:g})"
            flags.append(flag)
            log.info("collapse optimum on the search boundary: %s", flag)
        else:
            interior.append(k)

    if not interior:
        flags.append("all_fits_on_boundary")
        interior = list(range(len(w_grid)))
    fcs = np.array([per_w[k][1] for k in interior])
    nus = np.array([per_w[k][2] for k in interior])
    F_c, nu = float(fcs.mean()), float(nus.mean())
    D_min = float(cost(F_c, nu)[int(np.argmax(w_grid))])
    meta = dict(
        METHOD_METADATA,
        sizes=data.sizes,
        w_grid=list(w_grid),
        w_averaged=[w_grid[k] for k in interior],
        nu_range=list(nu_range),
        F_c_range=[float(F_lo), float(F_hi)],
    )
    return CollapseResult(
        F_c=F_c,
        nu=nu,
        F_c_err=float(fcs.std()),
        nu_err=float(nus.std()),
        D_min=D_min,
        per_w_fits=per_w,
        flags=flags,
        eps=data.eps,
        metadata=meta,
    )


def mobility_edge(records, eps_grid=None, w_grid=DEFAULT_W_GRID, **fit_kw):
    """Per-energy-density collapse fits, returned as ``[(eps, CollapseResult), ...]``.

    Energy densities with fewer than two usable system sizes are skipped with
    a warning.
    """
    records = list(records)
    if eps_grid is None:
        eps_grid = sorted({r.eps for r in records})
    edge = []
    for eps in eps_grid:
        try:
            data = CollapseInput.from_records(records, eps)
        except ParameterError as err:
            warnings.warn(f"skipping eps={eps}: {err}", RuntimeWarning, stacklevel=2)
            continue
        edge.append((float(eps), fit_collapse(data, w_grid, **fit_kw)))
    return edge


def edge_asymmetry(edge) -> dict:
    """Location of the largest critical field relative to the spectrum centre."""
    if not edge:
        raise ParameterError("empty mobility edge")
    eps = np.array([e for e, _ in edge])
    fc = np.array([r.F_c for _, r in edge])
    k = int(np.argmax(fc))
    return {
        "eps_at_max": float(eps[k]),
        "max_F_c": float(fc[k]),
        "shift_from_centre": float(eps[k] - 0.5),
        "towards": "ground" if eps[k] < 0.5 else ("top" if eps[k] > 0.5 else "centre"),
    }


def rescaled_curves(data: CollapseInput, F_c: float, nu: float):
    """Rows ``(x, y, L)`` of every curve rescaled with ``(F_c, nu)``."""
    rows = []
    for L in data.sizes:
        F, y, _ = data.curves[L]
        for xv, yv in zip(rescale(F, F_c, nu, L), y):
            rows.append((float(xv), float(yv), L))
    return rows


def write_report(result: CollapseResult, path):
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=1)


def write_rescaled_csv(data: CollapseInput, result: CollapseResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "y", "L"))
        for x, y, L in rescaled_curves(data, result.F_c, result.nu):
            w.writerow((repr(x), repr(y), L))
