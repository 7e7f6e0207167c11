"""Eigensolvers, energy-density windows and adjacent-gap-ratio statistics."""

from dataclasses import dataclass
from functools import lru_cache
from math import log

import numpy as np
import scipy.linalg as sl
import scipy.sparse.linalg as sla
from scipy.integrate import quad

from .errors import ParameterError, ResourceError
from .model import SparseHamiltonian

DENSE_DIM_CAP = 13000
SPARSE_DIM_CAP = 200000
# below this dimension "auto" uses dense diagonalization
AUTO_DENSE_DIM = 600
DEFAULT_K = 50
DEGENERATE_GAP_TOL = 1e-12

R_MEAN_POISSON = 2 * log(2) - 1
R_MEAN_GOE = 0.5307  # large-N GOE value (the Wigner-like surmise gives 4 - 2*sqrt(3))


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class SpectrumWindow:
    """The ``k`` eigenpairs closest to the target energy density ``eps``.

    ``E_min``/``E_max`` are the extremal eigenvalues of the full spectrum of the
    same realization, so ``eps = (E - E_min) / (E_max - E_min)``.
    """

    eps: float
    eigenvalues: np.ndarray
    E_min: float
    E_max: float
    eigenvectors: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def E_target(self) -> float:
        return self.E_min + self.eps * (self.E_max - self.E_min)

    def energy_densities(self) -> np.ndarray:
        return (self.eigenvalues - self.E_min) / (self.E_max - self.E_min)


@dataclass(frozen=True, eq=False)
class GapRatioSample:
    """Kept ratios; ``positions[i]`` is the index of the middle level of ``r_values[i]``."""

    r_values: np.ndarray
    dropped: int = 0
    positions: np.ndarray | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.r_values)) if len(self.r_values) else float("nan")


def _as_dense(H):
    if isinstance(H, SparseHamiltonian):
        return H.to_dense()
    return np.asarray(H, dtype=float)


def full_spectrum(H, want_vectors: bool = True) -> Spectrum:
    """Dense diagonalization of all eigenpairs, eigenvalues ascending.

    Parameters
    ----------
    H : SparseHamiltonian or array_like
        Real symmetric matrix.
    want_vectors : bool
        Also return orthonormal eigenvectors as columns.
    """
    dim = H.dim if isinstance(H, SparseHamiltonian) else np.shape(H)[0]
    if dim > DENSE_DIM_CAP:
        raise ResourceError(f"dimension {dim} exceeds the dense cap {DENSE_DIM_CAP}")
    a = _as_dense(H)
    if want_vectors:
        w, v = sl.eigh(a)
        return Spectrum(w, v)
    return Spectrum(sl.eigh(a, eigvals_only=True))


def _nearest_k(eigenvalues, target, k):
    order = np.argsort(np.abs(eigenvalues - target), kind="stable")[:k]
    return np.sort(order)


def target_window(spectrum: Spectrum, eps: float, k: int = DEFAULT_K) -> SpectrumWindow:
    """Select the ``k`` eigenpairs of a full spectrum nearest to energy density ``eps``."""
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"energy density must lie in [0, 1], got {eps}")
    w = np.asarray(spectrum.eigenvalues)
    if k < 1 or len(w) < k:
        raise ParameterError(f"spectrum has {len(w)} levels, window needs k={k}")
    E_min, E_max = float(w[0]), float(w[-1])
    idx = _nearest_k(w, E_min + eps * (E_max - E_min), k)
    vecs = None if spectrum.eigenvectors is None else spectrum.eigenvectors[:, idx]
    return SpectrumWindow(float(eps), w[idx], E_min, E_max, vecs)


def _start_vector(dim):
    # fixed start vector keeps ARPACK deterministic
    return np.cos(np.arange(dim) * 0.7) + 1.5


def shift_invert_window(
    H: SparseHamiltonian, eps: float, k: int = DEFAULT_K, want_vectors: bool = True
) -> SpectrumWindow:
    """Interior eigenpairs via the shift-invert transformation ``(H - E I)^{-1}``.

    The extremal eigenvalues come from Lanczos; the ``k`` eigenpairs closest to
    ``E_min + eps (E_max - E_min)`` are then the largest-magnitude eigenvalues of
    the inverted operator, factorized once with sparse LU.
    """
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"energy density must lie in [0, 1], got {eps}")
    dim = H.dim
    if dim > SPARSE_DIM_CAP:
        raise ResourceError(f"dimension {dim} exceeds the sparse cap {SPARSE_DIM_CAP}")
    if k < 1 or k >= dim - 1:
        raise ParameterError(f"shift-invert needs 1 <= k < dim - 1, got k={k}, dim={dim}")
    A = H.to_sparse("csc")
    v0 = _start_vector(dim)
    E_min = float(sla.eigsh(A, k=1, which="SA", v0=v0, return_eigenvectors=False)[0])
    E_max = float(sla.eigsh(A, k=1, which="LA", v0=v0, return_eigenvectors=False)[0])
    target = E_min + eps * (E_max - E_min)
    if want_vectors:
        w, v = sla.eigsh(A, k=k, sigma=target, which="LM", v0=v0)
    else:
        w = sla.eigsh(A, k=k, sigma=target, which="LM", v0=v0, return_eigenvectors=False)
        v = None
    order = np.argsort(w, kind="stable")
    w = w[order]
    if v is not None:
        v = v[:, order]
    return SpectrumWindow(float(eps), w, min(E_min, float(w[0])), max(E_max, float(w[-1])), v)


def solve_window(
    H: SparseHamiltonian,
    eps: float,
    k: int = DEFAULT_K,
    want_vectors: bool = True,
    method: str = "auto",
) -> SpectrumWindow:
    """Window of ``k`` eigenpairs around ``eps`` using ``method`` in {auto, dense, shift-invert}."""
    if method == "auto":
        method = "dense" if H.dim <= AUTO_DENSE_DIM or k >= H.dim - 1 else "shift-invert"
    if method == "dense":
        return target_window(full_spectrum(H, want_vectors), eps, k)
    if method == "shift-invert":
        return shift_invert_window(H, eps, k, want_vectors)
    raise ParameterError(f"unknown eigensolver method {method!r}")


def gap_ratios(eigenvalues) -> GapRatioSample:
    """Adjacent gap ratios ``r_n = min(d_{n+1}/d_n, d_n/d_{n+1})`` of a sorted spectrum.

    Ratios involving a gap below ``1e-12`` times the spectral span are dropped
    and counted rather than set to zero.
    """
    e = np.asarray(eigenvalues, dtype=float)
    if e.ndim != 1 or len(e) < 3:
        raise ParameterError("gap ratios need at least 3 levels")
    d = np.diff(e)
    if np.any(d < 0):
        raise ParameterError("eigenvalues must be sorted ascending")
    tol = DEGENERATE_GAP_TOL * (e[-1] - e[0])
    lo, hi = d[:-1], d[1:]
    ok = (lo > tol) & (hi > tol)
    r = np.minimum(lo[ok], hi[ok]) / np.maximum(lo[ok], hi[ok])
    return GapRatioSample(r, int(np.count_nonzero(~ok)), np.nonzero(ok)[0] + 1)


def _goe_shape(r):
    return (r + r * r) / (1 + r + r * r) ** 2.5


@lru_cache(maxsize=None)
def goe_normalization() -> float:
    """Constant making the GOE surmise a density on ``[0, 1]`` (analytically 27/4)."""
    return 1.0 / quad(_goe_shape, 0.0, 1.0, epsabs=0, epsrel=1e-13)[0]


def reference_r_pdf(ensemble: str, r):
    """Reference density of the gap ratio on ``[0, 1]`` for 'poisson' or 'goe'."""
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)) or np.any(np.isnan(r)):
        raise ParameterError("gap ratio must lie in [0, 1]")
    kind = ensemble.lower()
    if kind == "poisson":
        out = 2.0 / (1.0 + r) ** 2
    elif kind == "goe":
        out = goe_normalization() * _goe_shape(r)
    else:
        raise ParameterError(f"unknown ensemble {ensemble!r}")
    return float(out) if out.ndim == 0 else out


def reference_r_mean(ensemble: str) -> float:
    """``<r>`` implied by :func:`reference_r_pdf`, by quadrature."""
    return quad(lambda x: x * reference_r_pdf(ensemble, x), 0.0, 1.0, epsrel=1e-12)[0]
