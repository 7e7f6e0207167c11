"""Half-chain von Neumann entanglement entropy of Fock-basis states.

The amplitude of ``|n_L, n_R>`` is arranged into a matrix with rows indexed by
the left-half configuration and columns by the right-half one. Particle-number
conservation makes it block diagonal in the left particle number, so Schmidt
values are the singular values of the blocks, pooled.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .fock import FockBasis

NORM_TOL = 1e-10
SCHMIDT_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class _Block:
    basis_idx: np.ndarray  # positions in the full basis
    row: np.ndarray  # local left-configuration index
    col: np.ndarray  # local right-configuration index
    shape: tuple


@lru_cache(maxsize=16)
def _bipartition(L: int, N: int, states_key: bytes) -> tuple:
    states = np.frombuffer(states_key, dtype=np.int64)
    half = L // 2
    left = states & ((1 << half) - 1)
    right = states >> half
    nl = np.array([bin(int(m)).count("1") for m in left])
    blocks = []
    for n in np.unique(nl):
        sel = np.nonzero(nl == n)[0]
        lu, row = np.unique(left[sel], return_inverse=True)
        ru, col = np.unique(right[sel], return_inverse=True)
        blocks.append(_Block(sel, row, col, (len(lu), len(ru))))
    return tuple(blocks)


def bipartition_blocks(basis: FockBasis):
    """Block layout of the half-chain cut (cached per basis)."""
    if basis.L % 2:
        raise ParameterError(f"half-chain cut needs even L, got L={basis.L}")
    return _bipartition(basis.L, basis.N, basis.states.tobytes())


def schmidt_values(states, basis: FockBasis) -> np.ndarray:
    """Schmidt coefficients of one state (1D) or each column of a 2D array.

    Returns an array of shape ``(n_schmidt,)`` or ``(n_states, n_schmidt)``,
    unsorted, with zero padding only where blocks are rectangular.
    """
    psi = np.asarray(states)
    single = psi.ndim == 1
    if single:
        psi = psi[:, None]
    if psi.shape[0] != basis.dim:
        raise ParameterError(f"state length {psi.shape[0]} does not match basis dim {basis.dim}")
    norms = np.linalg.norm(psi, axis=0)
    if np.any(np.abs(norms - 1) > NORM_TOL):
        raise ParameterError("state is not normalized to 1 within 1e-10")
    out = []
    nvec = psi.shape[1]
    for b in bipartition_blocks(basis):
        m = np.zeros((nvec,) + b.shape, dtype=psi.dtype)
        m[:, b.row, b.col] = psi[b.basis_idx, :].T
        out.append(np.linalg.svd(m, compute_uv=False))
    lam = np.concatenate(out, axis=1)
    return lam[0] if single else lam


def entropy_from_schmidt(lam) -> np.ndarray:
    lam = np.asarray(lam)
    p = np.where(lam > SCHMIDT_CUTOFF, lam * lam, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def half_chain_entropy(state, basis: FockBasis):
    """Von Neumann entropy (natural log) of the left ``L/2`` sites.

    Accepts one state vector or a ``(dim, n)`` array of column states, in which
    case an array of ``n`` entropies is returned.
    """
    S = entropy_from_schmidt(schmidt_values(state, basis))
    return float(S) if np.ndim(S) == 0 else S


@dataclass(frozen=True, eq=False)
class EntropySample:
    S_values: np.ndarray
    mean: float
    variance: float


def entropy_stats(samples) -> EntropySample:
    """Pooled mean and variance ``<S^2> - <S>^2`` over all supplied entropies."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise ParameterError("entropy statistics need at least one sample")
    mean = float(np.mean(s))
    var = float(np.mean((s - mean) ** 2))
    return EntropySample(s, mean, var)
