"""Fixed particle-number occupation basis.

Site ``j`` (1-based, as in the lattice potential) is stored in bit ``j - 1``
of an integer mask. States are kept in increasing integer order, which for
fixed popcount coincides with the colexicographic order of the occupied-site
sets, so the rank of a mask is given by the combinatorial number system.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import NotFoundError, ParameterError

L_MAX = 28


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Occupation masks with exactly ``N`` particles on ``L`` sites.

    Attributes
    ----------
    L : int
        Number of sites.
    N : int
        Number of particles.
    states : ndarray of int64
        Strictly increasing occupation masks (read-only).
    """

    L: int
    N: int
    states: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.states.shape[0])

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"FockBasis(L={self.L}, N={self.N}, dim={self.dim})"

    def occupations(self) -> np.ndarray:
        """Return a ``(dim, L)`` 0/1 array, column ``j`` holding site ``j + 1``."""
        bits = np.arange(self.L, dtype=np.int64)
        return ((self.states[:, None] >> bits) & 1).astype(np.int8)

    def index_array(self, masks) -> np.ndarray:
        """Vectorized lookup of many masks. Raises if any mask is absent."""
        masks = np.asarray(masks, dtype=np.int64)
        idx = np.searchsorted(self.states, masks)
        idx_c = np.minimum(idx, self.dim - 1)
        if not np.all(self.states[idx_c] == masks):
            raise NotFoundError("one or more masks are not in the basis")
        return idx_c


def _check_params(L, N):
    if not (isinstance(L, (int, np.integer)) and isinstance(N, (int, np.integer))):
        raise ParameterError(f"L and N must be integers, got L={L!r}, N={N!r}")
    if not 0 <= N <= L:
        raise ParameterError(f"need 0 <= N <= L, got L={L}, N={N}")
    if L > L_MAX:
        raise ParameterError(f"L={L} exceeds the supported maximum L={L_MAX}")


@lru_cache(maxsize=None)
def _masks(L: int, N: int) -> np.ndarray:
    # masks without bit L-1 all precede masks with it, so concatenation keeps order
    if N == 0:
        return np.zeros(1, dtype=np.int64)
    if N == L:
        return np.array([(1 << L) - 1], dtype=np.int64)
    low = _masks(L - 1, N)
    high = _masks(L - 1, N - 1) | np.int64(1 << (L - 1))
    return np.concatenate([low, high])


@lru_cache(maxsize=32)
def enumerate_basis(L: int, N: int) -> FockBasis:
    """Build the basis of all ``L``-bit masks with ``N`` set bits.

    Results are cached; the returned object and its arrays are read-only.
    """
    _check_params(L, N)
    states = _masks(int(L), int(N)).copy()
    states.setflags(write=False)
    return FockBasis(int(L), int(N), states)


def state_index(basis: FockBasis, mask: int) -> int:
    """Rank of ``mask`` in ``basis`` via the combinatorial number system."""
    mask = int(mask)
    if mask < 0 or mask >> basis.L or bin(mask).count("1") != basis.N:
        raise NotFoundError(f"mask {mask:#b} is not in {basis!r}")
    rank = 0
    i = 0
    pos = 0
    while mask:
        if mask & 1:
            i += 1
            rank += comb(pos, i)
        mask >>= 1
        pos += 1
    return rank
