"""Disordered tilted chain of interacting spinless fermions.

    H = sum_{j=1}^{L-1} [ J/2 (c+_j c_{j+1} + h.c.) + U n_j n_{j+1} ] + sum_j V_j n_j,
    V_j = h_j - F j,   h_j ~ Uniform[-W, W],

with open boundaries. Hops are between neighbouring sites only, so no
Jordan-Wigner string appears and every off-diagonal element equals +J/2.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError
from .fock import FockBasis


@dataclass(frozen=True)
class LatticeParams:
    L: int
    N: int | None = None
    J: float = 1.0
    U: float = 1.0
    F: float = 0.0
    W: float = 0.5
    boundary: str = "open"

    def __post_init__(self):
        if self.N is None:
            if self.L % 2:
                raise ParameterError(f"half filling needs even L, got L={self.L}")
            object.__setattr__(self, "N", self.L // 2)
        if self.L < 1 or not 0 <= self.N <= self.L:
            raise ParameterError(f"invalid (L, N) = ({self.L}, {self.N})")
        if self.F < 0:
            raise ParameterError(f"field strength must be >= 0, got F={self.F}")
        if self.W < 0:
            raise ParameterError(f"disorder strength must be >= 0, got W={self.W}")
        if self.boundary != "open":
            raise ParameterError("only open boundary conditions are supported")


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    seed: int
    h: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, DisorderRealization)
            and self.seed == other.seed
            and np.array_equal(self.h, other.h)
        )


def sample_disorder(W: float, L: int, seed: int) -> DisorderRealization:
    """Draw ``h_j`` i.i.d. uniform on ``[-W, W]`` from a PCG64 stream keyed by ``seed``."""
    if W < 0:
        raise ParameterError(f"disorder strength must be >= 0, got W={W}")
    if L < 1:
        raise ParameterError(f"L must be positive, got L={L}")
    rng = np.random.default_rng(seed)
    h = rng.uniform(-W, W, size=L) if W > 0 else np.zeros(L)
    h.setflags(write=False)
    return DisorderRealization(int(seed), h)


def onsite_potential(params: LatticeParams, disorder: DisorderRealization) -> np.ndarray:
    """``V_j = h_j - F j`` with the 1-based site index ``j``."""
    j = np.arange(1, params.L + 1, dtype=float)
    return np.asarray(disorder.h, dtype=float) - params.F * j


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """Upper-triangle coordinate storage (``row <= col``) of a real symmetric matrix."""

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.dim)
        on = self.rows == self.cols
        np.add.at(d, self.rows[on], self.vals[on])
        return d

    def to_sparse(self, fmt="csr"):
        """Full symmetric scipy sparse matrix."""
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.vals, self.vals[off]])
        return sp.coo_matrix((v, (r, c)), shape=(self.dim, self.dim)).asformat(fmt)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        np.add.at(a, (self.rows, self.cols), self.vals)
        off = self.rows != self.cols
        np.add.at(a, (self.cols[off], self.rows[off]), self.vals[off])
        return a

    def norm_bound(self) -> float:
        """Cheap upper bound on the spectral norm (max absolute row sum)."""
        return float(abs(self.to_sparse()).sum(axis=1).max()) if self.dim else 0.0

    def dump_coo(self, path):
        """Write ``row col value`` lines (upper triangle, 0-based indices)."""
        with open(path, "w") as fh:
            for r, c, v in zip(self.rows, self.cols, self.vals):
                fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def build_hamiltonian(
    params: LatticeParams, disorder: DisorderRealization, basis: FockBasis
) -> SparseHamiltonian:
    """Assemble the many-body Hamiltonian on ``basis`` for one disorder realization."""
    L = params.L
    if basis.L != L or basis.N != params.N:
        raise ParameterError(
            f"basis (L={basis.L}, N={basis.N}) does not match params (L={L}, N={params.N})"
        )
    if len(disorder.h) != L:
        raise ParameterError(f"disorder has {len(disorder.h)} sites, expected {L}")

    states = basis.states
    occ = basis.occupations().astype(float)
    V = onsite_potential(params, disorder)
    # fixed accumulation order: potential j = 1..L, then bonds j = 1..L-1
    diag = np.zeros(basis.dim)
    for j in range(L):
        diag += V[j] * occ[:, j]
    for j in range(L - 1):
        diag += params.U * (occ[:, j] * occ[:, j + 1])

    rows = [np.arange(basis.dim, dtype=np.int64)]
    cols = [np.arange(basis.dim, dtype=np.int64)]
    vals = [diag]
    for j in range(L - 1):
        pair = np.int64(3 << j)
        # exactly one of sites j+1, j+2 occupied -> particle can move across the bond
        movable = np.nonzero(((states >> j) & 1) != ((states >> (j + 1)) & 1))[0]
        targets = basis.index_array(states[movable] ^ pair)
        upper = movable < targets
        rows.append(movable[upper])
        cols.append(targets[upper])
        vals.append(np.full(int(upper.sum()), params.J / 2))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = np.lexsort((cols, rows))
    return SparseHamiltonian(
        basis.dim,
        rows[order],
        cols[order],
        vals[order],
        meta={"L": L, "N": params.N, "F": params.F, "W": params.W, "seed": disorder.seed},
    )
