"""Exact diagonalization of tilted, weakly disordered fermion chains and their localization crossover."""

__version__ = "0.1.0"

from .errors import ConfigError, NotFoundError, ParameterError, ResourceError  # noqa: E402
from .fock import FockBasis, enumerate_basis, state_index  # noqa: E402
from .model import (  # noqa: E402
    DisorderRealization,
    LatticeParams,
    SparseHamiltonian,
    build_hamiltonian,
    sample_disorder,
)
from .spectra import (  # noqa: E402
    GapRatioSample,
    SpectrumWindow,
    full_spectrum,
    gap_ratios,
    reference_r_pdf,
    solve_window,
    target_window,
)
from .entanglement import EntropySample, entropy_stats, half_chain_entropy  # noqa: E402
