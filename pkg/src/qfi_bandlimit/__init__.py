"""Quantum and classical Fisher information for resolving sources of finite bandwidth."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConsistencyError,
    CutoffError,
    DomainError,
    NumericalError,
    StateError,
    TruncationError,
    UnsupportedProfileError,
    UsageError,
)
from .fisher import FisherResult, qfi_localization, qfi_pair, qfi_point  # noqa: E402
from .genspec import SpectrumProfile, qfi_genspec, solve_genspec  # noqa: E402
from .pswf import PswfBasis, build_basis  # noqa: E402
from .spdo_loc import SolverOptions, solve_loc  # noqa: E402
from .spdo_pair import solve_pair  # noqa: E402
from .zernike_cfi import cfi, mode_probabilities  # noqa: E402

__all__ = [
    "ConsistencyError",
    "CutoffError",
    "DomainError",
    "FisherResult",
    "NumericalError",
    "PswfBasis",
    "SolverOptions",
    "SpectrumProfile",
    "StateError",
    "TruncationError",
    "UnsupportedProfileError",
    "UsageError",
    "__version__",
    "build_basis",
    "cfi",
    "mode_probabilities",
    "qfi_genspec",
    "qfi_localization",
    "qfi_pair",
    "qfi_point",
    "solve_genspec",
    "solve_loc",
    "solve_pair",
]
