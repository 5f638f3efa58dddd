"""Simulation and verification lab for random walks among random conductances on Z^d."""
from __future__ import annotations

from .environment import (
    ConductanceField,
    ConductanceLaw,
    LatticeSpec,
    empirical_mean_mu,
    generate,
    load,
    neighbors,
    save,
    shift,
)
from .errors import (
    ConfigurationError,
    ContractError,
    NumericalError,
    ParameterError,
    RCMError,
    ResourceError,
    TruncationError,
    UnsupportedOperationError,
)
from .walk import CSRW, VSRW, WalkPath, simulate, time_change

__version__ = "0.1.0"

__all__ = [
    "CSRW",
    "VSRW",
    "ConductanceField",
    "ConductanceLaw",
    "ConfigurationError",
    "ContractError",
    "LatticeSpec",
    "NumericalError",
    "ParameterError",
    "RCMError",
    "ResourceError",
    "TruncationError",
    "UnsupportedOperationError",
    "WalkPath",
    "empirical_mean_mu",
    "generate",
    "load",
    "neighbors",
    "save",
    "shift",
    "simulate",
    "time_change",
]
