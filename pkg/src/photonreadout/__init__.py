"""Single-photon readout of a superconducting qubit through a dispersively
coupled resonator: closed-form dispersive model, beyond-dispersive
transport solver with Purcell decay, and parameter design tools.
"""
from .core import (GHZ, KHZ, MHZ, US, ParameterError, PulseParams, QubitState, SystemParams,
                   derive_couplings, make_dimensionless, validate_regime)
from .dispersive import contrast_dispersive, optimal_cavity_decay
from .optimizer import DesignTargets, analytic_plan, numeric_optimize
from .transport_full import SolverOptions, full_contrast

__version__ = "0.1.0"

__all__ = [
    "GHZ", "KHZ", "MHZ", "US", "ParameterError", "PulseParams", "QubitState", "SystemParams",
    "derive_couplings", "make_dimensionless", "validate_regime", "contrast_dispersive",
    "optimal_cavity_decay", "DesignTargets", "analytic_plan", "numeric_optimize",
    "SolverOptions", "full_contrast",
]
