"""collapselab: Monte Carlo and spectral tools for stochastic state-vector
collapse dynamics.

The package simulates ensembles of state vectors under Poisson-clocked
localization jumps, builds the finite generator of the induced probability
flow for a qubit, analyzes its left/right eigenstructure, and verifies
collapse statistics, density-matrix decoherence rates, and ensemble
indistinguishability against closed forms.
"""

__version__ = "0.1.0"

from .errors import DefectiveKernelError, PreconditionError, RunawayError
from .hilbert import Ensemble, SectorMap, StateVector, bilinear, normalize, sample_uniform, sector_weight
from .jump_engine import (
    JumpModel,
    apply_jump,
    check_left_eigen,
    evolve_ensemble,
    evolve_trajectory,
    jump_average,
    jump_probabilities,
    make_bell_jump,
    ring_model,
    sample_jump_parameter,
)

__all__ = [
    "DefectiveKernelError",
    "Ensemble",
    "JumpModel",
    "PreconditionError",
    "RunawayError",
    "SectorMap",
    "StateVector",
    "apply_jump",
    "bilinear",
    "check_left_eigen",
    "evolve_ensemble",
    "evolve_trajectory",
    "jump_average",
    "jump_probabilities",
    "make_bell_jump",
    "normalize",
    "ring_model",
    "sample_jump_parameter",
    "sample_uniform",
    "sector_weight",
]
