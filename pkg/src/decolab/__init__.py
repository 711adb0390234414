"""Decoherence in the closed-time-path effective action of an oscillator."""

__version__ = "0.1.0"

from decolab.bath import SpectralModel, drude_effective_params, effective_model, self_energy
from decolab.config import RunConfig, parse_config
from decolab.errors import (
    DecolabError,
    DomainError,
    ExtrapolationError,
    IoError,
    NonConvergence,
    NonIntegrableError,
    ParseError,
    PoleError,
    QuadratureError,
    SolverError,
    StiffnessError,
    ValidationError,
)
from decolab.gaussian import (
    GaussianState,
    asymptotic_state,
    evolve,
    instantaneous_suppression,
    mixedness,
    propagate,
)
from decolab.harmonic import (
    QuadraticAction,
    action_value,
    dynamical_suppression,
    normal_frequencies,
    quadratic_action,
    regime_info,
)
from decolab.model import BoundaryData, ModelParams, stationary_points, stationary_propagator
from decolab.output import emit_csv
from decolab.saddle import (
    SaddleProblem,
    SaddleSolution,
    action_along,
    effective_decoherence_time,
    harmonic_saddle,
    march_t,
    solve_saddle,
    sweep_g,
)
