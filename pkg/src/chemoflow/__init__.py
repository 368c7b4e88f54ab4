"""Finite-volume solver for a regularised chemotaxis-Navier-Stokes system with nonlinear diffusion."""
from .errors import (
    BlowUpSuspected,
    CFLViolation,
    CheckpointFormatError,
    ChemoflowError,
    ConfigError,
    DomainError,
    InvariantError,
    OutOfRegimeError,
    ParameterError,
    ShapeError,
    SolverError,
    StepRejected,
    UnsupportedVersionError,
)
from .grid import Grid, ScalarField, VectorField, integrate, norm_lp
from .model_config import (
    InitialData,
    ModelParams,
    PotentialSpec,
    SensitivitySpec,
    eval_sensitivity,
    theorem_exponents,
    validate_params,
)
from .stokes import SolverSettings, StokesSolver, StokesState, project, yosida_apply
from .timestepper import Problem, State, run_to_time, stable_dt, step_c, step_coupled, step_n
from .diagnostics import FunctionalSeries, audit_bounds, energy, gn_audit, pointwise_log_identity_audit
from .checkpoint import checkpoint_roundtrip, load_checkpoint, save_checkpoint

__version__ = "0.1.0"
