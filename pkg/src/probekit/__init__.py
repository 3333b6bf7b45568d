"""Singular-probe boundary determination for Schroedinger coefficients on the unit ball."""

from .errors import (
    AccuracyError,
    DomainError,
    NearEigenvalueError,
    PreconditionError,
    ProbekitError,
    ResolutionError,
    TailToleranceError,
    ValidationError,
)
from .expansion import difference_boundedness, expansion_step, remainder_norms, summarize_slopes
from .forward import DtnOperator, ObstacleSpec, apply_dtn, assemble_dtn, solve_radial_mode
from .kernel_algebra import (
    SingularityPolynomial,
    alt_sum_identity,
    eval_derivative,
    identities_2_9_2_10,
    p_poly,
    recurrence_2_11,
    recurrence_2_12,
    recurrence_2_13,
    recurrences_2_14_to_2_17,
)
from .model_integrals import ModelDomainSpec, eval_I, eval_probe_lower_bound, fit_log_slope, theory_slope
from .potentials import (
    PotentialConfig,
    dl_transpose,
    double_layer,
    hypersingular,
    single_layer,
    smoothing_check,
    volume_potential,
)
from .probe import calibrate_constant, diagnostic_functionals, probe_data, recover_boundary_value
from .radial import RadialGrid, RadialProfile
from .schedule import ProbeSchedule
from .spectral import HarmonicField, SobolevIndex, multiply, point_source_trace, project, sobolev_norm

__version__ = "0.1.0"
