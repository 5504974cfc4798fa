"""Vortex-blob simulation of 2D ideal flow outside a smooth obstacle."""
from .geometry import (
    DomainError,
    ExteriorMapSpec,
    GeometryError,
    InversionError,
    MapValidationReport,
    forward_map,
    inverse_map,
    jacobian,
    map_derivative,
    validate_map,
)
from .kernels import (
    KernelContext,
    SingularityError,
    bs_kernel,
    green,
    harmonic_field,
    stream_at,
    velocity,
)
from .dynamics import (
    BoundaryPenetrationError,
    PatchSpec,
    SimulationConfig,
    SimulationError,
    VortexEnsemble,
    alpha_of,
    discretize,
    rk4_step,
    run,
)
from .diagnostics import (
    DiagnosticRecord,
    GrowthFit,
    check_loops_inequalities,
    fit_growth_exponent,
    generalized_energy,
    log_moment,
    min_log_pair_moment,
    physical_moments,
    smoothed_tail_mass,
    theta_selector,
    weighted_moments,
)

__version__ = "0.1.0"
