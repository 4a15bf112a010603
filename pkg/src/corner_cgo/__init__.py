"""Complex geometric optics solutions and scattering verdicts at planar corners."""

__version__ = "0.1.0"

from .analytic import (  # noqa: E402
    GammaBoundInputs,
    PhaseParams,
    SectorDomain,
    decay_delta,
    gamma_bound_sweep,
    grad_phase,
    incomplete_gamma_bound_check,
    phase,
    upper_gamma_closed,
)
from .cauchy import boundary_cauchy, cauchy_apply  # noqa: E402
from .config import ExperimentConfig, emit, load_config  # noqa: E402
from .corner import (  # noqa: E402
    IncidentFieldModel,
    MediumModel,
    angle_vanishing,
    corner_integral,
    general_A_invariance,
    localAll_decomposition,
    nonscattering_candidate,
    rate_fit,
    sector_moment,
    sharp_C0,
    sharp_C1,
    sharp_C2,
    sharp_constants,
    taylor_leading,
)
from .dbar import PotentialSpec, build_cgo, neumann_solve, op_S, verify_smapping  # noqa: E402
from .errors import (  # noqa: E402
    ConfigurationError,
    ConvergenceError,
    CornerCGOError,
    DivergenceError,
    DomainError,
    NumericalError,
    PreconditionError,
)
from .quadrature import ComplexFieldSample, PolarGrid, build_sector_grid, integrate, lp_norm  # noqa: E402
from .runner import RunManifest, run  # noqa: E402
from .verdict import (  # noqa: E402
    CornerSpec,
    IncidentDescriptor,
    NonScatteringWitness,
    ScatterVerdict,
    classify,
    rectangle_witness,
    witness_cross_check,
)
