"""Steepest-entropy-ascent (SEA) dynamics of finite-level quantum systems."""
from .errors import (
    ComplexRoots,
    DegeneracyMismatch,
    DimensionMismatch,
    EdgeOfDomain,
    NotCodiagonal,
    NotHermitian,
    NotNormalized,
    NotPositive,
    NumericFailure,
    OutOfClass,
    SeaDynError,
    SignalDetected,
    SingularGram,
    StepSizeUnderflow,
)
from .linalg import (
    DensityMatrix,
    acomm,
    comm,
    haar_unitary,
    matrix_exp,
    matrix_log_supported,
    partial_trace,
    spectral_decompose,
    support_projector,
)
from .bloch import (
    BlochState,
    bloch_to_density,
    char_poly_coeffs,
    density_to_bloch,
    fn_of_rho_degenerate,
    make_ggm,
    positive_by_coeffs,
    quartic_roots,
    quartic_roots_of,
    qutrit_roots,
)
from .sea import (
    ConstraintSet,
    Multipliers,
    SeaConfig,
    compute_multipliers,
    dissipator,
    entropy,
    equatorial_qubit,
    flm_solve,
    flm_state,
    gpb_solution,
    integrate,
    quench,
    sea_rhs,
)
from .qwalk import (
    Graph,
    SweepGrid,
    cycle_graph,
    entropy_production,
    hamiltonian,
    sea_walk,
    sweep,
    unitary_walk,
)
from .composite import (
    CompositeState,
    analytic_separable_case,
    bell_diagonal,
    composite_multipliers,
    composite_rhs,
    covariance,
    deviation,
    entropy_rate,
    integrate_composite,
    local_dissipator,
    no_signaling_check,
    perceive,
)

__version__ = "0.1.0"
