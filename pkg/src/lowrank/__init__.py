"""Low-rank matrix recovery by adaptive singular value thresholding."""
from .errors import (
    DivergenceError,
    FormatError,
    LowRankError,
    NumericalError,
    ParameterError,
    ShapeError,
    StateError,
)
from .experiments import (
    BenchmarkRecord,
    PhaseGrid,
    ProblemSpec,
    degrees_of_freedom,
    derive_seed,
    generate_low_rank,
    make_problem,
    relative_error,
    run_benchmark,
    run_phase_transition,
    run_sweep,
    sample_observations,
)
from .linalg import SvdFactors, frobenius_norm, nuclear_norm, reconstruct, svd
from .operators import (
    AffineMap,
    DenseOperator,
    ObservationSet,
    SamplingOperator,
    adjoint,
    apply,
    make_dense_operator,
    make_sampling_operator,
)
from .solvers import (
    SolveResult,
    SolverConfig,
    ThresholdSchedule,
    asvt_solve,
    hard_threshold,
    soft_threshold,
    svt_solve,
    threshold_at,
)

__version__ = "0.1.0"
