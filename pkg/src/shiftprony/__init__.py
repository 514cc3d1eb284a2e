"""Recovery of amplitudes and shift vectors of combined signal atoms from
Fourier samples placed on the shared zeros of the other atoms' transforms."""

from .errors import (
    ConfigError,
    DimensionMismatchError,
    DivisionNearZeroError,
    EmptyDecouplingSetError,
    InsufficientPointsError,
    MeasurementMismatchError,
    NoBracketError,
    NoProgressionError,
    NotANetError,
    NotAProgressionError,
    RootFindingFailureError,
    ShiftPronyError,
    UnderdeterminedSystemError,
    UnsupportedDimensionError,
)
from .pipeline import (
    ExperimentConfig,
    MatchScore,
    ReconstructionReport,
    demo_1d_config,
    demo_2d_config,
    load_config,
    match_and_score,
    parse_config,
    run_reconstruction,
)
from .prony import (
    GeneralizedPronySystem,
    GridInfo,
    PronySolution,
    ShiftEstimate,
    StandardPronySystem,
    assemble_decoupled,
    detect_grid,
    detect_progressions,
    recover_shifts,
    recover_shifts_lattice,
    recover_shifts_nodes,
    reduce_to_standard,
    residual,
    solve_generalized,
    solve_grid,
    solve_standard_prony,
)
from .sampling import (
    DecouplingSet,
    SampleSet,
    Window,
    ZeroSetDesc,
    choose_samples,
    decoupling_set,
    default_window,
    feasibility,
    refine_zero,
    zero_set,
)
from .signal_model import (
    MeasurementSet,
    ShiftModel,
    ShiftTerm,
    SignalAtom,
    atom_ft,
    box1d,
    box2d,
    delta_pair,
    dirac,
    gaussian,
    model_ft,
    rotated_square,
    synthesize_measurements,
    validate_model,
)
from .svgplot import render_zero_plot
from .uniqueness import (
    CoveringEstimate,
    KhovanskiConstant,
    NetParams,
    SpanCertificate,
    WindowCertificate1D,
    covering_number,
    entropy_bound,
    langer_zero_bound,
    net_certificate,
    one_d_window,
    skolem_demo,
    span_certificate,
)

__version__ = "0.1.0"
