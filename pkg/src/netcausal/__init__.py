"""netcausal: causal compatibility and security bounds for network correlations."""

from .errors import (
    BadIndex,
    BadVisibility,
    CyclicInput,
    DimensionMismatch,
    EmptySource,
    InconsistentPlan,
    Mismatch,
    NetcausalError,
    NonBinary,
    OutOfRange,
    Overflow,
    SignalingEve,
    TooLarge,
    WrongArity,
)
from .model import (
    CausalClass,
    CorrelationTensor,
    NsReport,
    Scenario,
    build_scenario,
    check_nonsignaling,
    correlator,
    deterministic_box,
    independent_agents,
    make_causal_class,
    marginalize,
    mix,
    trivial_class,
    uniform_box,
)
from .functionals import (
    BellReport,
    IndependentSet,
    chained_bell,
    chsh_quantity,
    eval_cca,
    eval_cyclic,
    eval_IJ,
    eval_Rk,
    eval_svetlichny,
    i2_from_chsh,
    variational_distance,
)
from .strategies import (
    LocalResponse,
    SourceWeights,
    StrategyMatrix,
    build_strategy_matrix,
    canonical_responses,
    default_source_cards,
    enumerate_local_responses,
    global_strategy_column,
)

__version__ = "0.1.0"
