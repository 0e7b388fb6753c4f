"""decopt: simulator for decentralized stochastic gradient methods.

Agents hold private stochastic objectives, communicate over an undirected
graph through a doubly stochastic mixing matrix, and run one of four
methods: plain gossip SGD, gradient tracking, moving-average tracking, or
normalized moving-average tracking with problem-parameter-free stepsizes.
Runs are deterministic down to the byte given a config and seed.
"""

from ._version import __version__
from .algorithms import (
    ALGORITHMS,
    SwarmState,
    consensus_sq,
    dasagt_step,
    dnasa_step,
    dsgd_step,
    dsgt_step,
    init_state,
    normalize_rows,
    step,
)
from .errors import (
    ConfigError,
    DecoptError,
    InvariantViolation,
    NumericalError,
    TopologyError,
)
from .metrics import MetricsRecord, evaluate, running_average_grad_norm
from .problems import (
    HeterogeneousQuadratic,
    LeastSquares,
    Problem,
    make_least_squares,
    make_problem,
    random_quadratic,
)
from .runner import (
    PRESET_NAMES,
    RunConfig,
    RunResult,
    preset_configs,
    run,
    run_preset,
    validate_config,
)
from .schedules import SCHEDULE_KINDS, Schedule
from .topology import (
    Graph,
    MixingMatrix,
    complete,
    ladder,
    metropolis_mixing,
    mixing_for,
    random_graph,
    ring,
    spectral_rho,
    uniform_mixing,
)

__all__ = [
    "__version__",
    "ALGORITHMS",
    "SCHEDULE_KINDS",
    "PRESET_NAMES",
    "Graph",
    "MixingMatrix",
    "ring",
    "ladder",
    "complete",
    "random_graph",
    "uniform_mixing",
    "metropolis_mixing",
    "mixing_for",
    "spectral_rho",
    "Problem",
    "LeastSquares",
    "HeterogeneousQuadratic",
    "make_least_squares",
    "make_problem",
    "random_quadratic",
    "Schedule",
    "SwarmState",
    "init_state",
    "normalize_rows",
    "consensus_sq",
    "dsgd_step",
    "dsgt_step",
    "dnasa_step",
    "dasagt_step",
    "step",
    "MetricsRecord",
    "evaluate",
    "running_average_grad_norm",
    "RunConfig",
    "RunResult",
    "run",
    "run_preset",
    "preset_configs",
    "validate_config",
    "DecoptError",
    "TopologyError",
    "ConfigError",
    "NumericalError",
    "InvariantViolation",
]
