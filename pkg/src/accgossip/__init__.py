"""Accelerated randomized gossip for average consensus.

Pairwise gossip is randomized Kaczmarz on the system A x = 0 whose rows
are scaled edge differences; the accelerated variants add a momentum
register v with parameters from one of two schedules. The package builds
topologies, computes the spectral quantities the schedules need, runs the
protocols deterministically from a seed, and checks the observed decay
against the theoretical rates.
"""

from .gossip import (
    ACCELERATED_METHODS,
    DEFAULT_MOMENTUM_BETA,
    METHOD_ACCGOSSIP_OPT1,
    METHOD_ACCGOSSIP_OPT2,
    METHOD_PAIRWISE,
    METHOD_SHB,
    PROTOCOL_METHODS,
    ActivationLog,
    AgentState,
    GossipNetworkState,
    acc_gossip_round,
    pairwise_gossip_round,
    run_protocol,
    shb_gossip_round,
)
from .harness import (
    BoundReport,
    BoundRow,
    ExperimentConfig,
    LyapunovSeries,
    activation_stream,
    build_graph,
    emit_csv,
    emit_svg,
    lyapunov_series,
    measure_rounds_to_error,
    run_experiment,
    run_experiment_detailed,
    trial_start_vector,
    verify_option2_bound,
    verify_rk_bound,
)
from .kaczmarz import (
    METHOD_ACCRK_OPT1,
    METHOD_ACCRK_OPT2,
    METHOD_RK,
    Option1Schedule,
    Option2Schedule,
    SolverState,
    accrk_step,
    option1_schedule,
    option2_schedule,
    rk_step,
    solve,
)
from .spectral import (
    SpectralSummary,
    TheoreticalRates,
    ZeroMatrixError,
    compute_nu,
    eig_min_plus,
    psd_pinv,
    rates,
    summarize,
    w_pinv,
)
from .topology import (
    GenerationError,
    Graph,
    IncidenceSystem,
    build_system,
    make_cycle,
    make_grid,
    make_rgg,
    read_edge_list,
    write_edge_list,
)
from .trace import AggregateTrace, Trace, aggregate_traces

__version__ = "0.1.0"

__all__ = [
    "ACCELERATED_METHODS",
    "ActivationLog",
    "AgentState",
    "AggregateTrace",
    "BoundReport",
    "BoundRow",
    "DEFAULT_MOMENTUM_BETA",
    "ExperimentConfig",
    "GenerationError",
    "GossipNetworkState",
    "Graph",
    "IncidenceSystem",
    "LyapunovSeries",
    "METHOD_ACCGOSSIP_OPT1",
    "METHOD_ACCGOSSIP_OPT2",
    "METHOD_ACCRK_OPT1",
    "METHOD_ACCRK_OPT2",
    "METHOD_PAIRWISE",
    "METHOD_RK",
    "METHOD_SHB",
    "Option1Schedule",
    "Option2Schedule",
    "PROTOCOL_METHODS",
    "SolverState",
    "SpectralSummary",
    "TheoreticalRates",
    "Trace",
    "ZeroMatrixError",
    "acc_gossip_round",
    "accrk_step",
    "activation_stream",
    "aggregate_traces",
    "build_graph",
    "build_system",
    "compute_nu",
    "eig_min_plus",
    "emit_csv",
    "emit_svg",
    "lyapunov_series",
    "make_cycle",
    "make_grid",
    "make_rgg",
    "measure_rounds_to_error",
    "option1_schedule",
    "option2_schedule",
    "pairwise_gossip_round",
    "psd_pinv",
    "rates",
    "read_edge_list",
    "rk_step",
    "run_experiment",
    "run_experiment_detailed",
    "run_protocol",
    "shb_gossip_round",
    "solve",
    "summarize",
    "trial_start_vector",
    "verify_option2_bound",
    "verify_rk_bound",
    "w_pinv",
    "write_edge_list",
]
