"""Distributed XOR storage for random geometric sensor networks."""

from .coding import (
    CodedSlot,
    DegreeDistribution,
    DistKind,
    Flag,
    NodeStore,
    Packet,
    absorb,
    accept_decision,
    apply_update,
    build_distribution,
    check_ledger,
    new_store,
    payload_for,
    sample_degree,
    update_packet,
)
from .decoder import DecodeResult, LinearSystem, QuerySet, Row, build_system, decode_trial, select_query, solve
from .dsa1 import DisseminationReport, JsonlTrace, SimState, init_counter_dsa1, propagate_update, run_dsa1
from .dsa2 import InferenceResult, choose_c_u, external_degree, infer_all, infer_counter, run_dsa2
from .errors import ConfigError, IntegrityError, ScalingError
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    ScalingConfig,
    ScalingReport,
    buffer_stats,
    emit,
    run_sweep,
    verify_scaling,
)
from .netgraph import (
    NetworkConfig,
    NetworkGraph,
    generate_network,
    graph_from_edges,
    graph_from_positions,
    isolated_nodes,
    mean_degree,
    node_density,
)

__version__ = "0.1.0"
