"""Edge-rewritable Petri nets: token game, reachability analysis, compression."""
from .analysis import (
    DEFAULT_BUDGET,
    AnalysisReport,
    ReachGraph,
    Verdict,
    Violation,
    analyze,
    bounds,
    explore,
    liveness,
    soundness,
    soundness_via_theorem1,
    theorem_from_graph,
)
from .compress import CompressedGraph, EdgeLabel, compress, reachability_matrix
from .export import export_dot
from .net import (
    Arc,
    Net,
    NetState,
    NotEnabledError,
    PetriError,
    Place,
    Transition,
    UnknownNodeError,
    WorkflowInfo,
    classify_workflow,
    enabled,
    enabled_transitions,
    extend_workflow,
    extended,
    fire,
    fire_sequence,
    initial_state,
    state_from_tokens,
    successors,
    unextended,
    with_arc_weight,
    with_rewrite_limit,
    without_transition,
)
from .parse import NetSyntaxError, bundled_net_path, format_net, load_net, parse_net
