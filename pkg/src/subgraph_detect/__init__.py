"""Activity detection as maximum-weight connected subgraph search over space-time graphs."""

from .baseline_search import (
    EXHAUSTIVE,
    RankedWindows,
    WindowCandidate,
    best_whole_frame,
    st_cube_sliding,
    st_cube_subvolume,
    t_sliding,
    t_sliding_norm,
)
from .detection_pipeline import (
    Box,
    Detection,
    MultiDetectConfig,
    SearchOptions,
    Searcher,
    detect_multiple,
    detect_single,
    detect_two_stage,
)
from .evaluation import (
    GroundTruthInstance,
    benchmark,
    mean_average_precision,
    spatiotemporal_overlap,
    temporal_overlap,
)
from .model_scoring import QuantizedFeature, TrainingHistogram, WordModel, derive_word_weights, score_feature_set
from .mwcs_solver import (
    Optimality,
    PCSTInstance,
    SubgraphSolution,
    brute_force_oracle,
    solve_exact,
    solve_jump_dp,
    solve_path_dp,
    to_pcst,
)
from .spacetime_graph import (
    GraphConfig,
    Linking,
    NodeStructure,
    SpaceTimeGraph,
    VideoExtent,
    WeightedGraph,
    build_graph,
    graph_from_weights,
    reweight_nodes,
)
from .synthetic_data import ScenarioSpec, drift_scenario, generate, preset

__all__ = [
    "benchmark",
    "best_whole_frame",
    "Box",
    "brute_force_oracle",
    "build_graph",
    "derive_word_weights",
    "detect_multiple",
    "detect_single",
    "detect_two_stage",
    "Detection",
    "drift_scenario",
    "EXHAUSTIVE",
    "generate",
    "graph_from_weights",
    "GraphConfig",
    "GroundTruthInstance",
    "Linking",
    "mean_average_precision",
    "MultiDetectConfig",
    "NodeStructure",
    "Optimality",
    "PCSTInstance",
    "preset",
    "QuantizedFeature",
    "RankedWindows",
    "reweight_nodes",
    "ScenarioSpec",
    "score_feature_set",
    "Searcher",
    "SearchOptions",
    "solve_exact",
    "solve_jump_dp",
    "solve_path_dp",
    "SpaceTimeGraph",
    "spatiotemporal_overlap",
    "st_cube_sliding",
    "st_cube_subvolume",
    "SubgraphSolution",
    "t_sliding",
    "t_sliding_norm",
    "temporal_overlap",
    "to_pcst",
    "TrainingHistogram",
    "VideoExtent",
    "WeightedGraph",
    "WindowCandidate",
    "WordModel",
]
