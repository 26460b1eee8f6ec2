"""Skeleton-guided learned shortest-path search on weighted graphs."""

from .graph import (
    Graph,
    PathResult,
    DijkstraResult,
    LandmarkIndex,
    build_landmarks,
    dijkstra,
    landmark_query,
    load_edge_list,
    shortest_path,
)
from .skeleton import (
    SkeletonConfig,
    SkeletonGraph,
    SkeletonLabels,
    build_labels,
    build_skeleton_graph,
    default_config_for,
    load_labels,
    save_labels,
)
from .sgnn import (
    SgnnModel,
    TrainingConfig,
    TrainReport,
    extract_features,
    load_model,
    save_model,
    train,
)
from .search import (
    NullModel,
    OracleModel,
    SearchConfig,
    SgnnPredictor,
    compare_searches,
    lsearch,
)
from .partition import Partitioning, partition
from .hierarchy import (
    HierIndex,
    build_hier_index,
    hlsearch,
    hsearch,
    load_index,
    save_index,
)
from .evaluate import (
    EvalConfig,
    MetricsReport,
    compute_metrics,
    generate_queries,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "Graph", "PathResult", "DijkstraResult", "LandmarkIndex",
    "build_landmarks", "dijkstra", "landmark_query", "load_edge_list",
    "shortest_path",
    "SkeletonConfig", "SkeletonGraph", "SkeletonLabels", "build_labels",
    "build_skeleton_graph", "default_config_for", "load_labels", "save_labels",
    "SgnnModel", "TrainingConfig", "TrainReport", "extract_features",
    "load_model", "save_model", "train",
    "NullModel", "OracleModel", "SearchConfig", "SgnnPredictor",
    "compare_searches", "lsearch",
    "Partitioning", "partition",
    "HierIndex", "build_hier_index", "hlsearch", "hsearch", "load_index",
    "save_index",
    "EvalConfig", "MetricsReport", "compute_metrics", "generate_queries",
    "run_experiment",
    "__version__",
]
