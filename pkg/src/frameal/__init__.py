"""frameal: batch active learning for video classification with frame-level queries."""

from .classifier import Model, TrainConfig, entropy, evaluate_accuracy, predict_proba, train
from .dataset import (
    DatasetError,
    DatasetSplits,
    Manifest,
    VideoSample,
    generate_synthetic,
    load_dataset,
    split_dataset,
    write_dataset,
)
from .frame_select import FrameSubset, kcenter_greedy, kmeans_frames, random_frames
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    ManifestSource,
    SyntheticSource,
    run_experiment,
    summarize_oracle_stats,
)
from .oracle import OracleConfig, OracleVerdict, calibrate_threshold, query_oracle
from .video_select import (
    DiversityMatrix,
    ObjectiveMatrix,
    PowerIterationResult,
    SelectionVector,
    diversity_from_features,
    diversity_matrix,
    entropy_vector,
    objective_matrix,
    prune_diversity,
    random_project,
    select_videos_entropy,
    select_videos_random,
    shift_to_psd,
    truncated_power_select,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetError",
    "DatasetSplits",
    "DiversityMatrix",
    "ExperimentConfig",
    "ExperimentReport",
    "FrameSubset",
    "Manifest",
    "ManifestSource",
    "Model",
    "ObjectiveMatrix",
    "OracleConfig",
    "OracleVerdict",
    "PowerIterationResult",
    "SelectionVector",
    "SyntheticSource",
    "TrainConfig",
    "VideoSample",
    "calibrate_threshold",
    "diversity_from_features",
    "diversity_matrix",
    "entropy",
    "entropy_vector",
    "evaluate_accuracy",
    "generate_synthetic",
    "kcenter_greedy",
    "kmeans_frames",
    "load_dataset",
    "objective_matrix",
    "predict_proba",
    "prune_diversity",
    "query_oracle",
    "random_frames",
    "random_project",
    "run_experiment",
    "select_videos_entropy",
    "select_videos_random",
    "shift_to_psd",
    "split_dataset",
    "summarize_oracle_stats",
    "train",
    "truncated_power_select",
    "write_dataset",
]
