"""Motor-imagery EEG classification: feature extraction, hybrid feature selection and an MLP."""

from .data import ALL_TASKS, EpochSet, FeatureDescriptor, FeatureMatrix, TaskId, TaskSpec
from .evaluation import EvalConfig, LosoResult, prepare_task, run_task
from .features import FeatureConfig, extract_features
from .selection import MiConfig, SffsConfig, hybrid_select
from .synthetic import SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ALL_TASKS", "EpochSet", "EvalConfig", "FeatureConfig", "FeatureDescriptor", "FeatureMatrix",
    "LosoResult", "MiConfig", "SffsConfig", "SyntheticSpec", "TaskId", "TaskSpec",
    "extract_features", "generate", "hybrid_select", "prepare_task", "run_task",
]
