"""Reward models trained on Likert-scale preferences as ordinal regression."""

from .data import PreferenceData, GenConfig, SchemaError, generate, inject_random_noise, inject_shift_noise, \
    read_jsonl, write_jsonl
from .evaluation import binary_accuracy, error_margins, ordinal_metrics, posthoc_calibrate
from .losses import LossKind, LossSpec, log_prob_level, ordinal_at, ordinal_it, ordinal_nll, prob_level
from .scorer import RewardScorer, ScorerKind
from .thresholds import Mode, ThresholdParams, Thresholds, build_thresholds, predict_level, project_thresholds
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "PreferenceData", "GenConfig", "SchemaError", "generate", "inject_random_noise", "inject_shift_noise",
    "read_jsonl", "write_jsonl", "binary_accuracy", "error_margins", "ordinal_metrics", "posthoc_calibrate",
    "LossKind", "LossSpec", "log_prob_level", "ordinal_at", "ordinal_it", "ordinal_nll", "prob_level",
    "RewardScorer", "ScorerKind", "Mode", "ThresholdParams", "Thresholds", "build_thresholds",
    "predict_level", "project_thresholds", "TrainConfig", "train",
]
