"""End-to-end model, MIL training and evaluation."""

from .model import ABLATIONS, Model, ModelConfig, preprocess_features, snippet_scores_t
from .train import (
    DetectionScores,
    bce_loss,
    dataset_loss,
    evaluate,
    forward,
    mil_k,
    mil_video_score,
    score_videos,
    train,
)
from .checkpoint import load_checkpoint, save_checkpoint
