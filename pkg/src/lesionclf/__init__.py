"""Two-task dermoscopic skin-lesion classification on frozen CNN embeddings."""

__version__ = "0.1.0"

from .config import PipelineConfig
from .dataset import Dataset, GroundTruthRecord, load_split, parse_ground_truth
from .embedding import embed, pretrained_backend, stub_backend
from .errors import LesionError
from .evaluate import evaluation_report, predict_probs, roc_auc
from .mlp import AdamHyper, MlpParams
from .preprocess import build_training_pool, resize_bilinear
from .train import TrainConfig, load_checkpoint, save_checkpoint, train_task

__all__ = [
    "AdamHyper",
    "Dataset",
    "GroundTruthRecord",
    "LesionError",
    "MlpParams",
    "PipelineConfig",
    "TrainConfig",
    "__version__",
    "build_training_pool",
    "embed",
    "evaluation_report",
    "load_checkpoint",
    "load_split",
    "parse_ground_truth",
    "predict_probs",
    "pretrained_backend",
    "resize_bilinear",
    "roc_auc",
    "save_checkpoint",
    "stub_backend",
    "train_task",
]
