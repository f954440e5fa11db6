from .ablate import ablate
from .checkpoint import load_checkpoint, model_from_checkpoint, save_checkpoint
from .config import EvalConfig, PredictConfig, SyntheticConfig, TrainConfig
from .evaluate import evaluate
from .render import parse_label_png, render
from .train import train

__all__ = [
    "EvalConfig",
    "PredictConfig",
    "SyntheticConfig",
    "TrainConfig",
    "ablate",
    "evaluate",
    "load_checkpoint",
    "model_from_checkpoint",
    "parse_label_png",
    "render",
    "save_checkpoint",
    "train",
]
