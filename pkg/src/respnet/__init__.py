"""Respiratory-pattern simulation and recurrent classifiers in numpy."""
from .evaluate import compute_metrics, confusion_matrix, evaluate, run_comparison
from .nn.model import ARCHITECTURES, ModelDims, forward, init_params, predict
from .rsm import RespiratoryPattern, default_templates, generate_dataset, generate_waveform
from .signal import DegenerateSignalError, PreprocessConfig, preprocess
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "DegenerateSignalError",
    "ModelDims",
    "PreprocessConfig",
    "RespiratoryPattern",
    "TrainConfig",
    "compute_metrics",
    "confusion_matrix",
    "default_templates",
    "evaluate",
    "forward",
    "generate_dataset",
    "generate_waveform",
    "init_params",
    "predict",
    "preprocess",
    "run_comparison",
    "train",
]
