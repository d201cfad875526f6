"""Goal-directed scanpath prediction with a parallel transformer decoder."""
__version__ = "0.1.0"

from .data import Dataset, load_dataset, make_zerogaze_split, synthetic_dataset, synthetic_features
from .metrics import cc, edit_distance, evaluate, multimatch, nss, sequence_score
from .model import Model, ModelConfig, predict, predict_autoregressive
from .structs import FeatureBundle, Scanpath

__all__ = [
    "Dataset", "FeatureBundle", "Model", "ModelConfig", "Scanpath", "cc", "edit_distance", "evaluate",
    "load_dataset", "make_zerogaze_split", "multimatch", "nss", "predict", "predict_autoregressive",
    "sequence_score", "synthetic_dataset", "synthetic_features",
]
