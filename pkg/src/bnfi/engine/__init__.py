from .data import Dataset, SyntheticDatasetCfg, make_dataset
from .forward import accuracy, forward, gaussianity_report
from .train import TrainCfg, TrainingDivergedError, train_toy

__all__ = [
    "Dataset",
    "SyntheticDatasetCfg",
    "make_dataset",
    "forward",
    "accuracy",
    "gaussianity_report",
    "TrainCfg",
    "TrainingDivergedError",
    "train_toy",
]
