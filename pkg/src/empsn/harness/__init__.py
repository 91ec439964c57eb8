from .data import (DatasetError, GeometricSample, Normalization, denormalize, fit_normalization,
                   load_pointcloud, normalize_targets, save_pointcloud, split_samples)
from .equivariance import EquivarianceReport, check_equivariance
from .nbody import InitialPositionBaseline, NBodyConfig, VelocityBaseline, simulate_nbody
from .training import (ModelPredictor, TrainConfig, TrainingDivergedError, TrainResult, evaluate,
                       load_model, save_model, train)

__all__ = [
    "DatasetError", "EquivarianceReport", "GeometricSample", "InitialPositionBaseline",
    "ModelPredictor", "NBodyConfig", "Normalization", "TrainConfig", "TrainResult",
    "TrainingDivergedError", "VelocityBaseline", "check_equivariance", "denormalize", "evaluate",
    "fit_normalization", "load_model", "load_pointcloud", "normalize_targets", "save_model",
    "save_pointcloud", "simulate_nbody", "split_samples", "train",
]
