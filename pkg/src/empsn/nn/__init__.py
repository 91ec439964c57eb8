from .autodiff import Tape, Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import BatchNorm, Linear, Mlp2, ParameterStore, fourier_features, gaussian_frequencies
from .optim import adam_step, cosine_lr

__all__ = [
    "BatchNorm", "Linear", "Mlp2", "ParameterStore", "Tape", "Tensor", "adam_step",
    "cosine_lr", "fourier_features", "gaussian_frequencies", "load_checkpoint",
    "save_checkpoint",
]
