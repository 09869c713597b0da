"""Minimal tensor/layer runtime with hand-derived gradients.

Everything runs on float64 numpy arrays, one example at a time; batching
is done by gradient accumulation in the training loop. Analytic backward
passes are validated against central finite differences (see gradcheck).
"""

from .layers import BatchNorm, BiLstm, Conv2d, Dense, Lstm, MaxPool2d, Sigmoid, uniform_init
from .loss import FocalLossParams, focal_loss
from .optim import Adam, DivergenceError, Sgd, fit
from .gradcheck import grad_check
from .checkpoint import CheckpointError, load_checkpoint, restore_params, save_checkpoint

__all__ = [
    "Adam",
    "BatchNorm",
    "BiLstm",
    "CheckpointError",
    "Conv2d",
    "Dense",
    "DivergenceError",
    "FocalLossParams",
    "Lstm",
    "MaxPool2d",
    "Sgd",
    "Sigmoid",
    "fit",
    "focal_loss",
    "grad_check",
    "load_checkpoint",
    "restore_params",
    "save_checkpoint",
    "uniform_init",
]
