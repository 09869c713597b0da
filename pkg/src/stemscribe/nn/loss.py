"""Focal loss for binary grids with heavy class imbalance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLIP_EPS = 1e-7


@dataclass(frozen=True)
class FocalLossParams:
    alpha: float = 0.35
    gamma: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")


def focal_loss(
    y_pred: np.ndarray, y_true: np.ndarray, params: FocalLossParams = FocalLossParams()
) -> tuple[float, np.ndarray]:
    """Mean of -alpha * (1 - p_t)^gamma * log(p_t) and its gradient.

    p_t = y_true * y_pred + (1 - y_true) * (1 - y_pred), natural log.
    Predictions are clipped to [1e-7, 1 - 1e-7] before the log; gradients
    vanish outside the clip range. With gamma = 0 and alpha = 1 this is
    exactly mean binary cross-entropy.
    """
    y_pred = np.asarray(y_pred, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_pred.shape != y_true.shape:
        raise ValueError(f"shape mismatch: {y_pred.shape} vs {y_true.shape}")
    inside = (y_pred > CLIP_EPS) & (y_pred < 1.0 - CLIP_EPS)
    p = np.clip(y_pred, CLIP_EPS, 1.0 - CLIP_EPS)
    pt = y_true * p + (1.0 - y_true) * (1.0 - p)
    one_minus = 1.0 - pt
    log_pt = np.log(pt)
    loss = float(np.mean(-params.alpha * one_minus**params.gamma * log_pt))
    if params.gamma > 0.0:
        dpt = params.alpha * (
            params.gamma * one_minus ** (params.gamma - 1.0) * log_pt
            - one_minus**params.gamma / pt
        )
    else:
        dpt = -params.alpha / pt
    grad = dpt * (2.0 * y_true - 1.0) * inside / y_pred.size
    return loss, grad
