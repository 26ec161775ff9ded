from __future__ import annotations

from typing import Protocol, Tuple

import numpy as np

from blessmark.errors import ShapeError

CLAMP = 1e-12


def cross_entropy(prediction: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. ``prediction``.

    Predictions are clamped to [1e-12, 1 - 1e-12] so saturated outputs give a
    finite loss.
    """
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"Prediction {p.shape} and target {t.shape} differ in shape")
    if p.size == 0:
        raise ShapeError("Cross-entropy over an empty prediction")
    pc = np.clip(p, CLAMP, 1.0 - CLAMP)
    loss = -np.mean(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc))
    grad = (pc - t) / (pc * (1.0 - pc)) / p.size
    return float(loss), grad


class Loss(Protocol):
    def __call__(self, output: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]: ...


class BinaryCrossEntropy:
    """Cross-entropy on an output with the same shape as the target."""

    def __call__(self, output: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
        return cross_entropy(output, np.reshape(target, output.shape))


class ChannelCrossEntropy:
    """Cross-entropy on one channel of an (N, C, H, W) probability map.

    Used for the two-class pixel softmax: the loss on the ROI probability
    equals the categorical loss over both classes.
    """

    def __init__(self, channel: int = 1):
        self.channel = channel

    def __call__(self, output: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
        loss, grad_channel = cross_entropy(output[:, self.channel], target)
        grad = np.zeros_like(output)
        grad[:, self.channel] = grad_channel
        return loss, grad
