from __future__ import annotations

from typing import List

import numpy as np

from blessmark.errors import TrainingError
from blessmark.logger import logger
from blessmark.neural.losses import Loss
from blessmark.neural.network import Network, backprop
from blessmark.neural.optim import Optimizer

LOG_EVERY = 10


def fit(
    network: Network,
    loss: Loss,
    inputs: np.ndarray,
    targets: np.ndarray,
    optimizer: Optimizer,
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    label: str = "network",
) -> List[float]:
    """Mini-batch training; returns the mean batch loss of every epoch.

    Samples are reshuffled each epoch with ``rng`` and batches are visited in
    a fixed order, so the same seed and data give identical weights.
    """
    if len(inputs) == 0:
        raise TrainingError("No training samples")
    if len(inputs) != len(targets):
        raise TrainingError(f"{len(inputs)} inputs but {len(targets)} targets")

    history: List[float] = []
    n = len(inputs)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            value, grads = backprop(network, inputs[idx], targets[idx], loss)
            optimizer.step(network.parameters(), grads)
            total += value * len(idx)
        history.append(total / n)

        message = f"{label} epoch {epoch}/{epochs} loss={history[-1]:.6f}"
        if epoch % LOG_EVERY == 0 or epoch == epochs:
            logger.info(message)
        else:
            logger.debug(message)
    return history


def predict_batched(network: Network, inputs: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Forward pass in fixed-size chunks to bound memory."""
    outputs = [network.forward(inputs[i : i + chunk]) for i in range(0, len(inputs), chunk)]
    if not outputs:
        return np.empty((0,))
    return np.concatenate(outputs, axis=0)
