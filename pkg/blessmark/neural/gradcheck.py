from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from blessmark.neural.losses import Loss
from blessmark.neural.network import Network, backprop


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||); 0 when both gradients vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradient_check(
    network: Network,
    x: np.ndarray,
    target: np.ndarray,
    loss: Loss,
    eps: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> Dict[str, float]:
    """Relative error of backprop against central differences, per parameter.

    ``max_entries`` limits how many entries of each parameter are perturbed
    (sampled with a seeded generator) for larger networks.
    """
    _, analytic = backprop(network, x, target, loss)
    rng = np.random.default_rng(seed)
    errors: Dict[str, float] = {}

    for name, param, grad in zip(network.parameter_names(), network.parameters(), analytic):
        flat = param.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        numeric = np.empty(indices.size)
        for n, idx in enumerate(indices):
            original = flat[idx]
            flat[idx] = original + eps
            plus, _ = loss(network.forward(x), target)
            flat[idx] = original - eps
            minus, _ = loss(network.forward(x), target)
            flat[idx] = original
            numeric[n] = (plus - minus) / (2.0 * eps)

        errors[name] = relative_error(grad.reshape(-1)[indices], numeric)
    return errors
