from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from blessmark.neural.layers import LAYER_TYPES, Layer
from blessmark.neural.losses import Loss
from blessmark.neural.weights import LayerSpec, NetworkWeights, WeightsMetadata


class Network:
    """An ordered stack of layers trained end to end."""

    def __init__(self, layers: Sequence[Layer]):
        self.layers: List[Layer] = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> List[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters().values()]

    def gradients(self) -> List[np.ndarray]:
        return [g for layer in self.layers for g in layer.gradients().values()]

    def parameter_names(self) -> List[str]:
        return [
            f"{idx}.{type(layer).__name__}.{name}"
            for idx, layer in enumerate(self.layers)
            for name in layer.parameters()
        ]

    def to_weights(self, metadata: Optional[WeightsMetadata] = None) -> NetworkWeights:
        return NetworkWeights(
            layers=[
                LayerSpec(kind=layer.kind, arrays=tuple(a.copy() for a in layer.arrays()))
                for layer in self.layers
            ],
            metadata=metadata or WeightsMetadata(),
        )

    @classmethod
    def from_weights(cls, weights: NetworkWeights) -> "Network":
        layers = []
        for spec in weights.layers:
            layer_type = LAYER_TYPES[spec.kind]
            layers.append(layer_type.from_arrays([a.copy() for a in spec.arrays]))
        return cls(layers)


def backprop(
    network: Network, x: np.ndarray, target: np.ndarray, loss: Loss
) -> Tuple[float, List[np.ndarray]]:
    """Loss value and the gradient of every parameter, in ``parameters()`` order."""
    output = network.forward(x)
    value, grad = loss(output, target)
    network.backward(grad)
    return value, [g.copy() for g in network.gradients()]
