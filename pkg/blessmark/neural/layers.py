"""Layers with hand-written forward and backward passes.

Tensors are float64 numpy arrays. Convolutional layers take (N, C, H, W)
batches; a single (C, H, W) tensor is accepted by the functional helpers and
gets a batch axis added. Each layer caches what its backward pass needs from
the latest ``forward`` call.
"""

from __future__ import annotations

from typing import Dict, List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from blessmark.enums import LayerKind
from blessmark.errors import ShapeError


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind: LayerKind

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> Dict[str, np.ndarray]:
        return {}

    def gradients(self) -> Dict[str, np.ndarray]:
        return {}

    def arrays(self) -> List[np.ndarray]:
        """Parameter arrays in serialization order."""
        return list(self.parameters().values())

    @classmethod
    def from_arrays(cls, arrays: List[np.ndarray]) -> "Layer":
        if arrays:
            raise ShapeError(f"{cls.__name__} takes no parameters, got {len(arrays)}")
        return cls()


class Conv2D(Layer):
    """Cross-correlation with zero 'same' padding (k = 1 or 3)."""

    kind = LayerKind.CONV2D

    def __init__(self, kernel: np.ndarray, bias: np.ndarray):
        kernel = np.asarray(kernel, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
            raise ShapeError(f"Kernel must be (out, in, k, k), got {kernel.shape}")
        if kernel.shape[2] not in (1, 3):
            raise ShapeError(f"Kernel size must be 1 or 3, got {kernel.shape[2]}")
        if bias.shape != (kernel.shape[0],):
            raise ShapeError(f"Bias must be ({kernel.shape[0]},), got {bias.shape}")
        self.kernel = kernel
        self.bias = bias
        self.d_kernel = np.zeros_like(kernel)
        self.d_bias = np.zeros_like(bias)
        self._windows: Optional[np.ndarray] = None
        self._input_shape: Optional[tuple] = None

    @classmethod
    def glorot(cls, rng: np.random.Generator, in_ch: int, out_ch: int, k: int) -> "Conv2D":
        kernel = glorot_uniform(rng, (out_ch, in_ch, k, k), in_ch * k * k, out_ch * k * k)
        return cls(kernel, np.zeros(out_ch))

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def k(self) -> int:
        return self.kernel.shape[2]

    @property
    def pad(self) -> int:
        return self.k // 2

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"Conv expects (N, {self.in_channels}, H, W) input, got {x.shape}"
            )
        p = self.pad
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = sliding_window_view(padded, (self.k, self.k), axis=(2, 3))
        self._windows = windows
        self._input_shape = x.shape
        out = np.tensordot(windows, self.kernel, axes=([1, 4, 5], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2) + self.bias[np.newaxis, :, np.newaxis, np.newaxis]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.d_kernel = np.tensordot(grad, self._windows, axes=([0, 2, 3], [0, 2, 3]))
        self.d_bias = grad.sum(axis=(0, 2, 3))
        p = self.pad
        padded = np.pad(grad, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = sliding_window_view(padded, (self.k, self.k), axis=(2, 3))
        flipped = self.kernel[:, :, ::-1, ::-1]
        dx = np.tensordot(windows, flipped, axes=([1, 4, 5], [0, 2, 3]))
        return dx.transpose(0, 3, 1, 2)

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"kernel": self.kernel, "bias": self.bias}

    def gradients(self) -> Dict[str, np.ndarray]:
        return {"kernel": self.d_kernel, "bias": self.d_bias}

    @classmethod
    def from_arrays(cls, arrays: List[np.ndarray]) -> "Conv2D":
        if len(arrays) != 2:
            raise ShapeError(f"Conv2D needs kernel and bias, got {len(arrays)} arrays")
        return cls(arrays[0], arrays[1])


class Dense(Layer):
    """y = W x + b on (N, in) batches."""

    kind = LayerKind.DENSE

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ShapeError(
                f"Dense needs weight (out, in) and bias (out,), got {weight.shape}, {bias.shape}"
            )
        self.weight = weight
        self.bias = bias
        self.d_weight = np.zeros_like(weight)
        self.d_bias = np.zeros_like(bias)
        self._x: Optional[np.ndarray] = None

    @classmethod
    def glorot(cls, rng: np.random.Generator, n_in: int, n_out: int) -> "Dense":
        return cls(glorot_uniform(rng, (n_out, n_in), n_in, n_out), np.zeros(n_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weight.shape[1]:
            raise ShapeError(
                f"Dense expects (N, {self.weight.shape[1]}) input, got {x.shape}"
            )
        self._x = x
        return x @ self.weight.T + self.bias

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.d_weight = grad.T @ self._x
        self.d_bias = grad.sum(axis=0)
        return grad @ self.weight

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self) -> Dict[str, np.ndarray]:
        return {"weight": self.d_weight, "bias": self.d_bias}

    @classmethod
    def from_arrays(cls, arrays: List[np.ndarray]) -> "Dense":
        if len(arrays) != 2:
            raise ShapeError(f"Dense needs weight and bias, got {len(arrays)} arrays")
        return cls(arrays[0], arrays[1])


class ReLU(Layer):
    kind = LayerKind.RELU

    def __init__(self):
        self._mask: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad, 0.0)


class Sigmoid(Layer):
    kind = LayerKind.SIGMOID

    def __init__(self):
        self._out: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._out = special.expit(x)
        return self._out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        s = self._out
        return grad * s * (1.0 - s)


class PixelSoftmax(Layer):
    """Two-way softmax across the channel axis at every pixel."""

    kind = LayerKind.PIXEL_SOFTMAX

    def __init__(self):
        self._out: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != 2:
            raise ShapeError(f"Pixel softmax needs 2 channels, got shape {x.shape}")
        self._out = special.softmax(x, axis=1)
        return self._out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        s = self._out
        return s * (grad - (grad * s).sum(axis=1, keepdims=True))


class Flatten(Layer):
    kind = LayerKind.FLATTEN

    def __init__(self):
        self._shape: Optional[tuple] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self._shape)


LAYER_TYPES = {
    LayerKind.CONV2D: Conv2D,
    LayerKind.DENSE: Dense,
    LayerKind.RELU: ReLU,
    LayerKind.SIGMOID: Sigmoid,
    LayerKind.PIXEL_SOFTMAX: PixelSoftmax,
    LayerKind.FLATTEN: Flatten,
}


def _batched(x: np.ndarray, single_ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == single_ndim:
        return x[np.newaxis], True
    return x, False


def conv_forward(x: np.ndarray, layer: Conv2D) -> np.ndarray:
    """Apply ``layer`` to a (C, H, W) tensor or an (N, C, H, W) batch."""
    batch, single = _batched(x, 3)
    out = layer.forward(batch)
    return out[0] if single else out


def dense_forward(x: np.ndarray, layer: Dense) -> np.ndarray:
    """Apply ``layer`` to a flat (n,) tensor or an (N, n) batch."""
    batch, single = _batched(x, 1)
    out = layer.forward(batch)
    return out[0] if single else out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return special.expit(np.asarray(x, dtype=np.float64))


def softmax_pixelwise(x: np.ndarray) -> np.ndarray:
    """Per-pixel softmax of a (2, H, W) tensor or (N, 2, H, W) batch."""
    batch, single = _batched(x, 3)
    out = PixelSoftmax().forward(batch)
    return out[0] if single else out
