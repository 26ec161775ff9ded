"""Minimal neural-network substrate shared by the segmenter and the detector."""

from blessmark.neural.gradcheck import gradient_check, relative_error
from blessmark.neural.layers import (
    Conv2D,
    Dense,
    Flatten,
    Layer,
    PixelSoftmax,
    ReLU,
    Sigmoid,
    conv_forward,
    dense_forward,
    relu,
    sigmoid,
    softmax_pixelwise,
)
from blessmark.neural.losses import BinaryCrossEntropy, ChannelCrossEntropy, cross_entropy
from blessmark.neural.network import Network, backprop
from blessmark.neural.optim import SGD, Adam, AdamState, adam_step, sgd_step
from blessmark.neural.train import fit, predict_batched
from blessmark.neural.weights import (
    LayerSpec,
    NetworkWeights,
    WeightsMetadata,
    load_weights,
    read_weights_file,
    save_weights,
    write_weights_file,
)

__all__ = [
    "Adam",
    "AdamState",
    "BinaryCrossEntropy",
    "ChannelCrossEntropy",
    "Conv2D",
    "Dense",
    "Flatten",
    "Layer",
    "LayerSpec",
    "Network",
    "NetworkWeights",
    "PixelSoftmax",
    "ReLU",
    "SGD",
    "Sigmoid",
    "WeightsMetadata",
    "adam_step",
    "backprop",
    "conv_forward",
    "cross_entropy",
    "dense_forward",
    "fit",
    "gradient_check",
    "load_weights",
    "predict_batched",
    "read_weights_file",
    "relative_error",
    "relu",
    "save_weights",
    "sgd_step",
    "sigmoid",
    "softmax_pixelwise",
    "write_weights_file",
]
