import numpy as np
import pytest

from blessmark.models.image import Image
from blessmark.models.params import CnnSegmenterConfig, CodecConfig, EmbedParams
from blessmark.neural import Conv2D, Network, PixelSoftmax, ReLU
from blessmark.segment import CnnSegmenter, ThresholdSegmenter
from blessmark.synthetic import synthetic_image

# Narrow enough for finite differences and quick training, same depth as the default.
TINY_CHANNELS = [2] * 10


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def threshold_segmenter():
    return ThresholdSegmenter(128)


@pytest.fixture
def codec_config():
    return CodecConfig(params=EmbedParams(m=6))


@pytest.fixture
def tiny_cnn_config():
    return CnnSegmenterConfig(channels=TINY_CHANNELS)


@pytest.fixture(scope="session")
def gray_sample():
    return synthetic_image(3, 96, 96)


@pytest.fixture(scope="session")
def color_sample():
    return synthetic_image(4, 64, 64, color=True)


def constant_image(value: int, height: int, width: int, channels: int = 1) -> Image:
    return Image(np.full((height, width, channels), value, dtype=np.uint8))


def threshold_cnn(m: int) -> CnnSegmenter:
    """A hand-set CNN that labels a pixel ROI iff its sample is >= 128.

    Channel 0 carries relu(x - 127.5/255) through ten identity convs; the
    final 1x1 conv compares it against a constant NROI logit.
    """
    layers = []
    in_ch = 1
    for n, out_ch in enumerate(TINY_CHANNELS):
        kernel = np.zeros((out_ch, in_ch, 3, 3))
        kernel[0, 0, 1, 1] = 1.0
        bias = np.zeros(out_ch)
        if n == 0:
            bias[0] = -127.5 / 255.0
        layers += [Conv2D(kernel, bias), ReLU()]
        in_ch = out_ch
    head = np.zeros((2, in_ch, 1, 1))
    head[1, 0, 0, 0] = 1000.0
    layers += [Conv2D(head, np.array([1.0, 0.0])), PixelSoftmax()]
    return CnnSegmenter(Network(layers), m)
