from enum import Enum, IntEnum


class BlockLabel(IntEnum):
    NROI = 0
    ROI = 1


class SegmenterKind(str, Enum):
    CNN = "cnn"
    THRESHOLD = "threshold"


class LengthMode(str, Enum):
    EXTERNAL = "external"
    HEADER = "header"


class NetworkRole(str, Enum):
    SEGMENTER = "segmenter"
    DETECTOR = "detector"
    GENERIC = "generic"


class LayerKind(IntEnum):
    """Tags written to the weight file; never renumber."""

    CONV2D = 1
    DENSE = 2
    RELU = 3
    SIGMOID = 4
    PIXEL_SOFTMAX = 5
    FLATTEN = 6

    @classmethod
    def from_tag(cls, tag: int) -> "LayerKind":
        try:
            return cls(tag)
        except ValueError:
            raise ValueError(f"Unknown layer tag: {tag!r}")
