"""ROI segmentation.

Every segmenter labels one m x m grayscale block at a time and never looks
past the block's own samples. The embedder relies on that: blocks it leaves
alone keep their label, so the re-segmentation loop can only shrink the NROI
set and the receiver sees the same map as the sender.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from blessmark.enums import BlockLabel, NetworkRole, SegmenterKind
from blessmark.errors import BlockGridError, ConfigError, MetricError, ModelMismatchError, TrainingError
from blessmark.logger import logger
from blessmark.metrics import ConfusionCounts, confusion, dice
from blessmark.models.config import RunConfig
from blessmark.models.image import Image
from blessmark.models.params import CnnSegmenterConfig
from blessmark.neural import (
    SGD,
    ChannelCrossEntropy,
    Conv2D,
    Network,
    NetworkWeights,
    PixelSoftmax,
    ReLU,
    WeightsMetadata,
    fit,
    predict_batched,
    read_weights_file,
)
from blessmark.pixels import block_grid, tile_blocks, to_grayscale

# Blocks per forward pass. Each block is its own batch entry, so its labels
# do not depend on what else shares the chunk.
INFERENCE_CHUNK = 256
CNN_CONV_LAYERS = 11


class Segmenter:
    """Block-local ROI labelling: (N, m, m) uint8 blocks -> (N, m, m) bool."""

    kind: SegmenterKind
    block_size: Optional[int] = None

    def segment_blocks(self, blocks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_blocks(self, blocks: np.ndarray) -> np.ndarray:
        blocks = np.asarray(blocks)
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise BlockGridError(f"Expected (N, m, m) blocks, got {blocks.shape}")
        if self.block_size is not None and blocks.shape[1] != self.block_size:
            raise BlockGridError(
                f"{type(self).__name__} works on {self.block_size}x{self.block_size} "
                f"blocks, got {blocks.shape[1]}x{blocks.shape[2]}"
            )
        return blocks


class ThresholdSegmenter(Segmenter):
    """Pixel is ROI iff its grayscale sample >= threshold."""

    kind = SegmenterKind.THRESHOLD

    def __init__(self, threshold: int = 128):
        self.threshold = threshold

    def segment_blocks(self, blocks: np.ndarray) -> np.ndarray:
        blocks = self._check_blocks(blocks)
        return blocks >= self.threshold

    def __repr__(self) -> str:
        return f"ThresholdSegmenter(threshold={self.threshold})"


def build_segmentation_network(config: CnnSegmenterConfig, rng: np.random.Generator) -> Network:
    """10 x (3x3 conv + ReLU), 1x1 conv to the two classes, pixel softmax."""
    layers = []
    in_ch = 1
    for out_ch in config.channels:
        layers += [Conv2D.glorot(rng, in_ch, out_ch, 3), ReLU()]
        in_ch = out_ch
    layers += [Conv2D.glorot(rng, in_ch, 2, 1), PixelSoftmax()]
    return Network(layers)


class CnnSegmenter(Segmenter):
    kind = SegmenterKind.CNN

    def __init__(self, network: Network, block_size: int, threshold: float = 0.5):
        convs = [layer for layer in network.layers if isinstance(layer, Conv2D)]
        if len(convs) != CNN_CONV_LAYERS or not isinstance(network.layers[-1], PixelSoftmax):
            raise ModelMismatchError(
                f"Segmentation network must have {CNN_CONV_LAYERS} conv layers and end "
                f"in a pixel softmax, got {len(convs)} conv layers"
            )
        if convs[0].in_channels != 1:
            raise ModelMismatchError("Segmentation network must take one grayscale channel")
        self.network = network
        self.block_size = block_size
        self.threshold = threshold

    @classmethod
    def build(cls, config: CnnSegmenterConfig, block_size: int, seed: int = 0) -> "CnnSegmenter":
        rng = np.random.default_rng(seed)
        return cls(build_segmentation_network(config, rng), block_size, config.threshold)

    @classmethod
    def from_weights(cls, weights: NetworkWeights, block_size: Optional[int] = None) -> "CnnSegmenter":
        meta = weights.metadata
        if meta.role not in (NetworkRole.SEGMENTER, NetworkRole.GENERIC):
            raise ModelMismatchError(f"Weights are for a {meta.role.value}, not a segmenter")
        if block_size is not None and meta.block_size is not None and meta.block_size != block_size:
            raise ModelMismatchError(
                f"Segmenter weights were trained on {meta.block_size}x{meta.block_size} "
                f"blocks but the run uses {block_size}x{block_size}"
            )
        size = block_size or meta.block_size
        if size is None:
            raise ModelMismatchError("Segmenter weights do not record a block size")
        return cls(Network.from_weights(weights), size)

    def probabilities(self, blocks: np.ndarray) -> np.ndarray:
        """ROI-class probability per pixel, (N, m, m)."""
        blocks = self._check_blocks(blocks)
        x = blocks.astype(np.float64)[:, np.newaxis] / 255.0
        return predict_batched(self.network, x, INFERENCE_CHUNK)[:, BlockLabel.ROI]

    def segment_blocks(self, blocks: np.ndarray) -> np.ndarray:
        if len(blocks) == 0:
            return np.zeros(np.shape(blocks), dtype=bool)
        return self.probabilities(blocks) >= self.threshold

    def to_weights(self, metadata: Optional[WeightsMetadata] = None) -> NetworkWeights:
        return self.network.to_weights(metadata)

    def __repr__(self) -> str:
        return f"CnnSegmenter(block_size={self.block_size})"


@dataclass(frozen=True, eq=False)
class RoiBlockMap:
    """Per-block labels of one image, True = ROI. Shared by every channel."""

    roi: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.roi, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise BlockGridError(f"Block map must be 2-D, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "roi", arr)

    @classmethod
    def from_labels(cls, labels: Sequence[Sequence[BlockLabel]]) -> "RoiBlockMap":
        return cls(np.array([[lab == BlockLabel.ROI for lab in row] for row in labels], dtype=bool))

    @property
    def rows(self) -> int:
        return self.roi.shape[0]

    @property
    def cols(self) -> int:
        return self.roi.shape[1]

    @property
    def roi_count(self) -> int:
        return int(self.roi.sum())

    @property
    def nroi_count(self) -> int:
        return self.roi.size - self.roi_count

    def label(self, row: int, col: int) -> BlockLabel:
        return BlockLabel.ROI if self.roi[row, col] else BlockLabel.NROI

    def nroi_positions(self) -> List[Tuple[int, int]]:
        """(row, col) of every NROI block in raster order."""
        return [(int(r), int(c)) for r, c in np.argwhere(~self.roi)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoiBlockMap):
            return NotImplemented
        return np.array_equal(self.roi, other.roi)

    def __repr__(self) -> str:
        return f"RoiBlockMap({self.rows}x{self.cols}, roi={self.roi_count})"


def segment_block(segmenter: Segmenter, block: np.ndarray) -> np.ndarray:
    """Pixel ROI map of one m x m grayscale block."""
    block = np.asarray(block)
    if block.ndim != 2:
        raise BlockGridError(f"Expected an m x m block, got {block.shape}")
    return segmenter.segment_blocks(block[np.newaxis])[0]


def _pixel_labels(image: Image, segmenter: Segmenter, m: int) -> np.ndarray:
    """(rows, cols, m, m) pixel labels of every grid block of the gray image."""
    grid = block_grid(image, m)
    gray = to_grayscale(image).plane(0)
    tiles = tile_blocks(gray, m).reshape(-1, m, m)
    return segmenter.segment_blocks(tiles).reshape(grid.rows, grid.cols, m, m)


def roi_block_map(image: Image, segmenter: Segmenter, m: int) -> RoiBlockMap:
    """A block is NROI only if every one of its pixels is NROI."""
    labels = _pixel_labels(image, segmenter, m)
    return RoiBlockMap(labels.any(axis=(2, 3)))


def segment_image(image: Image, segmenter: Segmenter, m: int) -> np.ndarray:
    """Pixel ROI map over the grid area, (rows*m, cols*m) bool."""
    labels = _pixel_labels(image, segmenter, m)
    rows, cols = labels.shape[:2]
    return labels.swapaxes(1, 2).reshape(rows * m, cols * m)


def load_segmenter(config: RunConfig) -> Segmenter:
    if config.segmenter == SegmenterKind.THRESHOLD:
        return ThresholdSegmenter(config.roi_threshold)
    if config.seg_weights is None:
        raise ConfigError("The cnn segmenter needs seg_weights (--seg-weights)")
    weights = read_weights_file(config.seg_weights)
    logger.info(f"Loaded segmenter weights from {config.seg_weights}")
    return CnnSegmenter.from_weights(weights, config.block_size)


# --------------------------------------------------------------------- training


@dataclass
class SegmenterTrainingResult:
    weights: NetworkWeights
    dice: Optional[float]
    history: List[float] = field(default_factory=list)


def _grid_area(mask: np.ndarray, m: int) -> np.ndarray:
    rows, cols = mask.shape[0] // m, mask.shape[1] // m
    return mask[: rows * m, : cols * m]


def _training_blocks(pairs: Sequence[Tuple[Image, np.ndarray]], m: int) -> Tuple[np.ndarray, np.ndarray]:
    inputs, targets = [], []
    for n, (image, mask) in enumerate(pairs):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (image.height, image.width):
            raise TrainingError(
                f"Mask {n} is {mask.shape[1]}x{mask.shape[0]} but its image is "
                f"{image.width}x{image.height}"
            )
        gray = to_grayscale(image).plane(0)
        inputs.append(tile_blocks(gray, m).reshape(-1, m, m))
        targets.append(tile_blocks(mask, m).reshape(-1, m, m))
    x = np.concatenate(inputs).astype(np.float64)[:, np.newaxis] / 255.0
    t = np.concatenate(targets).astype(np.float64)
    return x, t


def evaluate_segmenter(
    segmenter: Segmenter, pairs: Sequence[Tuple[Image, np.ndarray]], m: int
) -> ConfusionCounts:
    """Pixel confusion counts over the grid area of every pair."""
    total = ConfusionCounts()
    for image, mask in pairs:
        predicted = segment_image(image, segmenter, m)
        total = total + confusion(predicted, _grid_area(np.asarray(mask, dtype=bool), m))
    return total


def train_segmenter(
    train_pairs: Sequence[Tuple[Image, np.ndarray]],
    eval_pairs: Sequence[Tuple[Image, np.ndarray]],
    m: int,
    epochs: int = 150,
    learning_rate: float = 0.01,
    seed: int = 0,
    config: CnnSegmenterConfig = CnnSegmenterConfig(),
    batch_size: int = 32,
) -> SegmenterTrainingResult:
    """SGD + cross-entropy on every grid block of the training images.

    Returns the weights and the pixel Dice on ``eval_pairs`` (None when the
    evaluation set is empty or has no ROI at all).
    """
    if not train_pairs:
        raise TrainingError("No training images")
    x, t = _training_blocks(train_pairs, m)
    if len(x) == 0:
        raise TrainingError(f"Training images are smaller than one {m}x{m} block")
    logger.info(f"Training segmenter on {len(x)} blocks of {m}x{m} for {epochs} epochs")

    rng = np.random.default_rng(seed)
    network = build_segmentation_network(config, rng)
    history = fit(
        network,
        ChannelCrossEntropy(BlockLabel.ROI),
        x,
        t,
        SGD(learning_rate),
        epochs,
        batch_size,
        rng,
        label="segmenter",
    )

    segmenter = CnnSegmenter(network, m, config.threshold)
    score: Optional[float] = None
    if eval_pairs:
        try:
            score = dice(evaluate_segmenter(segmenter, eval_pairs, m))
            logger.info(f"Segmenter held-out Dice {score:.4f}")
        except MetricError as exc:
            logger.warning(f"Held-out Dice undefined: {exc}")

    metadata = WeightsMetadata(
        role=NetworkRole.SEGMENTER,
        block_size=m,
        epochs=epochs,
        seed=seed,
        learning_rate=learning_rate,
        score=score,
        channels=list(config.channels),
    )
    return SegmenterTrainingResult(network.to_weights(metadata), score, history)
