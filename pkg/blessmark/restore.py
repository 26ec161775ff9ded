"""Distortion detection and recovery of watermarked NROI blocks.

A dense classifier learns to tell blocks as they come out of the camera from
blocks whose coefficient pair has been forced. It is trained on NROI blocks
and their bit-inverted twins, which look exactly like embedded blocks. At
recovery time every payload slot the detector flags gets its embedding step
reversed with the extracted bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence

import numpy as np

from blessmark.codec import EmbedResult, extract, frame_bits, payload_slots
from blessmark.enums import NetworkRole
from blessmark.errors import CapacityError, ConfigError, ModelMismatchError, TrainingError
from blessmark.logger import logger
from blessmark.metrics import accuracy, confusion
from blessmark.models.config import RunConfig
from blessmark.models.image import BlockRef, Image
from blessmark.models.params import CodecConfig, DetectorConfig, EmbedParams
from blessmark.models.watermark import Watermark
from blessmark.neural import (
    Adam,
    BinaryCrossEntropy,
    Dense,
    Flatten,
    Network,
    NetworkWeights,
    ReLU,
    Sigmoid,
    WeightsMetadata,
    fit,
    predict_batched,
    read_weights_file,
)
from blessmark.pixels import extract_block, write_blocks
from blessmark.segment import Segmenter, roi_block_map
from blessmark.transform import dct2, embed_samples, idct2, quantize_block, read_bit, reverse_bit

CLEAN = 0
DISTORTED = 1


def intrinsic_bit(samples: np.ndarray, params: EmbedParams) -> int:
    """The bit a block encodes before anyone embeds into it."""
    return read_bit(dct2(samples), params)


def invert_block(samples: np.ndarray, params: EmbedParams, guard_retries: int = 64) -> np.ndarray:
    """Embed the opposite of the intrinsic bit, exactly as the codec would."""
    flipped = 1 - intrinsic_bit(samples, params)
    return embed_samples(samples, params, flipped, guard_retries).samples


@dataclass(frozen=True)
class LabeledBlock:
    samples: np.ndarray
    label: int
    # Index of the cover block a clean/inverted twin pair was cut from.
    source: int = -1


def build_detector_training_set(
    covers: Iterable[Image], segmenter: Segmenter, config: CodecConfig
) -> List[LabeledBlock]:
    """Every NROI block of every channel, clean and inverted."""
    out: List[LabeledBlock] = []
    for image in covers:
        block_map = roi_block_map(image, segmenter, config.m)
        for ref in payload_slots(block_map, image.channels):
            block = extract_block(image, ref, config.m)
            source = len(out) // 2
            out.append(LabeledBlock(block, CLEAN, source))
            out.append(LabeledBlock(invert_block(block, config.params, config.guard_retries), DISTORTED, source))
    if not out:
        raise TrainingError("No NROI blocks found in the detector training images")
    return out


def build_detector_network(config: DetectorConfig, rng: np.random.Generator) -> Network:
    n = config.hidden
    return Network(
        [
            Flatten(),
            Dense.glorot(rng, n, n),
            ReLU(),
            Dense.glorot(rng, n, n),
            ReLU(),
            Dense.glorot(rng, n, 1),
            Sigmoid(),
        ]
    )


def _stack(blocks: Sequence[LabeledBlock], m: int) -> tuple[np.ndarray, np.ndarray]:
    for b in blocks:
        if b.samples.shape != (m, m):
            raise TrainingError(f"Detector block is {b.samples.shape}, expected {m}x{m}")
    x = np.stack([b.samples for b in blocks]).astype(np.float64) / 255.0
    t = np.array([[b.label] for b in blocks], dtype=np.float64)
    return x, t


class DistortionDetector:
    """Decides per payload slot whether the block carries an embedding change."""

    def detect(self, blocks: np.ndarray, refs: Sequence[BlockRef]) -> np.ndarray:
        raise NotImplementedError


class DenseDetector(DistortionDetector):
    def __init__(self, network: Network, block_size: int, threshold: float = 0.5):
        self.network = network
        self.block_size = block_size
        self.threshold = threshold

    @classmethod
    def build(cls, config: DetectorConfig, seed: int = 0) -> "DenseDetector":
        return cls(build_detector_network(config, np.random.default_rng(seed)), config.m, config.threshold)

    @classmethod
    def from_weights(cls, weights: NetworkWeights, block_size: Optional[int] = None) -> "DenseDetector":
        meta = weights.metadata
        if meta.role not in (NetworkRole.DETECTOR, NetworkRole.GENERIC):
            raise ModelMismatchError(f"Weights are for a {meta.role.value}, not a detector")
        network = Network.from_weights(weights)
        dense = [layer for layer in network.layers if isinstance(layer, Dense)]
        if not dense:
            raise ModelMismatchError("Detector weights contain no dense layers")
        n_in = dense[0].weight.shape[1]
        size = int(round(np.sqrt(n_in)))
        if size * size != n_in:
            raise ModelMismatchError(f"Detector input of {n_in} values is not a square block")
        if block_size is not None and size != block_size:
            raise ModelMismatchError(
                f"Detector weights expect {size}x{size} blocks but the run uses "
                f"{block_size}x{block_size}"
            )
        return cls(network, size)

    def probabilities(self, blocks: np.ndarray) -> np.ndarray:
        x = np.asarray(blocks, dtype=np.float64) / 255.0
        if len(x) == 0:
            return np.empty(0)
        return predict_batched(self.network, x)[:, 0]

    def detect(self, blocks: np.ndarray, refs: Sequence[BlockRef] = ()) -> np.ndarray:
        return self.probabilities(blocks) >= self.threshold

    def to_weights(self, metadata: Optional[WeightsMetadata] = None) -> NetworkWeights:
        return self.network.to_weights(metadata)


class OracleDetector(DistortionDetector):
    """Ground-truth detector for tests and upper-bound experiments.

    Flags a slot only if the embedder modified it and the block still holds
    exactly the watermarked samples, so recovered blocks read as clean.
    """

    def __init__(self, watermarked: Image, modified: Iterable[BlockRef], m: int):
        self.watermarked = watermarked
        self.modified: FrozenSet[BlockRef] = frozenset(BlockRef(*ref) for ref in modified)
        self.m = m

    @classmethod
    def from_embed(cls, result: EmbedResult) -> "OracleDetector":
        return cls(result.image, result.report.modified_refs(), result.report.block_size)

    def detect(self, blocks: np.ndarray, refs: Sequence[BlockRef]) -> np.ndarray:
        flags = np.zeros(len(refs), dtype=bool)
        for n, ref in enumerate(refs):
            if ref in self.modified:
                flags[n] = np.array_equal(blocks[n], extract_block(self.watermarked, ref, self.m))
        return flags


def load_detector(config: RunConfig) -> DenseDetector:
    if config.det_weights is None:
        raise ConfigError("Recovery needs detector weights (--det-weights)")
    weights = read_weights_file(config.det_weights)
    meta = weights.metadata
    if meta.coefficient_index is not None and meta.coefficient_index != config.embed_params.i:
        logger.warning(
            f"Detector was trained for coefficient index {meta.coefficient_index}, "
            f"run uses {config.embed_params.i}"
        )
    if meta.th is not None and meta.th != config.threshold:
        logger.warning(f"Detector was trained with th={meta.th}, run uses th={config.threshold}")
    logger.info(f"Loaded detector weights from {config.det_weights}")
    return DenseDetector.from_weights(weights, config.block_size)


@dataclass
class DetectorTrainingResult:
    weights: NetworkWeights
    accuracy: Optional[float]
    history: List[float] = field(default_factory=list)


def _split(blocks: Sequence[LabeledBlock], seed: int) -> tuple[list, list]:
    """Seeded half split by source block, so twins never straddle the split."""
    groups = [b.source if b.source >= 0 else -(n + 1) for n, b in enumerate(blocks)]
    keys = sorted(set(groups))
    order = np.random.default_rng(seed).permutation(len(keys))
    train_keys = {keys[k] for k in order[: len(keys) - len(keys) // 2]}
    train = [b for b, g in zip(blocks, groups) if g in train_keys]
    held_out = [b for b, g in zip(blocks, groups) if g not in train_keys]
    return train, held_out


def train_detector(
    blocks: Sequence[LabeledBlock],
    config: DetectorConfig,
    seed: int = 0,
    eval_blocks: Optional[Sequence[LabeledBlock]] = None,
    params: Optional[EmbedParams] = None,
) -> DetectorTrainingResult:
    """Adam + cross-entropy; accuracy on ``eval_blocks`` or a seeded half split."""
    if eval_blocks is None:
        blocks, eval_blocks = _split(blocks, seed)
    labels = {b.label for b in blocks}
    if labels != {CLEAN, DISTORTED}:
        raise TrainingError("Detector training needs both clean and distorted blocks")

    x, t = _stack(blocks, config.m)
    logger.info(f"Training detector on {len(x)} blocks of {config.m}x{config.m} for {config.epochs} epochs")
    rng = np.random.default_rng(seed)
    network = build_detector_network(config, rng)
    optimizer = Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    history = fit(
        network, BinaryCrossEntropy(), x, t, optimizer, config.epochs, config.batch_size, rng, label="detector"
    )

    detector = DenseDetector(network, config.m, config.threshold)
    score: Optional[float] = None
    if eval_blocks:
        ex, et = _stack(eval_blocks, config.m)
        score = accuracy(confusion(detector.detect(ex), et[:, 0] == DISTORTED))
        logger.info(f"Detector held-out accuracy {score:.4f}")

    metadata = WeightsMetadata(
        role=NetworkRole.DETECTOR,
        block_size=config.m,
        epochs=config.epochs,
        seed=seed,
        learning_rate=config.learning_rate,
        score=score,
        coefficient_index=params.i if params else None,
        th=params.th if params else None,
    )
    return DetectorTrainingResult(network.to_weights(metadata), score, history)


def recover(
    watermarked: Image,
    watermark: Optional[Watermark],
    segmenter: Segmenter,
    detector: DistortionDetector,
    config: CodecConfig,
    length: Optional[int] = None,
) -> Image:
    """Reverse the embedding on every flagged block among the used slots.

    Without a watermark the payload is extracted first, so recovery needs
    nothing beyond the watermarked image and the shared models.
    """
    m = config.m
    if watermark is None:
        watermark = extract(watermarked, segmenter, config, length)
    framed = frame_bits(watermark, config.length_mode)

    block_map = roi_block_map(watermarked, segmenter, m)
    slots = payload_slots(block_map, watermarked.channels)
    if len(framed) > len(slots):
        raise CapacityError(
            f"Watermark of {len(framed)} framed bits exceeds the {len(slots)} payload slots",
            required=len(framed),
            available=len(slots),
        )

    candidates = slots[: len(framed)]
    if not candidates:
        return watermarked
    blocks = np.stack([extract_block(watermarked, ref, m) for ref in candidates])
    flags = detector.detect(blocks, candidates)

    refs, restored = [], []
    for ref, block, bit, flagged in zip(candidates, blocks, framed, flags):
        if flagged:
            coeffs = reverse_bit(dct2(block), config.params, bit)
            refs.append(ref)
            restored.append(quantize_block(idct2(coeffs)))

    pixels = watermarked.writable_copy()
    write_blocks(pixels, refs, restored, m)
    logger.info(f"Recovered {len(refs)} of {len(candidates)} candidate blocks")
    return Image(pixels)
