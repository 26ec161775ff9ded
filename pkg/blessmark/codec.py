"""Iterative ROI-preserving embedding and blind extraction.

Payload bits go to NROI blocks only, one bit per block and channel, in
channel-major raster order. Embedding can brighten a block enough that the
segmenter starts calling it ROI; the embedder then freezes that block in its
embedded state, re-segments and tries again until the map of the watermarked
image equals the map the bits were placed with. The receiver re-segments the
watermarked image and lands on that same map without any side information.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from blessmark.enums import LengthMode
from blessmark.errors import CapacityError, ConfigError, ConvergenceError
from blessmark.logger import logger
from blessmark.models.image import BlockRef, Image
from blessmark.models.params import HEADER_BITS, CodecConfig
from blessmark.models.report import CapacityReport, EmbedReport, ModifiedSlot
from blessmark.models.watermark import Watermark
from blessmark.pixels import block_grid, extract_block, write_blocks
from blessmark.segment import RoiBlockMap, Segmenter, roi_block_map
from blessmark.transform import dct2, embed_samples, read_bit


@dataclass(frozen=True)
class EmbedResult:
    image: Image
    report: EmbedReport
    block_map: RoiBlockMap


def payload_slots(block_map: RoiBlockMap, channels: int) -> List[BlockRef]:
    """Every NROI block once per channel: all of channel 0 in raster order first."""
    positions = block_map.nroi_positions()
    return [BlockRef(ch, row, col) for ch in range(channels) for row, col in positions]


def encode_header(length: int) -> List[int]:
    """32-bit big-endian payload length."""
    if not 0 <= length < 2**HEADER_BITS:
        raise CapacityError(
            f"Payload of {length} bits cannot be described by a {HEADER_BITS}-bit header",
            required=length,
            available=2**HEADER_BITS - 1,
        )
    return [(length >> shift) & 1 for shift in range(HEADER_BITS - 1, -1, -1)]


def decode_header(bits: Sequence[int]) -> int:
    if len(bits) != HEADER_BITS:
        raise ValueError(f"Header needs {HEADER_BITS} bits, got {len(bits)}")
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def frame_bits(watermark: Watermark, mode: LengthMode) -> List[int]:
    """The bit sequence actually written to the slots."""
    bits = list(watermark.bits)
    if mode == LengthMode.HEADER:
        return encode_header(len(bits)) + bits
    return bits


def capacity(image: Image, segmenter: Segmenter, config: CodecConfig) -> CapacityReport:
    block_map = roi_block_map(image, segmenter, config.m)
    slots = block_map.nroi_count * image.channels
    return CapacityReport(
        width=image.width,
        height=image.height,
        channels=image.channels,
        block_size=config.m,
        roi_blocks=block_map.roi_count,
        nroi_blocks=block_map.nroi_count,
        header_bits=config.header_bits,
        bits=max(0, slots - config.header_bits),
    )


def _check_fits(framed: int, slots: int, config: CodecConfig, when: str) -> None:
    if framed > slots:
        usable = max(0, slots - config.header_bits)
        raise CapacityError(
            f"Payload needs {framed - config.header_bits} bits but only {usable} "
            f"are available {when}",
            required=framed - config.header_bits,
            available=usable,
        )


def embed(cover: Image, watermark: Watermark, segmenter: Segmenter, config: CodecConfig) -> EmbedResult:
    m = config.m
    params = config.params
    framed = frame_bits(watermark, config.length_mode)
    block_grid(cover, m)

    working = cover
    block_map = roi_block_map(working, segmenter, m)
    initial_map = block_map
    slots_available = block_map.nroi_count * cover.channels
    history = [block_map.nroi_count]
    guard_total = 0

    for iteration in range(1, config.max_iterations + 1):
        slots = payload_slots(block_map, cover.channels)
        _check_fits(
            len(framed), len(slots), config,
            "at the start" if iteration == 1 else f"after {iteration - 1} re-segmentations",
        )

        pixels = working.writable_copy()
        refs, blocks, modified = [], [], []
        for ref, bit in zip(slots, framed):
            result = embed_samples(extract_block(working, ref, m), params, bit, config.guard_retries)
            if result.modified:
                refs.append(ref)
                blocks.append(result.samples)
                modified.append(ModifiedSlot(channel=ref.channel, row=ref.row, col=ref.col, increments=result.increments))
                guard_total += result.increments - 1
        write_blocks(pixels, refs, blocks, m)
        tentative = Image(pixels)

        next_map = roi_block_map(tentative, segmenter, m)
        logger.debug(
            f"Iteration {iteration}: {len(modified)} blocks modified, "
            f"NROI {block_map.nroi_count} -> {next_map.nroi_count}"
        )
        if next_map == block_map:
            switched = int(np.sum(~initial_map.roi & block_map.roi))
            report = EmbedReport(
                iterations=iteration,
                initial_nroi_blocks=initial_map.nroi_count,
                switched_blocks=switched,
                bits_embedded=len(watermark),
                slots_available=slots_available,
                header_bits=config.header_bits,
                length_mode=config.length_mode,
                block_size=m,
                width=cover.width,
                height=cover.height,
                guard_retries=guard_total,
                nroi_history=history,
                modified_slots=modified,
            )
            logger.info(f"Embedded {len(watermark)} bits: {report.summary()}")
            return EmbedResult(tentative, report, block_map)

        # Freeze every block that turned ROI in its embedded state, all channels.
        frozen = working.writable_copy()
        newly_roi = next_map.roi & ~block_map.roi
        for row, col in np.argwhere(newly_roi):
            r, c = row * m, col * m
            frozen[r : r + m, c : c + m, :] = tentative.pixels[r : r + m, c : c + m, :]
        lost = int(np.sum(block_map.roi & ~next_map.roi))
        if lost:
            logger.warning(f"{lost} ROI blocks turned NROI after embedding; segmenter is not block-local")
        working = Image(frozen)
        block_map = roi_block_map(working, segmenter, m)
        history.append(block_map.nroi_count)

    raise ConvergenceError(
        f"ROI block map did not stabilise within {config.max_iterations} iterations"
    )


def _read_bits(image: Image, slots: Sequence[BlockRef], config: CodecConfig) -> List[int]:
    return [read_bit(dct2(extract_block(image, ref, config.m)), config.params) for ref in slots]


def framed_length(image: Image, slots: Sequence[BlockRef], config: CodecConfig, length: Optional[int]) -> int:
    """Number of slots the framed payload occupies (header included)."""
    if config.length_mode == LengthMode.HEADER:
        if len(slots) < HEADER_BITS:
            raise CapacityError(
                f"Header mode needs {HEADER_BITS} slots, image has {len(slots)}",
                required=HEADER_BITS,
                available=len(slots),
            )
        k = decode_header(_read_bits(image, slots[:HEADER_BITS], config))
        if length is not None and length != k:
            logger.warning(f"Header says {k} bits; ignoring requested length {length}")
        total = HEADER_BITS + k
    else:
        if length is None:
            raise ConfigError("External length mode needs the watermark length (--bits)")
        total = length
    _check_fits(total, len(slots), config, "in this image")
    return total


def extract(
    watermarked: Image,
    segmenter: Segmenter,
    config: CodecConfig,
    length: Optional[int] = None,
) -> Watermark:
    """Read the payload back from the watermarked image alone."""
    block_map = roi_block_map(watermarked, segmenter, config.m)
    slots = payload_slots(block_map, watermarked.channels)
    total = framed_length(watermarked, slots, config, length)
    bits = _read_bits(watermarked, slots[config.header_bits : total], config)
    logger.info(f"Extracted {len(bits)} bits from {len(slots)} slots")
    return Watermark.from_bits(bits)
