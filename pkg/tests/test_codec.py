import numpy as np
import numpy.testing as npt
import pytest

from blessmark.codec import (
    capacity,
    decode_header,
    embed,
    encode_header,
    extract,
    frame_bits,
    payload_slots,
)
from blessmark.enums import LengthMode
from blessmark.errors import CapacityError, ConfigError
from blessmark.metrics import psnr
from blessmark.models.image import BlockRef, Image
from blessmark.models.params import CodecConfig, EmbedParams
from blessmark.models.watermark import Watermark
from blessmark.pixels import extract_block, write_image
from blessmark.segment import RoiBlockMap, roi_block_map
from blessmark.synthetic import synthetic_image
from blessmark.transform import dct2, embed_samples, read_bit

from conftest import constant_image, threshold_cnn

HEADER = CodecConfig(params=EmbedParams(m=6), length_mode=LengthMode.HEADER)


def _payload_length(image, segmenter, config, cap):
    return min(cap, capacity(image, segmenter, config).bits // 2)


def test_payload_slot_order():
    block_map = RoiBlockMap(np.array([[False, True], [False, False]]))
    assert payload_slots(block_map, 2) == [
        BlockRef(0, 0, 0),
        BlockRef(0, 1, 0),
        BlockRef(0, 1, 1),
        BlockRef(1, 0, 0),
        BlockRef(1, 1, 0),
        BlockRef(1, 1, 1),
    ]


def test_payload_slots_edge_cases():
    assert payload_slots(RoiBlockMap(np.ones((3, 3), dtype=bool)), 1) == []
    slots = payload_slots(RoiBlockMap(np.zeros((2, 2), dtype=bool)), 3)
    assert len(slots) == 12
    assert [ref.channel for ref in slots] == [0] * 4 + [1] * 4 + [2] * 4


def test_header_encoding():
    bits = encode_header(5)
    assert len(bits) == 32
    assert bits[-3:] == [1, 0, 1] and not any(bits[:-3])
    assert decode_header(encode_header(2**32 - 1)) == 2**32 - 1
    with pytest.raises(CapacityError):
        encode_header(2**32)


def test_frame_bits():
    watermark = Watermark.from_bits([1, 0])
    assert frame_bits(watermark, LengthMode.EXTERNAL) == [1, 0]
    assert frame_bits(watermark, LengthMode.HEADER) == encode_header(2) + [1, 0]


def test_capacity_of_dark_image(threshold_segmenter, codec_config):
    image = constant_image(20, 512, 512)
    report = capacity(image, threshold_segmenter, codec_config)
    assert (report.nroi_blocks, report.roi_blocks) == (7225, 0)
    assert report.bits == 7225
    assert capacity(image, threshold_segmenter, HEADER).bits == 7193
    assert capacity(constant_image(20, 12, 12, 3), threshold_segmenter, codec_config).bits == 12


def test_bright_image_has_no_capacity(threshold_segmenter, codec_config):
    image = constant_image(200, 12, 12)
    assert capacity(image, threshold_segmenter, codec_config).bits == 0
    with pytest.raises(CapacityError) as info:
        embed(image, Watermark.from_bits([1]), threshold_segmenter, codec_config)
    assert (info.value.required, info.value.available) == (1, 0)


def test_empty_watermark(gray_sample, threshold_segmenter, codec_config):
    result = embed(gray_sample.image, Watermark(), threshold_segmenter, codec_config)
    assert result.image == gray_sample.image
    assert result.report.iterations == 1
    assert len(extract(result.image, threshold_segmenter, codec_config, length=0)) == 0


@pytest.mark.parametrize("fraction", [0.5, 1.0])
def test_gray_roundtrip(gray_sample, threshold_segmenter, codec_config, fraction):
    k = int(capacity(gray_sample.image, threshold_segmenter, codec_config).bits * fraction)
    watermark = Watermark.random(7, k)
    result = embed(gray_sample.image, watermark, threshold_segmenter, codec_config)
    assert extract(result.image, threshold_segmenter, codec_config, length=k) == watermark
    assert result.report.bits_embedded == k


def test_color_roundtrip(color_sample, threshold_segmenter, codec_config):
    report = capacity(color_sample.image, threshold_segmenter, codec_config)
    assert report.bits == 3 * report.nroi_blocks
    watermark = Watermark.random(8, report.bits // 2)
    result = embed(color_sample.image, watermark, threshold_segmenter, codec_config)
    assert extract(result.image, threshold_segmenter, codec_config, length=len(watermark)) == watermark


def test_header_mode_needs_no_length(gray_sample, threshold_segmenter):
    watermark = Watermark.random(9, _payload_length(gray_sample.image, threshold_segmenter, HEADER, 50))
    assert len(watermark) > 0
    result = embed(gray_sample.image, watermark, threshold_segmenter, HEADER)
    assert result.report.header_bits == 32
    assert extract(result.image, threshold_segmenter, HEADER) == watermark


def test_cnn_segmenter_roundtrip(gray_sample, threshold_segmenter, codec_config):
    cnn = threshold_cnn(6)
    assert roi_block_map(gray_sample.image, cnn, 6) == roi_block_map(gray_sample.image, threshold_segmenter, 6)
    k = _payload_length(gray_sample.image, cnn, codec_config, 40)
    watermark = Watermark.random(10, k)
    result = embed(gray_sample.image, watermark, cnn, codec_config)
    assert extract(result.image, cnn, codec_config, length=k) == watermark


@pytest.mark.parametrize("m", [8, 10])
def test_other_block_sizes(gray_sample, threshold_segmenter, m):
    config = CodecConfig(params=EmbedParams(m=m))
    k = _payload_length(gray_sample.image, threshold_segmenter, config, 30)
    watermark = Watermark.random(m, k)
    result = embed(gray_sample.image, watermark, threshold_segmenter, config)
    assert extract(result.image, threshold_segmenter, config, length=k) == watermark


def test_roi_and_strips_are_untouched(rng, threshold_segmenter, codec_config):
    pixels = rng.integers(0, 100, size=(40, 41, 1), dtype=np.uint8)
    pixels[6:18, 12:24] = 220
    cover = Image(pixels)
    result = embed(cover, Watermark.random(1, 20), threshold_segmenter, codec_config)

    initial = roi_block_map(cover, threshold_segmenter, 6)
    for row, col in np.argwhere(initial.roi):
        r, c = row * 6, col * 6
        npt.assert_array_equal(result.image.pixels[r : r + 6, c : c + 6], cover.pixels[r : r + 6, c : c + 6])
    npt.assert_array_equal(result.image.pixels[36:, :], cover.pixels[36:, :])
    npt.assert_array_equal(result.image.pixels[:, 36:], cover.pixels[:, 36:])


def test_watermarked_map_is_the_embedding_map(gray_sample, threshold_segmenter, codec_config):
    k = _payload_length(gray_sample.image, threshold_segmenter, codec_config, 60)
    result = embed(gray_sample.image, Watermark.random(11, k), threshold_segmenter, codec_config)
    assert roi_block_map(result.image, threshold_segmenter, 6) == result.block_map


def test_every_forced_swap_is_recorded(threshold_segmenter, codec_config):
    # Constant blocks already encode 0 with equal coefficients, so every bit forces a swap.
    cover = constant_image(30, 12, 12)
    result = embed(cover, Watermark.from_bits([0, 1, 1, 0]), threshold_segmenter, codec_config)
    assert len(result.report.modified_slots) == 4
    assert result.report.slots_available == 4


def _switching_block(codec_config: CodecConfig) -> np.ndarray:
    """An all-NROI block that turns ROI once bit 1 is embedded into it."""
    rng = np.random.default_rng(0)
    for _ in range(5000):
        block = rng.integers(110, 128, size=(6, 6)).astype(np.uint8)
        if read_bit(dct2(block), codec_config.params) != 0:
            continue
        out = embed_samples(block, codec_config.params, 1, codec_config.guard_retries)
        if out.modified and out.samples.max() >= 128:
            return block
    raise AssertionError("no switching block found")


def test_switched_block_is_frozen_and_skipped(threshold_segmenter, codec_config):
    pixels = np.full((12, 12, 1), 20, dtype=np.uint8)
    pixels[:6, :6, 0] = _switching_block(codec_config)
    cover = Image(pixels)

    result = embed(cover, Watermark.from_bits([1]), threshold_segmenter, codec_config)
    report = result.report
    assert report.iterations == 2
    assert report.switched_blocks == 1
    assert report.nroi_history == [4, 3]
    assert report.switched_percent == pytest.approx(25.0)
    assert report.iterations <= report.initial_nroi_blocks + 1
    assert all(a >= b for a, b in zip(report.nroi_history, report.nroi_history[1:]))
    assert result.block_map.label(0, 0)
    assert roi_block_map(result.image, threshold_segmenter, 6) == result.block_map
    assert extract(result.image, threshold_segmenter, codec_config, length=1) == Watermark.from_bits([1])
    assert read_bit(dct2(extract_block(result.image, BlockRef(0, 0, 1), 6)), codec_config.params) == 1


def test_capacity_shrinking_during_embedding(threshold_segmenter, codec_config):
    pixels = np.full((12, 12, 1), 20, dtype=np.uint8)
    pixels[:6, :6, 0] = _switching_block(codec_config)
    with pytest.raises(CapacityError) as info:
        embed(Image(pixels), Watermark.from_bits([1, 0, 0, 0]), threshold_segmenter, codec_config)
    assert info.value.available == 3


def test_extract_needs_a_length_in_external_mode(gray_sample, threshold_segmenter, codec_config):
    with pytest.raises(ConfigError):
        extract(gray_sample.image, threshold_segmenter, codec_config)


def test_extract_length_beyond_capacity(threshold_segmenter, codec_config):
    with pytest.raises(CapacityError):
        extract(constant_image(20, 12, 12), threshold_segmenter, codec_config, length=5)


def test_header_mode_on_a_tiny_image(threshold_segmenter):
    with pytest.raises(CapacityError):
        extract(constant_image(20, 12, 12), threshold_segmenter, HEADER)


def test_extract_from_an_all_roi_image(threshold_segmenter, codec_config):
    image = constant_image(200, 24, 24)
    assert len(extract(image, threshold_segmenter, codec_config, length=0)) == 0
    with pytest.raises(CapacityError):
        extract(image, threshold_segmenter, codec_config, length=1)


def test_full_size_synthetic_roundtrip(threshold_segmenter, codec_config):
    cover = synthetic_image(21).image
    assert capacity(cover, threshold_segmenter, codec_config).bits >= 500
    watermark = Watermark.random(21, 500)
    result = embed(cover, watermark, threshold_segmenter, codec_config)
    assert extract(result.image, threshold_segmenter, codec_config, length=500) == watermark
    assert psnr(cover, result.image) > 40.0


@pytest.mark.parametrize("segmenter", ["threshold", "cnn"])
def test_embed_is_deterministic(color_sample, threshold_segmenter, codec_config, segmenter):
    seg = threshold_segmenter if segmenter == "threshold" else threshold_cnn(6)
    k = _payload_length(color_sample.image, seg, codec_config, 80)
    watermark = Watermark.random(17, k)
    first = embed(color_sample.image, watermark, seg, codec_config)
    second = embed(color_sample.image, watermark, seg, codec_config)
    assert write_image(first.image) == write_image(second.image)
    assert first.report == second.report
    assert first.report.to_yaml_dict() == second.report.to_yaml_dict()
