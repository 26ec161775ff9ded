import math

import numpy as np
import pytest

from blessmark.errors import DataError, MetricError
from blessmark.metrics import (
    ConfusionCounts,
    accuracy,
    average_reports,
    bit_error_rate,
    bpp,
    confusion,
    dice,
    evaluate,
    psnr,
    psnr_region,
    ssim,
)
from blessmark.models.image import Image
from blessmark.models.report import CapacityReport, EmbedReport, EvaluationReport, format_value

from conftest import constant_image


def _one_off(image: Image, row: int = 0, col: int = 0) -> Image:
    pixels = image.writable_copy()
    pixels[row, col, 0] += 1
    return Image(pixels)


def test_psnr_identical_is_infinite():
    image = constant_image(90, 8, 8)
    assert psnr(image, image) == math.inf


def test_psnr_single_sample_error():
    image = constant_image(90, 512, 512)
    pixels = image.writable_copy()
    pixels[100, 200, 0] += 16
    distorted = Image(pixels)
    assert psnr(image, distorted) == pytest.approx(78.23, abs=0.01)
    assert psnr(distorted, image) == psnr(image, distorted)
    assert psnr_region(image, distorted, np.ones((512, 512), dtype=bool)) == pytest.approx(psnr(image, distorted))


def test_psnr_shape_mismatch():
    with pytest.raises(MetricError):
        psnr(constant_image(0, 4, 4), constant_image(0, 4, 5))


def test_psnr_region():
    image = constant_image(90, 32, 32)
    distorted = _one_off(image, 3, 4)
    mask = np.zeros((32, 32), dtype=bool)
    mask[3, 4] = True
    assert psnr_region(image, distorted, mask) == pytest.approx(10 * math.log10(255**2))
    assert psnr_region(image, distorted, ~mask) == math.inf
    with pytest.raises(MetricError):
        psnr_region(image, distorted, np.zeros((32, 32), dtype=bool))
    with pytest.raises(MetricError):
        psnr_region(image, distorted, np.ones((4, 4), dtype=bool))


def test_ssim_values(gray_sample):
    assert ssim(gray_sample.image, gray_sample.image) == pytest.approx(1.0)
    flat = constant_image(128, 8, 8)
    assert ssim(flat, flat) == pytest.approx(1.0)
    low = ssim(constant_image(0, 8, 8), constant_image(255, 8, 8))
    assert low == pytest.approx(1.0e-4, rel=0.01)


def test_ssim_on_color_uses_luma(color_sample):
    assert ssim(color_sample.image, color_sample.image) == pytest.approx(1.0)


def test_dice_and_accuracy():
    counts = confusion([1, 1, 0, 0, 1, 0], [1, 0, 1, 0, 1, 0])
    assert counts == ConfusionCounts(tp=2, fp=1, tn=2, fn=1)
    assert dice(counts) == pytest.approx(4 / 6)
    assert accuracy(ConfusionCounts(tp=1, fp=1, tn=1, fn=1)) == 0.5
    with pytest.raises(MetricError):
        dice(ConfusionCounts(tn=5))
    with pytest.raises(MetricError):
        accuracy(ConfusionCounts())


def test_confusion_counts_add():
    total = ConfusionCounts(tp=1, fn=2) + ConfusionCounts(tp=3, tn=4)
    assert (total.tp, total.fn, total.tn, total.total) == (4, 2, 4, 10)


def test_bpp_and_bit_errors():
    assert bpp(7225, 512, 512) == pytest.approx(0.027561, abs=1e-6)
    with pytest.raises(MetricError):
        bpp(1, 0, 5)
    assert bit_error_rate([1, 0, 1, 1], [1, 1, 1, 0]) == 0.5
    assert bit_error_rate([], []) == 0.0
    with pytest.raises(MetricError):
        bit_error_rate([1], [])


def test_evaluate_identity():
    image = constant_image(50, 12, 12)
    mask = np.zeros((12, 12), dtype=bool)
    mask[:6] = True
    report = evaluate(image, image, image, roi_mask=mask, bits=10)
    assert report.psnr_watermarked == math.inf
    assert report.improvement == 0.0
    assert report.ssim_recovered == pytest.approx(1.0)
    assert report.psnr_recovered_roi == math.inf and report.improvement_nroi == 0.0
    assert report.capacity_bpp == pytest.approx(10 / 144)
    assert report.side_information_bits == 0


def test_evaluate_improvement():
    cover = constant_image(50, 32, 32)
    pixels = cover.writable_copy()
    pixels[:4, :4] += 3
    watermarked = Image(pixels)
    recovered = _one_off(cover)
    report = evaluate(cover, watermarked, recovered)
    assert report.improvement == pytest.approx(report.psnr_recovered - report.psnr_watermarked)
    assert report.improvement > 0
    assert report.psnr_watermarked_roi is None


def test_format_value():
    assert format_value(math.inf) == "Inf"
    assert format_value(-math.inf) == "-Inf"
    assert format_value(3) == "3"
    assert format_value(0.123456) == "0.1235"
    assert format_value(None) == ""


def test_report_rendering():
    image = constant_image(50, 8, 8)
    report = evaluate(image, image, image)
    assert "psnr_watermarked=Inf\n" in report.to_key_value()
    header = EvaluationReport.csv_header("image").split(",")
    row = report.to_csv_row("a.pgm").split(",")
    assert len(header) == len(row)
    assert row[header.index("ssim_watermarked")] == "1.0000"

    cap = CapacityReport(width=512, height=512, channels=1, block_size=6, roi_blocks=0, nroi_blocks=7225, bits=7225)
    assert "bpp=0.0276\n" in cap.to_key_value()


def test_average_reports():
    a = EvaluationReport(psnr_watermarked=40.0, psnr_recovered=50.0, improvement=10.0, ssim_watermarked=0.9, ssim_recovered=1.0)
    b = EvaluationReport(psnr_watermarked=42.0, psnr_recovered=math.inf, improvement=math.inf, ssim_watermarked=0.8, ssim_recovered=1.0)
    mean = average_reports([a, b])
    assert mean.psnr_watermarked == pytest.approx(41.0)
    assert mean.psnr_recovered == math.inf
    assert mean.ssim_watermarked == pytest.approx(0.85)
    assert mean.capacity_bpp is None
    with pytest.raises(MetricError):
        average_reports([])


def test_embed_report_yaml_roundtrip(tmp_path):
    report = EmbedReport(iterations=2, initial_nroi_blocks=4, switched_blocks=1, bits_embedded=1, width=12, height=12)
    report.write_yaml(tmp_path / "r.yaml")
    loaded = EmbedReport.from_yaml_file(tmp_path / "r.yaml")
    assert loaded == report
    assert loaded.switched_percent == 25.0


@pytest.mark.parametrize("text", ["- 1\n- 2\n", "", "iterations: zero\n", "iterations: [1\n"])
def test_malformed_embed_report(tmp_path, text):
    path = tmp_path / "r.yaml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(DataError):
        EmbedReport.from_yaml_file(path)


def test_embed_report_unwritable(tmp_path):
    (tmp_path / "blocker").write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        EmbedReport(iterations=1).write_yaml(tmp_path / "blocker" / "r.yaml")
