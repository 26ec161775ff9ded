"""Evaluation metrics: PSNR (whole and region), global SSIM, Dice, accuracy, BPP.

PSNR of identical inputs is +inf and is rendered as ``Inf`` in reports.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from blessmark.errors import MetricError
from blessmark.models.image import Image
from blessmark.models.params import SsimParams
from blessmark.models.report import EvaluationReport
from blessmark.pixels import to_grayscale

PEAK = 255.0


class ConfusionCounts(BaseModel):
    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


def confusion(predicted, actual) -> ConfusionCounts:
    pred = np.asarray(predicted, dtype=bool)
    truth = np.asarray(actual, dtype=bool)
    if pred.shape != truth.shape:
        raise MetricError(f"Prediction {pred.shape} and truth {truth.shape} differ in shape")
    return ConfusionCounts(
        tp=int(np.sum(pred & truth)),
        fp=int(np.sum(pred & ~truth)),
        tn=int(np.sum(~pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
    )


def dice(counts: ConfusionCounts) -> float:
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        raise MetricError("Dice is undefined with no positives predicted or present")
    return 2 * counts.tp / denom


def accuracy(counts: ConfusionCounts) -> float:
    if counts.total == 0:
        raise MetricError("Accuracy is undefined over zero samples")
    return (counts.tp + counts.tn) / counts.total


def _check_pair(a: Image, b: Image) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise MetricError(f"Image shapes differ: {a.pixels.shape} vs {b.pixels.shape}")


def _psnr_from(sq_error: float, n: int) -> float:
    if sq_error == 0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 * n / sq_error)


def psnr(reference: Image, distorted: Image) -> float:
    _check_pair(reference, distorted)
    diff = reference.pixels.astype(np.int64) - distorted.pixels.astype(np.int64)
    return _psnr_from(float(np.sum(diff * diff)), diff.size)


def psnr_region(reference: Image, distorted: Image, mask) -> float:
    """PSNR over the samples of every channel under a (h, w) pixel mask."""
    _check_pair(reference, distorted)
    region = np.asarray(mask, dtype=bool)
    if region.shape != reference.pixels.shape[:2]:
        raise MetricError(
            f"Mask {region.shape} does not match image {reference.pixels.shape[:2]}"
        )
    if not region.any():
        raise MetricError("PSNR over an empty region")
    diff = reference.pixels[region].astype(np.int64) - distorted.pixels[region].astype(np.int64)
    return _psnr_from(float(np.sum(diff * diff)), diff.size)


def ssim(reference: Image, distorted: Image, params: SsimParams = SsimParams()) -> float:
    """Single-window SSIM from whole-image statistics (population variance)."""
    _check_pair(reference, distorted)
    x = to_grayscale(reference).pixels.astype(np.float64).ravel()
    y = to_grayscale(distorted).pixels.astype(np.float64).ravel()
    mu_x, mu_y = x.mean(), y.mean()
    var_x, var_y = x.var(), y.var()
    cov = np.mean((x - mu_x) * (y - mu_y))
    num = (2 * mu_x * mu_y + params.c1) * (2 * cov + params.c2)
    den = (mu_x**2 + mu_y**2 + params.c1) * (var_x + var_y + params.c2)
    return float(num / den)


def bpp(bits: int, width: int, height: int) -> float:
    if width * height <= 0:
        raise MetricError("BPP needs a positive pixel count")
    return bits / (width * height)


def bit_error_rate(expected: Sequence[int], actual: Sequence[int]) -> float:
    if len(expected) != len(actual):
        raise MetricError(f"Bit sequences differ in length: {len(expected)} vs {len(actual)}")
    if not expected:
        return 0.0
    return sum(a != b for a, b in zip(expected, actual)) / len(expected)


def _improvement(before: float, after: float) -> float:
    if math.isinf(before) and math.isinf(after):
        return 0.0
    return after - before


def evaluate(
    cover: Image,
    watermarked: Image,
    recovered: Image,
    roi_mask=None,
    bits: Optional[int] = None,
    switched_percent: Optional[float] = None,
    bit_error: Optional[float] = None,
) -> EvaluationReport:
    """Whole-image and ground-truth ROI/NROI quality of an embed + recovery run."""
    region = {}
    if roi_mask is not None:
        roi = np.asarray(roi_mask, dtype=bool)
        for name, mask in (("roi", roi), ("nroi", ~roi)):
            if mask.any():
                region[f"psnr_watermarked_{name}"] = psnr_region(cover, watermarked, mask)
                region[f"psnr_recovered_{name}"] = psnr_region(cover, recovered, mask)
                region[f"improvement_{name}"] = _improvement(
                    region[f"psnr_watermarked_{name}"], region[f"psnr_recovered_{name}"]
                )

    whole_wm = psnr(cover, watermarked)
    whole_rec = psnr(cover, recovered)
    return EvaluationReport(
        capacity_bpp=bpp(bits, cover.width, cover.height) if bits is not None else None,
        psnr_watermarked=whole_wm,
        psnr_recovered=whole_rec,
        improvement=_improvement(whole_wm, whole_rec),
        ssim_watermarked=ssim(cover, watermarked),
        ssim_recovered=ssim(cover, recovered),
        switched_percent=switched_percent,
        bit_error_rate=bit_error,
        **region,
    )


def average_reports(reports: List[EvaluationReport]) -> EvaluationReport:
    """Field-wise mean; a single infinite value makes the mean infinite."""
    if not reports:
        raise MetricError("No reports to average")
    merged = {}
    for name in EvaluationReport.model_fields:
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not values:
            merged[name] = None
        elif name == "side_information_bits":
            merged[name] = int(round(sum(values) / len(values)))
        else:
            merged[name] = float(np.mean(values))
    return EvaluationReport(**merged)
