"""Deterministic synthetic medical-like images with ground-truth masks.

A dark, smooth textured background (10..60) carries 2..6 bright structures
(150..255): filled ellipses and thin branching vessels. Every structure pixel
is at least 150 in every channel and every background pixel at most 60, so
the data is separable by intensity and a 128 threshold recovers the mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from blessmark.errors import DataError
from blessmark.logger import logger
from blessmark.models.image import Image
from blessmark.pixels import save_image

BACKGROUND_RANGE = (10, 60)
STRUCTURE_RANGE = (150, 255)
MIN_STRUCTURES = 2
MAX_STRUCTURES = 6
MIN_SIDE = 16


@dataclass(frozen=True)
class SyntheticSample:
    image: Image
    mask: np.ndarray


def _background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    sigma = max(height, width) / 16.0
    field = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma, mode="reflect")
    lo, hi = field.min(), field.max()
    unit = (field - lo) / (hi - lo) if hi > lo else np.zeros_like(field)
    low, high = BACKGROUND_RANGE
    return low + unit * (high - low)


def _ellipse(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    side = min(height, width)
    cy, cx = rng.uniform(0, height), rng.uniform(0, width)
    a = rng.uniform(0.04, 0.15) * side
    b = rng.uniform(0.04, 0.15) * side
    angle = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:height, 0:width]
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(angle) + dy * np.sin(angle)
    v = -dx * np.sin(angle) + dy * np.cos(angle)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _stamp(mask: np.ndarray, y: float, x: float, radius: float) -> None:
    h, w = mask.shape
    r = int(np.ceil(radius))
    y0, y1 = max(0, int(y) - r), min(h, int(y) + r + 2)
    x0, x1 = max(0, int(x) - r), min(w, int(x) + r + 2)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    mask[y0:y1, x0:x1] |= (yy - y) ** 2 + (xx - x) ** 2 <= radius**2


def _vessel(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """A random walk that forks a few times, drawn with a round brush."""
    mask = np.zeros((height, width), dtype=bool)
    side = min(height, width)
    step = 1.0
    branches = [(rng.uniform(0, height), rng.uniform(0, width), rng.uniform(0, 2 * np.pi), rng.uniform(1.0, 2.5), 0)]
    while branches:
        y, x, heading, radius, depth = branches.pop()
        length = int(rng.uniform(0.2, 0.5) * side / (depth + 1))
        for n in range(length):
            heading += rng.normal(0.0, 0.08)
            y += step * np.sin(heading)
            x += step * np.cos(heading)
            if not (0 <= y < height and 0 <= x < width):
                break
            _stamp(mask, y, x, radius)
            if depth < 2 and n > 4 and rng.random() < 0.02:
                fork = heading + rng.choice([-1.0, 1.0]) * rng.uniform(0.4, 1.0)
                branches.append((y, x, fork, max(0.8, radius * 0.7), depth + 1))
    return mask


def generate_sample(
    rng: np.random.Generator, width: int = 256, height: int = 256, color: bool = False
) -> SyntheticSample:
    if width < MIN_SIDE or height < MIN_SIDE:
        raise DataError(f"Synthetic images must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}")

    channels = 3 if color else 1
    background = _background(rng, height, width)
    planes = np.repeat(background[:, :, np.newaxis], channels, axis=2)
    if color:
        # Slight per-channel tint, still inside the background range.
        tint = rng.uniform(0.85, 1.0, size=channels)
        planes = BACKGROUND_RANGE[0] + (planes - BACKGROUND_RANGE[0]) * tint

    mask = np.zeros((height, width), dtype=bool)
    for _ in range(rng.integers(MIN_STRUCTURES, MAX_STRUCTURES + 1)):
        shape = _ellipse(rng, height, width) if rng.random() < 0.5 else _vessel(rng, height, width)
        base = rng.uniform(STRUCTURE_RANGE[0] + 20, STRUCTURE_RANGE[1], size=channels)
        shading = ndimage.gaussian_filter(rng.standard_normal((height, width)), 2.0) * 40.0
        values = base[np.newaxis, np.newaxis, :] + shading[:, :, np.newaxis]
        planes[shape] = values[shape]
        mask |= shape

    planes[mask] = np.clip(planes[mask], *STRUCTURE_RANGE)
    planes[~mask] = np.clip(planes[~mask], *BACKGROUND_RANGE)
    pixels = np.floor(planes + 0.5).astype(np.uint8)
    return SyntheticSample(Image(pixels), mask)


def synthetic_image(seed: int, width: int = 256, height: int = 256, color: bool = False) -> SyntheticSample:
    return generate_sample(np.random.default_rng(seed), width, height, color)


def mask_image(mask: np.ndarray) -> Image:
    return Image.from_array(np.where(mask, 255, 0).astype(np.uint8))


def write_dataset(
    out_dir: str | Path,
    seed: int,
    count: int,
    width: int = 256,
    height: int = 256,
    color: bool = False,
    prefix: str = "synth",
) -> List[Tuple[Path, Path]]:
    """Write ``count`` image/mask pairs; image i depends only on (seed, i)."""
    if count < 1:
        raise DataError(f"count must be >= 1, got {count}")
    out_dir = Path(out_dir)
    ext = "ppm" if color else "pgm"
    written = []
    for index, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        sample = generate_sample(np.random.default_rng(child), width, height, color)
        image_path = out_dir / f"{prefix}_{index:03d}.{ext}"
        mask_path = out_dir / f"{prefix}_{index:03d}_mask.pgm"
        save_image(image_path, sample.image)
        save_image(mask_path, mask_image(sample.mask))
        written.append((image_path, mask_path))
    logger.info(f"Wrote {count} synthetic pairs to {out_dir}")
    return written
