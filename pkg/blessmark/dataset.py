"""Data directories: ``<stem>.pgm|.ppm`` images with optional ``<stem>_mask.pgm``."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from blessmark.errors import DataError
from blessmark.models.image import Image
from blessmark.pixels import load_image, load_mask

IMAGE_SUFFIXES = (".pgm", ".ppm")
MASK_SUFFIX = "_mask"


@dataclass(frozen=True)
class DatasetItem:
    stem: str
    image_path: Path
    mask_path: Optional[Path] = None

    def load_image(self) -> Image:
        return load_image(self.image_path)

    def load_pair(self) -> Tuple[Image, np.ndarray]:
        if self.mask_path is None:
            raise DataError(f"No ground-truth mask for {self.image_path}")
        image = self.load_image()
        mask = load_mask(self.mask_path)
        if mask.shape != (image.height, image.width):
            raise DataError(
                f"Mask {self.mask_path} is {mask.shape[1]}x{mask.shape[0]} but "
                f"{self.image_path} is {image.width}x{image.height}"
            )
        return image, mask


def discover(data_dir: str | Path, require_masks: bool = False) -> List[DatasetItem]:
    """Images in ``data_dir`` sorted by file name."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"Data directory not found: {data_dir}")

    items = []
    for path in sorted(data_dir.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES or path.stem.endswith(MASK_SUFFIX):
            continue
        mask = path.with_name(f"{path.stem}{MASK_SUFFIX}.pgm")
        if require_masks and not mask.is_file():
            raise DataError(f"Missing ground-truth mask {mask.name} for {path.name}")
        items.append(DatasetItem(path.stem, path, mask if mask.is_file() else None))

    if not items:
        raise DataError(f"No .pgm/.ppm images in {data_dir}")
    return items


def split(items: Sequence[DatasetItem], seed: int) -> Tuple[List[DatasetItem], List[DatasetItem]]:
    """Seeded 50/50 split of the name-sorted items; the odd one goes to training."""
    ordered = sorted(items, key=lambda item: item.image_path.name)
    order = np.random.default_rng(seed).permutation(len(ordered))
    n_train = len(ordered) - len(ordered) // 2
    train = [ordered[i] for i in sorted(order[:n_train])]
    held_out = [ordered[i] for i in sorted(order[n_train:])]
    return train, held_out
