from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from blessmark.errors import BlockGridError, ImageFormatError


@dataclass(frozen=True, eq=False)
class Image:
    """An 8-bit raster with 1 or 3 interleaved channels.

    ``pixels`` is an (height, width, channels) ``uint8`` array. The array is
    made read-only on construction; every operation that "changes" an image
    returns a new one.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = self.pixels
        if not isinstance(arr, np.ndarray) or arr.dtype != np.uint8:
            raise ImageFormatError("Image pixels must be a uint8 array")
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ImageFormatError(
                f"Image pixels must have shape (h, w, 1|3), got {arr.shape}"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_array(cls, values) -> "Image":
        """Build from a 2-D (gray) or 3-D array of integers in [0, 255]."""
        arr = np.asarray(values)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ImageFormatError("Samples must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        return cls(np.array(arr, dtype=np.uint8, copy=True))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def samples(self) -> bytes:
        """Row-major, channel-interleaved sample bytes."""
        return self.pixels.tobytes()

    def plane(self, channel: int) -> np.ndarray:
        return self.pixels[:, :, channel]

    def writable_copy(self) -> np.ndarray:
        return np.array(self.pixels, copy=True)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height}x{self.channels})"


class BlockRef(NamedTuple):
    channel: int
    row: int
    col: int


class BlockGrid(BaseModel):
    """The non-overlapping m x m grid; trailing partial strips lie outside it."""

    model_config = ConfigDict(frozen=True)

    m: int
    rows: int
    cols: int

    @model_validator(mode="after")
    def _check(self) -> "BlockGrid":
        if self.m < 2:
            raise BlockGridError(f"Block size must be >= 2, got {self.m}")
        if self.rows < 0 or self.cols < 0:
            raise BlockGridError("Grid dimensions must be non-negative")
        return self

    @property
    def block_count(self) -> int:
        return self.rows * self.cols

    def contains(self, ref: BlockRef, channels: int) -> bool:
        return (
            0 <= ref.channel < channels
            and 0 <= ref.row < self.rows
            and 0 <= ref.col < self.cols
        )
