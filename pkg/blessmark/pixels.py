"""Image I/O and the block grid every other module works on.

Images travel as binary PGM (P5, one channel) or PPM (P6, three channels)
with maxval 255. Header parsing follows the netpbm definition: whitespace
separated ASCII fields, ``#`` comments running to end of line, exactly one
whitespace byte after maxval, then raw samples.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator, List

import numpy as np

from blessmark.errors import BlockGridError, DataError, ImageFormatError
from blessmark.logger import logger
from blessmark.models.image import BlockGrid, BlockRef, Image

_MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}
_CHANNELS_MAGIC = {1: b"P5", 3: b"P6"}
_WHITESPACE = b" \t\n\v\f\r"

# BT.601 luma weights in thousandths, so rounding stays in integer arithmetic.
_LUMA = np.array([299, 587, 114], dtype=np.int64)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next header field starting at ``pos``, skipping whitespace and comments."""
    n = len(data)
    while pos < n:
        ch = data[pos : pos + 1]
        if ch in _WHITESPACE and ch:
            pos += 1
        elif ch == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageFormatError("Truncated PGM/PPM header")
    return data[start:pos], pos


def _header_int(token: bytes, field: str) -> int:
    if not token.isdigit():
        raise ImageFormatError(f"Malformed {field} in header: {token!r}")
    return int(token)


def read_image(data: bytes) -> Image:
    """Decode a binary P5/P6 stream with maxval 255."""
    magic = data[:2]
    if magic not in _MAGIC_CHANNELS:
        raise ImageFormatError(f"Unsupported magic {magic!r}; expected P5 or P6")
    channels = _MAGIC_CHANNELS[magic]

    pos = 2
    if data[pos : pos + 1] not in _WHITESPACE or not data[pos : pos + 1]:
        raise ImageFormatError("Malformed header after magic number")

    token, pos = _next_token(data, pos)
    width = _header_int(token, "width")
    token, pos = _next_token(data, pos)
    height = _header_int(token, "height")
    token, pos = _next_token(data, pos)
    maxval = _header_int(token, "maxval")

    if maxval != 255:
        raise ImageFormatError(f"Only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError(f"Invalid image dimensions {width}x{height}")
    if data[pos : pos + 1] not in _WHITESPACE or not data[pos : pos + 1]:
        raise ImageFormatError("Missing whitespace after maxval")
    pos += 1

    expected = width * height * channels
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise ImageFormatError(
            f"Truncated sample data: expected {expected} bytes, got {len(payload)}"
        )
    if len(data) > pos + expected:
        logger.debug(f"Ignoring {len(data) - pos - expected} trailing bytes")

    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(pixels.copy())


def write_image(image: Image) -> bytes:
    header = b"%s\n%d %d\n255\n" % (
        _CHANNELS_MAGIC[image.channels],
        image.width,
        image.height,
    )
    return header + image.samples


def load_image(path: str | Path) -> Image:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"Cannot read image {path}: {exc}") from exc
    try:
        return read_image(data)
    except ImageFormatError as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc


def save_image(path: str | Path, image: Image) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(write_image(image))
    except OSError as exc:
        raise ImageFormatError(f"Cannot write image {path}: {exc}") from exc


def load_mask(path: str | Path) -> np.ndarray:
    """Ground-truth ROI mask: P5 where 255 marks ROI and 0 marks NROI."""
    mask = load_image(path)
    if mask.channels != 1:
        raise DataError(f"Mask {path} must be a single-channel P5 image")
    plane = mask.plane(0)
    if not np.isin(plane, (0, 255)).all():
        raise DataError(f"Mask {path} may contain only the values 0 and 255")
    return plane == 255


def to_grayscale(image: Image) -> Image:
    """BT.601 luma with round-half-up; single-channel input passes through."""
    if image.channels == 1:
        return image
    rgb = image.pixels.astype(np.int64)
    luma = (rgb @ _LUMA + 500) // 1000
    return Image(np.clip(luma, 0, 255).astype(np.uint8)[:, :, np.newaxis])


def block_grid(image: Image, m: int) -> BlockGrid:
    if m < 2:
        raise BlockGridError(f"Block size must be >= 2, got {m}")
    return BlockGrid(m=m, rows=image.height // m, cols=image.width // m)


def grid_refs(grid: BlockGrid, channel: int = 0) -> Iterator[BlockRef]:
    """Refs of one channel's blocks in raster order."""
    for row in range(grid.rows):
        for col in range(grid.cols):
            yield BlockRef(channel, row, col)


def _check_ref(image: Image, ref: BlockRef, m: int) -> None:
    grid = block_grid(image, m)
    if not grid.contains(ref, image.channels):
        raise BlockGridError(
            f"Block {tuple(ref)} is outside the {grid.rows}x{grid.cols}x"
            f"{image.channels} grid"
        )


def extract_block(image: Image, ref: BlockRef, m: int) -> np.ndarray:
    """Copy of the m x m samples addressed by ``ref``."""
    _check_ref(image, ref, m)
    r, c = ref.row * m, ref.col * m
    return np.array(image.pixels[r : r + m, c : c + m, ref.channel], copy=True)


def replace_block(image: Image, ref: BlockRef, m: int, matrix) -> Image:
    """New image with the block at ``ref`` replaced; all other samples kept."""
    _check_ref(image, ref, m)
    block = np.asarray(matrix)
    if block.shape != (m, m):
        raise BlockGridError(f"Replacement block must be {m}x{m}, got {block.shape}")
    if block.min() < 0 or block.max() > 255:
        raise BlockGridError("Replacement samples must lie in [0, 255]")
    pixels = image.writable_copy()
    r, c = ref.row * m, ref.col * m
    pixels[r : r + m, c : c + m, ref.channel] = block.astype(np.uint8)
    return Image(pixels)


def write_blocks(pixels: np.ndarray, refs: List[BlockRef], blocks: List[np.ndarray], m: int) -> None:
    """In-place bulk replacement on a writable (h, w, c) array."""
    for ref, block in zip(refs, blocks):
        r, c = ref.row * m, ref.col * m
        pixels[r : r + m, c : c + m, ref.channel] = block


def tile_blocks(plane: np.ndarray, m: int) -> np.ndarray:
    """(rows, cols, m, m) view over the grid blocks of a 2-D plane."""
    if m < 2:
        raise BlockGridError(f"Block size must be >= 2, got {m}")
    rows, cols = plane.shape[0] // m, plane.shape[1] // m
    cropped = plane[: rows * m, : cols * m]
    return cropped.reshape(rows, m, cols, m).swapaxes(1, 2)
