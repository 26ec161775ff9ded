"""The self-describing "BLSSMK01" weight file.

Layout (little-endian)::

    magic        8 bytes  b"BLSSMK01" (last two bytes are the format version)
    layer count  u32
    per layer:
      kind tag   u16      (LayerKind)
      arrays     u32
      per array:
        ndim     u8
        dims     u32 * ndim
        data     f64 * prod(dims)
    metadata     u32 byte length + UTF-8 JSON (WeightsMetadata)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from blessmark.enums import LayerKind, NetworkRole
from blessmark.errors import WeightsFormatError, WeightsVersionError

MAGIC_PREFIX = b"BLSSMK"
FORMAT_VERSION = b"01"
MAGIC = MAGIC_PREFIX + FORMAT_VERSION


class WeightsMetadata(BaseModel):
    format_version: int = int(FORMAT_VERSION)
    role: NetworkRole = NetworkRole.GENERIC
    block_size: Optional[int] = None
    epochs: int = 0
    seed: int = 0
    learning_rate: Optional[float] = None
    score: Optional[float] = None
    coefficient_index: Optional[int] = None
    th: Optional[float] = None
    channels: Optional[List[int]] = None
    extra: Dict[str, str] = {}


@dataclass(eq=False)
class LayerSpec:
    kind: LayerKind
    arrays: Tuple[np.ndarray, ...] = ()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LayerSpec):
            return NotImplemented
        return (
            self.kind == other.kind
            and len(self.arrays) == len(other.arrays)
            and all(
                a.shape == b.shape and np.array_equal(a, b)
                for a, b in zip(self.arrays, other.arrays)
            )
        )


@dataclass
class NetworkWeights:
    layers: List[LayerSpec] = field(default_factory=list)
    metadata: WeightsMetadata = field(default_factory=WeightsMetadata)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightsFormatError(
                f"Truncated weight file: needed {n} bytes at offset {self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))


def save_weights(weights: NetworkWeights) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<I", len(weights.layers))
    for spec in weights.layers:
        out += struct.pack("<HI", int(spec.kind), len(spec.arrays))
        for arr in spec.arrays:
            arr = np.asarray(arr, dtype="<f8")
            out += struct.pack("<B", arr.ndim)
            out += struct.pack(f"<{arr.ndim}I", *arr.shape)
            out += arr.tobytes(order="C")
    meta = weights.metadata.model_dump_json().encode("utf-8")
    out += struct.pack("<I", len(meta))
    out += meta
    return bytes(out)


def load_weights(data: bytes) -> NetworkWeights:
    magic = data[: len(MAGIC)]
    if len(magic) < len(MAGIC) or not magic.startswith(MAGIC_PREFIX):
        raise WeightsFormatError(f"Bad magic {magic[:8]!r}; not a blessmark weight file")
    if magic != MAGIC:
        raise WeightsVersionError(
            f"Weight format version {magic[len(MAGIC_PREFIX):]!r} is not supported "
            f"(expected {FORMAT_VERSION!r})"
        )

    reader = _Reader(data)
    reader.pos = len(MAGIC)
    (count,) = reader.unpack("<I")
    layers: List[LayerSpec] = []
    for _ in range(count):
        tag, n_arrays = reader.unpack("<HI")
        try:
            kind = LayerKind.from_tag(tag)
        except ValueError as exc:
            raise WeightsFormatError(str(exc)) from exc
        arrays = []
        for _ in range(n_arrays):
            (ndim,) = reader.unpack("<B")
            dims = reader.unpack(f"<{ndim}I") if ndim else ()
            n = int(np.prod(dims)) if dims else 1
            raw = reader.take(8 * n)
            arrays.append(np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims))
        layers.append(LayerSpec(kind=kind, arrays=tuple(arrays)))

    (meta_len,) = reader.unpack("<I")
    meta_raw = reader.take(meta_len)
    try:
        metadata = WeightsMetadata.model_validate_json(meta_raw)
    except ValidationError as exc:
        raise WeightsFormatError(f"Malformed weight metadata: {exc}") from exc
    return NetworkWeights(layers=layers, metadata=metadata)


def read_weights_file(path: str | Path) -> NetworkWeights:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise WeightsFormatError(f"Cannot read weights {path}: {exc}") from exc
    return load_weights(data)


def write_weights_file(path: str | Path, weights: NetworkWeights) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(save_weights(weights))
    except OSError as exc:
        raise WeightsFormatError(f"Cannot write weights {path}: {exc}") from exc
