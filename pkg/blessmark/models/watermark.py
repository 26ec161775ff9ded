from __future__ import annotations

from pathlib import Path
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from blessmark.errors import DataError


class Watermark(BaseModel):
    """Ordered payload bits w(1..K).

    On disk a watermark is one text line of '0'/'1' characters; a trailing
    newline is allowed.
    """

    model_config = ConfigDict(frozen=True)

    bits: Tuple[int, ...] = ()

    @field_validator("bits")
    def _binary(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(b not in (0, 1) for b in v):
            raise ValueError("Watermark bits must be 0 or 1")
        return v

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def from_bits(cls, bits) -> "Watermark":
        return cls(bits=tuple(int(b) for b in bits))

    @classmethod
    def random(cls, seed: int, k: int) -> "Watermark":
        """K uniform bits from a seeded generator."""
        if k < 0:
            raise ValueError("Watermark length must be >= 0")
        rng = np.random.default_rng(seed)
        return cls.from_bits(rng.integers(0, 2, size=k).tolist())

    @classmethod
    def from_text(cls, text: str) -> "Watermark":
        line = text[:-1] if text.endswith("\n") else text
        if line.endswith("\r"):
            line = line[:-1]
        if any(ch not in "01" for ch in line):
            raise DataError("Watermark text may contain only '0' and '1' on one line")
        return cls(bits=tuple(int(ch) for ch in line))

    def to_text(self) -> str:
        return "".join(str(b) for b in self.bits) + "\n"

    @classmethod
    def from_file(cls, path: str | Path) -> "Watermark":
        path = Path(path)
        try:
            text = path.read_text(encoding="ascii")
        except (OSError, UnicodeDecodeError) as exc:
            raise DataError(f"Cannot read watermark file {path}: {exc}") from exc
        return cls.from_text(text)

    def write_file(self, path: str | Path) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_text(), encoding="ascii")
        except OSError as exc:
            raise DataError(f"Cannot write watermark file {path}: {exc}") from exc
