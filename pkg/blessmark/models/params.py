from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from blessmark.enums import LengthMode

DEFAULT_TH = 0.01
HEADER_BITS = 32
DEFAULT_HIDDEN_CHANNELS = [16, 32, 32, 64, 64, 64, 32, 32, 16, 16]


class EmbedParams(BaseModel):
    """Block side, 1-based coefficient index and swap margin.

    The bit lives in the order of c(i, i+1) and c(i+1, i). When ``i`` is not
    given it defaults to m - 1 (5, 7, 9 for 6x6, 8x8, 10x10 blocks).
    """

    model_config = ConfigDict(frozen=True)

    m: int = 6
    i: Optional[int] = None
    th: float = Field(default=DEFAULT_TH, gt=0.0)

    @model_validator(mode="before")
    @classmethod
    def _default_index(cls, data):
        if isinstance(data, dict) and data.get("i") is None:
            data = {**data, "i": int(data.get("m", 6)) - 1}
        return data

    @model_validator(mode="after")
    def _check_index(self) -> "EmbedParams":
        if self.m < 2:
            raise ValueError(f"Block size must be >= 2, got {self.m}")
        if not 1 <= self.i <= self.m - 1:
            raise ValueError(f"Coefficient index must be in [1, {self.m - 1}], got {self.i}")
        return self

    @property
    def upper(self) -> tuple[int, int]:
        """0-based array position of c(i, i+1)."""
        return self.i - 1, self.i

    @property
    def lower(self) -> tuple[int, int]:
        """0-based array position of c(i+1, i)."""
        return self.i, self.i - 1


class CodecConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: EmbedParams = EmbedParams()
    max_iterations: int = Field(default=10000, ge=1)
    guard_retries: int = Field(default=64, ge=0)
    length_mode: LengthMode = LengthMode.EXTERNAL

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def header_bits(self) -> int:
        return HEADER_BITS if self.length_mode == LengthMode.HEADER else 0


class CnnSegmenterConfig(BaseModel):
    """10 hidden 3x3 conv layers, then a 1x1 conv to the two classes."""

    model_config = ConfigDict(frozen=True)

    channels: List[int] = Field(default_factory=lambda: list(DEFAULT_HIDDEN_CHANNELS))
    threshold: float = 0.5

    @field_validator("channels")
    def _eleven_layers(cls, v: List[int]) -> List[int]:
        if len(v) != 10:
            raise ValueError(f"Expected 10 hidden channel counts, got {len(v)}")
        if any(c < 1 for c in v):
            raise ValueError("Channel counts must be positive")
        return v


class DetectorConfig(BaseModel):
    """flatten(m^2) -> dense(m^2)+ReLU -> dense(m^2)+ReLU -> dense(1)+sigmoid."""

    model_config = ConfigDict(frozen=True)

    m: int = 6
    threshold: float = 0.5
    epochs: int = Field(default=100, ge=0)
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = Field(default=32, ge=1)

    @property
    def hidden(self) -> int:
        return self.m * self.m


class SsimParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    c1: float = Field(default=(0.01 * 255) ** 2, gt=0.0)
    c2: float = Field(default=(0.03 * 255) ** 2, gt=0.0)
