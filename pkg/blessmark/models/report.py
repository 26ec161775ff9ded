from __future__ import annotations

import math
from pathlib import Path
from typing import List, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError

from blessmark.enums import LengthMode
from blessmark.errors import DataError
from blessmark.models.image import BlockRef


def format_value(value) -> str:
    """Report cell text: ints as-is, floats to 4 places, infinities as Inf."""
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return f"{value:.4f}"


class ModifiedSlot(BaseModel):
    channel: int
    row: int
    col: int
    increments: int = 1

    @property
    def ref(self) -> BlockRef:
        return BlockRef(self.channel, self.row, self.col)


class EmbedReport(BaseModel):
    """What one embedding run did; never needed for extraction."""

    iterations: int = Field(ge=1)
    initial_nroi_blocks: int = Field(default=0, ge=0)
    switched_blocks: int = Field(default=0, ge=0)
    bits_embedded: int = Field(default=0, ge=0)
    slots_available: int = Field(default=0, ge=0)
    header_bits: int = 0
    length_mode: LengthMode = LengthMode.EXTERNAL
    block_size: int = 6
    width: int = 0
    height: int = 0
    guard_retries: int = 0
    nroi_history: List[int] = []
    modified_slots: List[ModifiedSlot] = []

    @property
    def switched_percent(self) -> float:
        if self.initial_nroi_blocks == 0:
            return 0.0
        return 100.0 * self.switched_blocks / self.initial_nroi_blocks

    @property
    def capacity_bpp(self) -> float:
        if self.width * self.height == 0:
            return 0.0
        return self.bits_embedded / (self.width * self.height)

    def modified_refs(self) -> List[BlockRef]:
        return [slot.ref for slot in self.modified_slots]

    def to_yaml_dict(self) -> dict:
        out = self.model_dump(mode="json")
        out["switched_percent"] = self.switched_percent
        return out

    def write_yaml(self, path: str | Path) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8") as f:
                yaml.safe_dump(self.to_yaml_dict(), f, sort_keys=False)
        except OSError as exc:
            raise DataError(f"Cannot write embed report {path}: {exc}") from exc

    @classmethod
    def from_yaml_file(cls, path: str | Path) -> "EmbedReport":
        path = Path(path)
        try:
            with path.open("r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise DataError(f"Cannot read embed report {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError(f"Embed report {path} must be a YAML mapping, got {type(raw).__name__}")
        raw.pop("switched_percent", None)
        try:
            return cls.model_validate(raw)
        except ValidationError as exc:
            first = exc.errors()[0]
            where = ".".join(str(p) for p in first["loc"]) or "report"
            raise DataError(f"Invalid embed report {path}: {where}: {first['msg']}") from exc

    def summary(self) -> str:
        return (
            f"iterations={self.iterations} bits={self.bits_embedded} "
            f"slots={self.slots_available} switched={self.switched_blocks} "
            f"({self.switched_percent:.3f}%) modified={len(self.modified_slots)}"
        )


class CapacityReport(BaseModel):
    width: int
    height: int
    channels: int
    block_size: int
    roi_blocks: int
    nroi_blocks: int
    header_bits: int = 0
    bits: int

    @property
    def bpp(self) -> float:
        return self.bits / (self.width * self.height)

    def to_key_value(self) -> str:
        rows = {**self.model_dump(mode="json"), "bpp": self.bpp}
        return "".join(f"{k}={format_value(v)}\n" for k, v in rows.items())


class EvaluationReport(BaseModel):
    """One row of the capacity / imperceptibility / recovery table."""

    capacity_bpp: Optional[float] = None
    psnr_watermarked: float
    psnr_watermarked_nroi: Optional[float] = None
    psnr_watermarked_roi: Optional[float] = None
    psnr_recovered: float
    psnr_recovered_nroi: Optional[float] = None
    psnr_recovered_roi: Optional[float] = None
    improvement: float
    improvement_nroi: Optional[float] = None
    improvement_roi: Optional[float] = None
    ssim_watermarked: float
    ssim_recovered: float
    switched_percent: Optional[float] = None
    bit_error_rate: Optional[float] = None
    side_information_bits: int = 0

    def to_key_value(self) -> str:
        return "".join(f"{k}={format_value(v)}\n" for k, v in self.model_dump().items())

    @classmethod
    def csv_header(cls, label: Optional[str] = None) -> str:
        names = ",".join(cls.model_fields)
        return f"{label},{names}" if label is not None else names

    def to_csv_row(self, label: Optional[str] = None) -> str:
        row = ",".join(format_value(v) for v in self.model_dump().values())
        return f"{label},{row}" if label is not None else row
