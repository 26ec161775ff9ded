from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from blessmark.enums import LengthMode, SegmenterKind
from blessmark.errors import ConfigError, DataError
from blessmark.models.params import (
    DEFAULT_HIDDEN_CHANNELS,
    DEFAULT_TH,
    CnnSegmenterConfig,
    CodecConfig,
    DetectorConfig,
    EmbedParams,
)

SEGMENTER_EPOCHS = 150
DETECTOR_EPOCHS = 100
SEGMENTER_LEARNING_RATE = 0.01
DETECTOR_LEARNING_RATE = 0.001


class RunConfig(BaseModel):
    """Every parameter of a blessmark run, flat so each key maps to one flag."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    block_size: int = 6
    index: Optional[int] = None
    threshold: float = Field(default=DEFAULT_TH, gt=0.0)
    segmenter: SegmenterKind = SegmenterKind.CNN
    roi_threshold: int = Field(default=128, ge=0, le=256)
    seg_weights: Optional[Path] = None
    det_weights: Optional[Path] = None
    length_mode: LengthMode = LengthMode.EXTERNAL
    seed: int = 0
    epochs: Optional[int] = Field(default=None, ge=0)
    learning_rate: Optional[float] = Field(default=None, gt=0.0)
    batch_size: int = Field(default=32, ge=1)
    guard_retries: int = Field(default=64, ge=0)
    max_iterations: int = Field(default=10000, ge=1)
    bits: Optional[int] = Field(default=None, ge=0)
    channels: List[int] = Field(default_factory=lambda: list(DEFAULT_HIDDEN_CHANNELS))

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        # Surfaces m / i range errors at load time instead of mid-run.
        try:
            EmbedParams(m=self.block_size, i=self.index, th=self.threshold)
            CnnSegmenterConfig(channels=self.channels)
        except ValidationError as exc:
            raise ValueError(_first_error(exc)) from None
        return self

    # ------------------------------------------------------------------ derive

    @property
    def embed_params(self) -> EmbedParams:
        return EmbedParams(m=self.block_size, i=self.index, th=self.threshold)

    @property
    def codec_config(self) -> CodecConfig:
        return CodecConfig(
            params=self.embed_params,
            max_iterations=self.max_iterations,
            guard_retries=self.guard_retries,
            length_mode=self.length_mode,
        )

    @property
    def segmenter_config(self) -> CnnSegmenterConfig:
        return CnnSegmenterConfig(channels=self.channels)

    @property
    def segmenter_epochs(self) -> int:
        return SEGMENTER_EPOCHS if self.epochs is None else self.epochs

    @property
    def segmenter_learning_rate(self) -> float:
        return self.learning_rate or SEGMENTER_LEARNING_RATE

    @property
    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(
            m=self.block_size,
            epochs=DETECTOR_EPOCHS if self.epochs is None else self.epochs,
            learning_rate=self.learning_rate or DETECTOR_LEARNING_RATE,
            batch_size=self.batch_size,
        )

    # -------------------------------------------------------------------- load

    @classmethod
    def from_mapping(cls, raw: Dict[str, Any], overrides: Iterable[str] = ()) -> "RunConfig":
        """Validate a flat mapping after applying ``key=value`` overrides."""
        data = dict(raw)
        apply_overrides(data, overrides)
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"Config validation failed: {_first_error(exc)}") from exc
        except ValueError as exc:
            raise ConfigError(f"Config validation failed: {exc}") from exc

    @classmethod
    def from_config_file(cls, path: str | Path | None, overrides: Iterable[str] = ()) -> "RunConfig":
        raw = load_config(Path(path)) if path is not None else {}
        return cls.from_mapping(raw, overrides)

    def updated(self, **changes: Any) -> "RunConfig":
        """Copy with the non-None ``changes`` applied and re-validated."""
        data = self.model_dump()
        data.update({k: v for k, v in changes.items() if v is not None})
        return RunConfig.from_mapping(data)

    def to_yaml_dict(self) -> dict:
        out = self.model_dump(mode="json")
        return {k: v for k, v in out.items() if v is not None}

    def write_config_file(self, path: str | Path) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8") as f:
                yaml.safe_dump(self.to_yaml_dict(), f, sort_keys=False)
        except OSError as exc:
            raise DataError(f"Cannot write config {path}: {exc}") from exc


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    where = ".".join(str(p) for p in err["loc"]) or "config"
    return f"{where}: {err['msg']}"


def load_config(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise DataError(f"Config file not found: {path}")
    if path.is_dir():
        raise DataError(f"Config path is a directory: {path}")

    with path.open("r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"Config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"Config file {path} must hold a flat key: value mapping")
    return {str(k).replace("-", "_"): v for k, v in raw.items()}


def apply_overrides(config: Dict[str, Any], overrides: Iterable[str]) -> None:
    """
    Apply overrides of the form key=value.
    NOTE: These apply BEFORE pydantic validation; values are parsed as YAML
    scalars so ``guard_retries=0`` is an int and ``channels=[2,2,2]`` a list.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Invalid override '{item}'. Expected key=value")

        key, value = item.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key:
            raise ConfigError(f"Invalid override '{item}'. Empty key")

        try:
            v: Any = yaml.safe_load(value) if value.strip() else None
        except yaml.YAMLError:
            v = value
        config[key] = v
