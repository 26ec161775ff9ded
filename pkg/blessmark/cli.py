#!/usr/bin/env python3
from __future__ import annotations

import functools
from pathlib import Path
from typing import Any, Callable, List, Optional

import click
import yaml

from blessmark import codec, dataset, metrics, restore, segment, synthetic
from blessmark._version import __version__ as VERSION
from blessmark.config_paths import resolve_config
from blessmark.enums import LengthMode, SegmenterKind
from blessmark.errors import BlessMarkError, CapacityError, DataError, TrainingError
from blessmark.logger import enable_file_logging, logger, set_level
from blessmark.models.config import RunConfig
from blessmark.models.report import EmbedReport, EvaluationReport, format_value
from blessmark.models.watermark import Watermark
from blessmark.neural import write_weights_file
from blessmark.pixels import load_image, load_mask, save_image

BENCHMARK_RETRIES = 10


class CommandError(click.ClickException):
    """A library error surfaced with the exit code of its error class."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def handle_errors(func: Callable) -> Callable:
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except BlessMarkError as exc:
            message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            logger.debug(f"{type(exc).__name__}: {exc}")
            raise CommandError(message, exc.exit_code) from exc
        except OSError as exc:
            logger.debug(f"OSError: {exc}")
            raise CommandError(f"I/O error: {exc}", DataError.exit_code) from exc

    return wrapper


_PATH = click.Path(dir_okay=False, path_type=Path)

_RUN_OPTIONS = [
    click.option(
        "--config",
        "config_path",
        type=_PATH,
        default=None,
        help="Path to config file (default: search cwd, then user config dir)",
    ),
    click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override config values (can be repeated)",
    ),
    click.option("--seed", type=int, default=None, help="Seed for every random choice"),
    click.option("--block-size", type=int, default=None, help="Block side m"),
    click.option("--index", type=int, default=None, help="Coefficient index i (default m-1)"),
    click.option("--threshold", type=float, default=None, help="Swap margin th"),
    click.option(
        "--segmenter",
        type=click.Choice([k.value for k in SegmenterKind]),
        default=None,
        help="ROI segmenter implementation",
    ),
    click.option("--roi-threshold", type=int, default=None, help="Threshold segmenter cut-off T"),
    click.option("--seg-weights", type=_PATH, default=None, help="Segmenter weight file"),
    click.option("--det-weights", type=_PATH, default=None, help="Detector weight file"),
    click.option(
        "--length-mode",
        type=click.Choice([m.value for m in LengthMode]),
        default=None,
        help="How the receiver learns the payload length",
    ),
    click.option("--bits", type=int, default=None, help="Payload length in bits"),
    click.option("--guard-retries", type=int, default=None, help="Quantization guard retries (0 = off)"),
    click.option("--epochs", type=int, default=None, help="Training epochs"),
    click.option("--learning-rate", type=float, default=None, help="Training learning rate"),
]


def run_options(func: Callable) -> Callable:
    for option in reversed(_RUN_OPTIONS):
        func = option(func)
    return func


def load_run_config(
    config_path: Optional[Path] = None,
    overrides: tuple[str, ...] = (),
    **flags: Any,
) -> RunConfig:
    """Defaults < config file < --set overrides < dedicated flags."""
    load_path = resolve_config(config_path)
    if load_path is not None:
        logger.debug(f"Using config {load_path}")
    config = RunConfig.from_config_file(load_path, overrides)
    return config.updated(**flags)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(VERSION)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging on stderr")
@click.option("--log-file", type=_PATH, default=None, help="Also log to a rotating file")
def cli(verbose: bool, log_file: Optional[Path]) -> None:
    """BlessMark: blind ROI-preserving watermarking."""
    if verbose:
        set_level("DEBUG")
    if log_file is not None:
        enable_file_logging(log_file)


# ------------------------------------------------------------------ generators


@cli.command("gen-synthetic")
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--width", type=int, default=256, show_default=True)
@click.option("--height", type=int, default=256, show_default=True)
@click.option("--color", is_flag=True, help="Write P6 color images")
@handle_errors
def gen_synthetic(out_dir: Path, seed: int, count: int, width: int, height: int, color: bool) -> None:
    """Write synthetic image/mask pairs to OUT_DIR."""
    written = synthetic.write_dataset(out_dir, seed, count, width, height, color)
    for image_path, mask_path in written:
        click.echo(f"{image_path} {mask_path}")


@cli.command("gen-watermark")
@click.argument("out_file", type=_PATH)
@click.option("--bits", type=click.IntRange(min=0), required=True, help="Number of bits K")
@click.option("--seed", type=int, default=0, show_default=True)
@handle_errors
def gen_watermark(out_file: Path, bits: int, seed: int) -> None:
    """Write K seeded random bits to OUT_FILE."""
    Watermark.random(seed, bits).write_file(out_file)
    click.echo(f"Wrote {bits} bits to {out_file}")


# -------------------------------------------------------------------- training


@cli.command("train-seg")
@click.argument("data_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--out", "-o", "out_path", type=_PATH, required=True, help="Weight file to write")
@run_options
@handle_errors
def train_seg(data_dir: Path, out_path: Path, **run_args: Any) -> None:
    """Train the segmentation CNN on DATA_DIR image/mask pairs."""
    config = load_run_config(**run_args)
    items = dataset.discover(data_dir, require_masks=True)
    train, held_out = dataset.split(items, config.seed)
    logger.info(f"Segmenter split: {len(train)} training, {len(held_out)} held-out images")

    result = segment.train_segmenter(
        [item.load_pair() for item in train],
        [item.load_pair() for item in held_out],
        config.block_size,
        epochs=config.segmenter_epochs,
        learning_rate=config.segmenter_learning_rate,
        seed=config.seed,
        config=config.segmenter_config,
        batch_size=config.batch_size,
    )
    write_weights_file(out_path, result.weights)
    click.echo(f"dice={format_value(result.dice)}")


@cli.command("train-det")
@click.argument("data_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--out", "-o", "out_path", type=_PATH, required=True, help="Weight file to write")
@run_options
@handle_errors
def train_det(data_dir: Path, out_path: Path, **run_args: Any) -> None:
    """Train the distortion detector on the NROI blocks of DATA_DIR covers."""
    config = load_run_config(**run_args)
    seg = segment.load_segmenter(config)
    train, held_out = dataset.split(dataset.discover(data_dir), config.seed)

    blocks = restore.build_detector_training_set(
        (item.load_image() for item in train), seg, config.codec_config
    )
    eval_blocks = None
    if held_out:
        try:
            eval_blocks = restore.build_detector_training_set(
                (item.load_image() for item in held_out), seg, config.codec_config
            )
        except TrainingError:
            logger.warning("Held-out images have no NROI blocks; splitting the training blocks")

    result = restore.train_detector(
        blocks, config.detector_config, config.seed, eval_blocks, config.embed_params
    )
    write_weights_file(out_path, result.weights)
    click.echo(f"accuracy={format_value(result.accuracy)}")


# ------------------------------------------------------------------- watermark


@cli.command("capacity")
@click.argument("image_path", type=_PATH)
@run_options
@handle_errors
def capacity_cmd(image_path: Path, **run_args: Any) -> None:
    """Payload bits IMAGE can carry."""
    config = load_run_config(**run_args)
    report = codec.capacity(load_image(image_path), segment.load_segmenter(config), config.codec_config)
    click.echo(report.to_key_value(), nl=False)


@cli.command("embed")
@click.argument("cover_path", type=_PATH)
@click.argument("watermark_path", type=_PATH)
@click.option("--out", "-o", "out_path", type=_PATH, required=True, help="Watermarked image")
@click.option("--report", "report_path", type=_PATH, default=None, help="Write the embed report (YAML)")
@run_options
@handle_errors
def embed_cmd(
    cover_path: Path, watermark_path: Path, out_path: Path, report_path: Optional[Path], **run_args: Any
) -> None:
    """Embed WATERMARK into the NROI blocks of COVER."""
    config = load_run_config(**run_args)
    result = codec.embed(
        load_image(cover_path),
        Watermark.from_file(watermark_path),
        segment.load_segmenter(config),
        config.codec_config,
    )
    save_image(out_path, result.image)
    if report_path is not None:
        result.report.write_yaml(report_path)
    click.echo(result.report.summary())


@cli.command("extract")
@click.argument("watermarked_path", type=_PATH)
@click.option("--out", "-o", "out_path", type=_PATH, required=True, help="Watermark file to write")
@run_options
@handle_errors
def extract_cmd(watermarked_path: Path, out_path: Path, **run_args: Any) -> None:
    """Blindly read the watermark from WATERMARKED."""
    config = load_run_config(**run_args)
    watermark = codec.extract(
        load_image(watermarked_path), segment.load_segmenter(config), config.codec_config, config.bits
    )
    watermark.write_file(out_path)
    click.echo(f"Extracted {len(watermark)} bits to {out_path}")


@cli.command("recover")
@click.argument("watermarked_path", type=_PATH)
@click.option("--out", "-o", "out_path", type=_PATH, required=True, help="Recovered image")
@click.option(
    "--watermark",
    "watermark_path",
    type=_PATH,
    default=None,
    help="Previously extracted watermark (default: extract it now)",
)
@run_options
@handle_errors
def recover_cmd(watermarked_path: Path, out_path: Path, watermark_path: Optional[Path], **run_args: Any) -> None:
    """Undo the embedding on blocks the detector flags as distorted."""
    config = load_run_config(**run_args)
    watermark = Watermark.from_file(watermark_path) if watermark_path is not None else None
    recovered = restore.recover(
        load_image(watermarked_path),
        watermark,
        segment.load_segmenter(config),
        restore.load_detector(config),
        config.codec_config,
        config.bits,
    )
    save_image(out_path, recovered)
    click.echo(f"Recovered image written to {out_path}")


# ------------------------------------------------------------------ evaluation


def _write_or_echo(text: str, out_path: Optional[Path]) -> None:
    if out_path is None:
        click.echo(text, nl=False)
        return
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"Cannot write report {out_path}: {exc}") from exc
    click.echo(f"Report written to {out_path}")


@cli.command("evaluate")
@click.argument("cover_path", type=_PATH)
@click.argument("watermarked_path", type=_PATH)
@click.argument("recovered_path", type=_PATH)
@click.option("--mask", "mask_path", type=_PATH, default=None, help="Ground-truth ROI mask (P5)")
@click.option("--embed-report", "report_path", type=_PATH, default=None, help="Embed report (YAML)")
@click.option("--format", "fmt", type=click.Choice(["kv", "csv"]), default="kv", show_default=True)
@click.option("--out", "-o", "out_path", type=_PATH, default=None, help="Report file (default: stdout)")
@handle_errors
def evaluate_cmd(
    cover_path: Path,
    watermarked_path: Path,
    recovered_path: Path,
    mask_path: Optional[Path],
    report_path: Optional[Path],
    fmt: str,
    out_path: Optional[Path],
) -> None:
    """Capacity, PSNR (whole / NROI / ROI) and SSIM of an embed + recovery."""
    embed_report = EmbedReport.from_yaml_file(report_path) if report_path is not None else None
    report = metrics.evaluate(
        load_image(cover_path),
        load_image(watermarked_path),
        load_image(recovered_path),
        roi_mask=load_mask(mask_path) if mask_path is not None else None,
        bits=embed_report.bits_embedded if embed_report else None,
        switched_percent=embed_report.switched_percent if embed_report else None,
    )
    if fmt == "csv":
        text = EvaluationReport.csv_header() + "\n" + report.to_csv_row() + "\n"
    else:
        text = report.to_key_value()
    _write_or_echo(text, out_path)


def _embed_at_capacity(cover, watermark_seed: int, bits: Optional[int], seg, config: RunConfig):
    """Embed ``bits`` random bits, or as many as the cover takes when None."""
    k = bits if bits is not None else codec.capacity(cover, seg, config.codec_config).bits
    for _ in range(BENCHMARK_RETRIES):
        watermark = Watermark.random(watermark_seed, k)
        try:
            return watermark, codec.embed(cover, watermark, seg, config.codec_config)
        except CapacityError as exc:
            if bits is not None or exc.available >= k:
                raise
            logger.debug(f"Capacity shrank to {exc.available} bits while embedding {k}; retrying")
            k = exc.available
    raise CapacityError(
        f"Could not settle on a payload size within {BENCHMARK_RETRIES} attempts",
        required=k,
        available=k,
    )


@cli.command("benchmark")
@click.argument("data_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--oracle", is_flag=True, help="Recover with ground-truth modified flags")
@click.option("--out", "-o", "out_path", type=_PATH, default=None, help="CSV file (default: stdout)")
@run_options
@handle_errors
def benchmark(data_dir: Path, oracle: bool, out_path: Optional[Path], **run_args: Any) -> None:
    """Embed, extract, recover and evaluate every held-out image of DATA_DIR."""
    config = load_run_config(**run_args)
    seg = segment.load_segmenter(config)
    detector = None if oracle else restore.load_detector(config)
    _, held_out = dataset.split(dataset.discover(data_dir, require_masks=True), config.seed)
    if not held_out:
        raise click.ClickException("Benchmark needs at least two images (one is held out)")

    rows: List[str] = [EvaluationReport.csv_header(label="image")]
    reports: List[EvaluationReport] = []
    for n, item in enumerate(held_out):
        cover, mask = item.load_pair()
        watermark, result = _embed_at_capacity(cover, config.seed + n, config.bits, seg, config)
        extracted = codec.extract(result.image, seg, config.codec_config, len(watermark))
        ber = metrics.bit_error_rate(watermark.bits, extracted.bits)
        det = restore.OracleDetector.from_embed(result) if oracle else detector
        recovered = restore.recover(result.image, extracted, seg, det, config.codec_config)
        report = metrics.evaluate(
            cover,
            result.image,
            recovered,
            roi_mask=mask,
            bits=len(watermark),
            switched_percent=result.report.switched_percent,
            bit_error=ber,
        )
        reports.append(report)
        rows.append(report.to_csv_row(label=item.stem))
        logger.info(f"{item.stem}: {len(watermark)} bits, BER {ber:.4f}")

    rows.append(metrics.average_reports(reports).to_csv_row(label="mean"))
    _write_or_echo("\n".join(rows) + "\n", out_path)


@cli.command("validate-config")
@click.option("--show", is_flag=True, help="Print the validated config")
@run_options
@handle_errors
def validate_config(show: bool, **run_args: Any) -> None:
    """Validate the blessmark configuration."""
    config = load_run_config(**run_args)
    click.secho("Config is valid", fg="green")

    if show:
        click.echo()
        click.echo(yaml.safe_dump(config.to_yaml_dict(), sort_keys=False), nl=False)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
