"""Orthonormal block DCT and the coefficient-pair bit primitives.

A bit is stored in the order relation of the two mid-frequency coefficients
c(i, i+1) and c(i+1, i) (1-based, as in ``EmbedParams``): bit 0 when
c(i, i+1) >= c(i+1, i), bit 1 otherwise. Embedding swaps the pair when it
disagrees with the bit and pushes the winner ahead by the margin ``th``;
reversing subtracts the margin and swaps back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Tuple

import numpy as np
from scipy import fft

from blessmark.errors import BlockGridError, GuardExhaustedError
from blessmark.logger import logger
from blessmark.models.params import EmbedParams

# Floating-point residue of the DCT on constant blocks is ~1e-13; anything this
# small is flushed so that equal coefficients compare equal.
ZERO_FLUSH = 1e-10


@dataclass(frozen=True, eq=False)
class CoeffBlock:
    """m x m DCT coefficients; ``c(row, col)`` uses 1-based positions."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise BlockGridError(f"Coefficient block must be square, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("Coefficient block contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    def c(self, row: int, col: int) -> float:
        return float(self.coeffs[row - 1, col - 1])

    def pair(self, params: EmbedParams) -> Tuple[float, float]:
        """(c(i, i+1), c(i+1, i))."""
        return float(self.coeffs[params.upper]), float(self.coeffs[params.lower])

    def with_pair(self, params: EmbedParams, upper: float, lower: float) -> "CoeffBlock":
        arr = np.array(self.coeffs, copy=True)
        arr[params.upper] = upper
        arr[params.lower] = lower
        return CoeffBlock(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoeffBlock):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)


class BlockTransform(Protocol):
    def forward(self, samples: np.ndarray) -> CoeffBlock: ...

    def inverse(self, block: CoeffBlock) -> np.ndarray: ...


class OrthonormalDCT:
    """Unitary 2-D DCT-II: C = A X A^T, so energy is preserved."""

    def forward(self, samples: np.ndarray) -> CoeffBlock:
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise BlockGridError(f"DCT input must be a square matrix, got {x.shape}")
        coeffs = fft.dctn(x, type=2, norm="ortho")
        coeffs[np.abs(coeffs) < ZERO_FLUSH] = 0.0
        return CoeffBlock(coeffs)

    def inverse(self, block: CoeffBlock) -> np.ndarray:
        return fft.idctn(block.coeffs, type=2, norm="ortho")


DCT = OrthonormalDCT()


def dct2(samples: np.ndarray) -> CoeffBlock:
    return DCT.forward(samples)


def idct2(block: CoeffBlock) -> np.ndarray:
    return DCT.inverse(block)


def _check_params(block: CoeffBlock, params: EmbedParams) -> None:
    if block.m != params.m:
        raise BlockGridError(f"Block is {block.m}x{block.m} but params expect m={params.m}")


def embed_bit(block: CoeffBlock, params: EmbedParams, bit: int) -> Tuple[CoeffBlock, bool]:
    """Force the pair order to encode ``bit``; returns (block, modified)."""
    _check_params(block, params)
    upper, lower = block.pair(params)
    if bit == 0:
        if upper <= lower:
            return block.with_pair(params, lower + params.th, upper), True
        return block, False
    if upper >= lower:
        return block.with_pair(params, lower, upper + params.th), True
    return block, False


def read_bit(block: CoeffBlock, params: EmbedParams) -> int:
    _check_params(block, params)
    upper, lower = block.pair(params)
    return 0 if upper >= lower else 1


def reverse_bit(block: CoeffBlock, params: EmbedParams, bit: int) -> CoeffBlock:
    """Undo one embed_bit increment for a block that encodes ``bit``."""
    _check_params(block, params)
    upper, lower = block.pair(params)
    if bit == 0:
        upper -= params.th
        if upper > lower:
            upper, lower = lower, upper
    else:
        lower -= params.th
        if upper < lower:
            upper, lower = lower, upper
    return block.with_pair(params, upper, lower)


def quantize_block(values) -> np.ndarray:
    """Round half up, then clip under/overflow to 0 and 255."""
    rounded = np.floor(np.asarray(values, dtype=np.float64) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class EmbeddedBlock:
    samples: np.ndarray
    modified: bool
    increments: int


def embed_samples(
    samples: np.ndarray,
    params: EmbedParams,
    bit: int,
    guard_retries: int,
    transform: BlockTransform = DCT,
) -> EmbeddedBlock:
    """Embed ``bit`` into an integer block and return integer samples.

    After quantization the bit is re-read. While integer conversion has
    flipped it back, embed_bit is re-applied to the quantized block's
    coefficients with a margin that doubles every retry (th * 2^r), so a
    retry is eventually large enough to move samples. ``guard_retries=0``
    keeps the unguarded result even when the bit did not survive.
    """
    coeffs = transform.forward(samples)
    coeffs, modified = embed_bit(coeffs, params, bit)
    if not modified:
        return EmbeddedBlock(np.asarray(samples, dtype=np.uint8).copy(), False, 0)

    quantized = quantize_block(transform.inverse(coeffs))
    increments = 1
    for retry in range(1, guard_retries + 1):
        current = transform.forward(quantized)
        if read_bit(current, params) == bit:
            break
        widened = params.model_copy(update={"th": params.th * 2**retry})
        current, _ = embed_bit(current, widened, bit)
        quantized = quantize_block(transform.inverse(current))
        increments += 1
    else:
        if guard_retries and read_bit(transform.forward(quantized), params) != bit:
            raise GuardExhaustedError(
                f"Bit {bit} did not survive integer conversion after "
                f"{guard_retries} retries"
            )

    if increments > 1:
        logger.debug(f"Quantization guard used {increments - 1} retries for bit {bit}")
    return EmbeddedBlock(quantized, True, increments)
