import numpy as np
import numpy.testing as npt
import pytest

from blessmark.errors import GuardExhaustedError
from blessmark.models.params import EmbedParams
from blessmark.transform import (
    CoeffBlock,
    dct2,
    embed_bit,
    embed_samples,
    idct2,
    quantize_block,
    read_bit,
    reverse_bit,
)

BLOCK_SIZES = [6, 8, 10]


def _coeffs(m: int, upper: float, lower: float, params: EmbedParams) -> CoeffBlock:
    arr = np.zeros((m, m))
    arr[params.upper] = upper
    arr[params.lower] = lower
    return CoeffBlock(arr)


def _dct_matrix(m: int) -> np.ndarray:
    k = np.arange(m)[:, np.newaxis]
    j = np.arange(m)[np.newaxis, :]
    a = np.sqrt(2.0 / m) * np.cos(np.pi * (2 * j + 1) * k / (2 * m))
    a[0, :] = 1.0 / np.sqrt(m)
    return a


def test_default_index_is_m_minus_one():
    assert [EmbedParams(m=m).i for m in BLOCK_SIZES] == [5, 7, 9]


@pytest.mark.parametrize(
    "kwargs",
    [{"m": 6, "i": 6}, {"m": 6, "i": 0}, {"m": 6, "th": -0.1}, {"m": 6, "th": 0.0}, {"m": 1}],
)
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        EmbedParams(**kwargs)


def test_constant_block_dc():
    block = dct2(np.full((6, 6), 128.0))
    assert block.c(1, 1) == pytest.approx(768.0)
    off_dc = block.coeffs.copy()
    off_dc[0, 0] = 0
    assert np.all(off_dc == 0.0)


def test_dc_only_inverts_to_constant():
    arr = np.zeros((6, 6))
    arr[0, 0] = 768.0
    npt.assert_allclose(idct2(CoeffBlock(arr)), np.full((6, 6), 128.0), atol=1e-9)
    npt.assert_array_equal(idct2(CoeffBlock(np.zeros((6, 6)))), np.zeros((6, 6)))


@pytest.mark.parametrize("m", BLOCK_SIZES)
def test_matches_basis_definition(m, rng):
    x = rng.uniform(0, 255, size=(m, m))
    a = _dct_matrix(m)
    npt.assert_allclose(dct2(x).coeffs, a @ x @ a.T, atol=1e-9)


@pytest.mark.parametrize("m", BLOCK_SIZES)
def test_roundtrip_and_parseval(m, rng):
    blocks = rng.uniform(0, 255, size=(1000, m, m))
    for x in blocks:
        c = dct2(x)
        assert np.max(np.abs(idct2(c) - x)) < 1e-9
        energy = np.sum(x * x)
        assert abs(np.sum(c.coeffs**2) - energy) / energy < 1e-6


def test_embed_bit_examples():
    p = EmbedParams(m=6, th=0.01)

    block, modified = embed_bit(_coeffs(6, 3.0, 1.0, p), p, 0)
    assert not modified
    assert block.pair(p) == (3.0, 1.0)

    block, modified = embed_bit(_coeffs(6, 3.0, 1.0, p), p, 1)
    assert modified
    assert block.pair(p) == pytest.approx((1.0, 3.01))

    block, modified = embed_bit(_coeffs(6, 2.0, 2.0, p), p, 0)
    assert modified
    assert block.pair(p) == pytest.approx((2.01, 2.0))


def test_read_bit_examples():
    p = EmbedParams(m=6)
    assert read_bit(_coeffs(6, 1.0, 3.01, p), p) == 1
    assert read_bit(_coeffs(6, 3.0, 1.0, p), p) == 0
    assert read_bit(_coeffs(6, 2.0, 2.0, p), p) == 0


def test_reverse_bit_examples():
    p = EmbedParams(m=6, th=0.01)
    assert reverse_bit(_coeffs(6, 2.01, 1.0, p), p, 0).pair(p) == pytest.approx((1.0, 2.0))
    assert reverse_bit(_coeffs(6, 1.0, 2.01, p), p, 1).pair(p) == pytest.approx((2.0, 1.0))


def _embed_then_read(m, rng, pairs):
    p = EmbedParams(m=m)
    for _ in range(pairs):
        c = CoeffBlock(rng.normal(0, 20, size=(m, m)))
        bit = int(rng.integers(0, 2))
        out, modified = embed_bit(c, p, bit)
        assert read_bit(out, p) == bit
        if modified:
            upper, lower = out.pair(p)
            assert abs(upper - lower) >= p.th - 1e-12
            changed = out.coeffs != c.coeffs
            changed[p.upper] = changed[p.lower] = False
            assert not changed.any()
        else:
            assert out == c


@pytest.mark.parametrize("m", BLOCK_SIZES)
def test_embed_then_read(m, rng):
    _embed_then_read(m, rng, 2000)


@pytest.mark.slow
@pytest.mark.parametrize("m", BLOCK_SIZES)
def test_embed_then_read_at_scale(m):
    _embed_then_read(m, np.random.default_rng(m), 100_000)


@pytest.mark.parametrize("bit", [0, 1])
def test_reverse_undoes_embed(bit, rng):
    p = EmbedParams(m=8)
    for _ in range(500):
        c = CoeffBlock(rng.normal(0, 20, size=(8, 8)))
        out, modified = embed_bit(c, p, bit)
        if modified:
            npt.assert_allclose(reverse_bit(out, p, bit).coeffs, c.coeffs, atol=1e-12)


def test_quantize_block():
    npt.assert_array_equal(quantize_block([[127.5, -3.2], [260.0, 42.0]]), [[128, 0], [255, 42]])
    assert quantize_block(np.zeros((2, 2))).dtype == np.uint8


def test_embed_samples_unmodified_block_is_returned_as_is(rng):
    p = EmbedParams(m=6)
    block = rng.integers(0, 256, size=(6, 6)).astype(np.uint8)
    upper, lower = dct2(block).pair(p)
    assert upper != lower
    result = embed_samples(block, p, read_bit(dct2(block), p), guard_retries=64)
    assert not result.modified
    assert result.increments == 0
    npt.assert_array_equal(result.samples, block)


@pytest.mark.parametrize("m", BLOCK_SIZES)
def test_guard_makes_bits_survive_quantization(m, rng):
    p = EmbedParams(m=m)
    for _ in range(300):
        block = rng.integers(16, 240, size=(m, m)).astype(np.uint8)
        bit = int(rng.integers(0, 2))
        result = embed_samples(block, p, bit, guard_retries=64)
        assert result.samples.dtype == np.uint8
        assert read_bit(dct2(result.samples), p) == bit


def test_guard_retries_widen_the_margin():
    # A constant block cannot hold bit 1 at th=0.01 once rounded.
    p = EmbedParams(m=6, th=0.01)
    block = np.full((6, 6), 128, dtype=np.uint8)
    result = embed_samples(block, p, 1, guard_retries=64)
    assert result.increments > 1
    assert read_bit(dct2(result.samples), p) == 1
    assert np.max(np.abs(result.samples.astype(int) - 128)) <= 2


def test_no_guard_keeps_the_literal_result():
    p = EmbedParams(m=6, th=0.01)
    block = np.full((6, 6), 128, dtype=np.uint8)
    result = embed_samples(block, p, 1, guard_retries=0)
    assert result.increments == 1
    npt.assert_array_equal(result.samples, block)
    assert read_bit(dct2(result.samples), p) == 0


def test_guard_exhaustion():
    p = EmbedParams(m=6, th=1e-9)
    with pytest.raises(GuardExhaustedError):
        embed_samples(np.full((6, 6), 128, dtype=np.uint8), p, 1, guard_retries=2)
