"""The public equality code: field arithmetic, distance, one-hot expansion."""

import numpy as np
import pytest

from isrlab.codes import SYMBOL_SPACE, encode_bits, gap_thresholds, rs_encode
from isrlab.errors import ParameterError
from isrlab.randsource import stream_key, uniforms


def _gf_mul_slow(a: int, b: int) -> int:
    # russian-peasant multiplication mod x^8 + x^4 + x^3 + x^2 + 1
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
        b >>= 1
    return r


def _gf_pow_slow(a: int, e: int) -> int:
    r = 1
    for _ in range(e):
        r = _gf_mul_slow(r, a)
    return r


def _eval_poly_slow(message: bytes, point: int) -> int:
    # message[i] is the coefficient of x^i
    acc = 0
    for coef in reversed(message):
        acc = _gf_mul_slow(acc, point) ^ coef
    return acc


def _random_bits(seed: int, length: int) -> np.ndarray:
    return (uniforms(stream_key(seed, 1), 0, length) < 0.5).astype(np.uint8)


def test_rs_encode_matches_slow_field_arithmetic():
    msg = bytes([7, 0, 255, 19])
    got = rs_encode(msg, 8)
    for i, sym in enumerate(got):
        assert sym == _eval_poly_slow(msg, _gf_pow_slow(2, i))
    assert all(0 <= sym < 256 for sym in got)


def test_rs_encode_is_gf2_linear():
    a = bytes([1, 2, 3])
    b = bytes([200, 17, 90])
    xored = bytes(x ^ y for x, y in zip(a, b))
    ca = rs_encode(a, 6)
    cb = rs_encode(b, 6)
    cx = rs_encode(xored, 6)
    assert [x ^ y for x, y in zip(ca, cb)] == cx


def test_rs_encode_validation():
    with pytest.raises(ParameterError):
        rs_encode(b"", 4)
    with pytest.raises(ParameterError):
        rs_encode(b"abcd", 3)
    with pytest.raises(ParameterError):
        rs_encode(b"a", 256)


def test_distinct_messages_agree_on_few_symbols():
    # degree k-1 polynomials: at most k-1 up of the 2k evaluations can match
    for seed in range(40):
        u = uniforms(stream_key(seed, 2), 0, 8)
        a = bytes(int(v * 256) for v in u[:4])
        b = bytes(int(v * 256) for v in u[4:])
        if a == b:
            continue
        ca = rs_encode(a, 8)
        cb = rs_encode(b, 8)
        agree = sum(1 for x, y in zip(ca, cb) if x == y)
        assert agree <= 3


def test_encode_bits_shape_and_weight():
    vec = encode_bits("10110001")  # one byte -> 2 symbols
    assert vec.shape == (2 * SYMBOL_SPACE,)
    blocks = vec.reshape(2, SYMBOL_SPACE)
    assert np.all(blocks.sum(axis=1) == 1)
    # 9 bits pad up to 2 bytes -> 4 symbols
    assert encode_bits("101100011").size == 4 * SYMBOL_SPACE
    assert np.array_equal(encode_bits("1010"), encode_bits([1, 0, 1, 0]))
    with pytest.raises(ParameterError):
        encode_bits("")
    with pytest.raises(ParameterError):
        encode_bits([0, 2, 1])


def test_encoded_inner_products_realize_the_gap():
    for seed in range(25):
        bits_a = _random_bits(seed, 32)
        bits_b = _random_bits(seed + 1000, 32)
        xa = encode_bits(bits_a)
        xb = encode_bits(bits_b)
        c, s = gap_thresholds(32)
        n = xa.size
        ip_equal = int(np.dot(xa.astype(np.int64), xa.astype(np.int64)))
        assert ip_equal == 8  # 2k symbols, k = 4 bytes
        assert ip_equal >= c * n
        if not np.array_equal(bits_a, bits_b):
            ip = int(np.dot(xa.astype(np.int64), xb.astype(np.int64)))
            assert ip <= 3
            assert ip < s * n


def test_gap_thresholds_scale():
    c, s = gap_thresholds(128)  # 16 bytes, n = 32 * 256
    assert c == pytest.approx(1.5 * 16 / 8192)
    assert s == pytest.approx(16 / 8192)
    assert 0 < s < c
