"""A fixed public code for the equality demo: Reed-Solomon over GF(256),
expanded to 0/1 vectors with one-hot symbol indicators.

Messages of k bytes are evaluated as polynomials at the first 2k powers of
the field generator, so two distinct messages agree on at most k-1 of the 2k
codeword symbols (a degree-(k-1) polynomial has at most k-1 roots).  The
one-hot expansion turns symbol agreement into a bit inner product: equal
inputs give <X, Y> = 2k, unequal at most k-1, a certified constant-factor
gap regardless of where the inputs differ.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

__all__ = ["rs_encode", "encode_bits", "gap_thresholds", "SYMBOL_SPACE"]

SYMBOL_SPACE = 256
_PRIM_POLY = 0x11D

_EXP = np.zeros(510, dtype=np.int64)
_LOG = np.zeros(256, dtype=np.int64)


def _build_tables():
    x = 1
    for i in range(255):
        _EXP[i] = x
        _LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= _PRIM_POLY
    _EXP[255:510] = _EXP[0:255]


_build_tables()


def _gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(_EXP[_LOG[a] + _LOG[b]])


def rs_encode(message: bytes, n_sym: int) -> list[int]:
    """Evaluate the message polynomial at the first n_sym generator powers."""
    k = len(message)
    if k == 0:
        raise ParameterError("empty message")
    if n_sym < k:
        raise ParameterError(f"need n_sym >= message length, got {n_sym} < {k}")
    if n_sym > 255:
        raise ParameterError(f"at most 255 evaluation points, got {n_sym}")
    out = []
    for i in range(n_sym):
        point = int(_EXP[i % 255]) if i else 1
        acc = 0
        for coef in reversed(message):
            acc = _gf_mul(acc, point) ^ coef
        out.append(acc)
    return out


def _bits_to_bytes(bits: np.ndarray) -> bytes:
    padded = np.zeros(((bits.size + 7) // 8) * 8, dtype=np.uint8)
    padded[: bits.size] = bits
    return bytes(np.packbits(padded))


def encode_bits(bits) -> np.ndarray:
    """Encode a bit string into a 0/1 vector of length 256 * (2 * ceil(len/8)).

    Each codeword symbol becomes a one-hot block of 256 bits, so the encoding
    has weight exactly n_sym and pairwise inner products count agreeing
    symbols.
    """
    if isinstance(bits, str):
        arr = np.array([int(ch) for ch in bits], dtype=np.uint8)
    else:
        arr = np.asarray(bits, dtype=np.uint8)
    if arr.size == 0:
        raise ParameterError("empty input")
    if np.any(arr > 1):
        raise ParameterError("input must be 0/1")
    msg = _bits_to_bytes(arr)
    n_sym = 2 * len(msg)
    symbols = rs_encode(msg, n_sym)
    out = np.zeros(n_sym * SYMBOL_SPACE, dtype=np.uint8)
    for i, sym in enumerate(symbols):
        out[i * SYMBOL_SPACE + sym] = 1
    return out


def gap_thresholds(input_bits: int) -> tuple[float, float]:
    """(c, s) such that equal inputs land at or above c*n and unequal below s*n.

    With k message bytes: equal encodings share all 2k symbols; distinct ones
    share at most k-1. Choosing c*n = 1.5k and s*n = k splits the two regimes
    with slack on both sides.
    """
    k = (input_bits + 7) // 8
    n = 2 * k * SYMBOL_SPACE
    return 1.5 * k / n, float(k) / n
