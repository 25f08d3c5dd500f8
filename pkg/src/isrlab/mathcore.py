"""Entropy, Hamming distance, and Boolean-function analysis primitives.

Functions on {0,1}^n are stored as dense tables of length 2^n under the
product measure Bern(p)^n.  Coordinate i (1-indexed) corresponds to bit
(i-1) of the table index, so index 0 is the all-zeros point.  The Fourier
basis for a single coordinate is chi_0 = 1, chi_1(x) = (x - p)/sqrt(p(1-p)),
which reduces to the familiar +-1 characters at p = 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ParameterError

__all__ = [
    "BooleanFn",
    "FourierExpansion",
    "binary_entropy",
    "hamming",
    "fourier_expand",
    "influence",
    "low_degree_influence",
    "count_influential",
    "noise_operator",
]

_MAX_N = 20


def binary_entropy(x):
    """Binary entropy h(x) = -x log2 x - (1-x) log2(1-x), h(0)=h(1)=0.

    Accepts a scalar or an array; raises on values outside [0, 1].
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ParameterError(f"binary_entropy domain is [0, 1], got {x!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -arr * np.log2(arr) - (1.0 - arr) * np.log2(1.0 - arr)
    h = np.where((arr == 0.0) | (arr == 1.0), 0.0, h)
    return float(h) if np.isscalar(x) or arr.ndim == 0 else h


def _as_bits(u) -> np.ndarray:
    if isinstance(u, str):
        return np.array([int(c) for c in u], dtype=np.int8)
    return np.asarray(u)


def hamming(u, v) -> int:
    """Number of coordinates where two equal-length vectors differ."""
    a = _as_bits(u)
    b = _as_bits(v)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def _popcounts(size: int) -> np.ndarray:
    """Popcount of every index in [0, size), vectorized (SWAR on int64)."""
    v = np.arange(size, dtype=np.int64)
    v = v - ((v >> 1) & 0x5555555555555555)
    v = (v & 0x3333333333333333) + ((v >> 2) & 0x3333333333333333)
    v = (v + (v >> 4)) & 0x0F0F0F0F0F0F0F0F
    return (v * 0x0101010101010101) >> 56


@dataclass(frozen=True)
class BooleanFn:
    """Immutable real-valued function on {0,1}^n with product measure Bern(p)^n."""

    values: np.ndarray
    p: float = 0.5
    range_bounded: bool = False
    n: int = field(init=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        size = vals.size
        n = size.bit_length() - 1
        if size < 2 or (1 << n) != size:
            raise ParameterError(f"table length must be a power of two >= 2, got {size}")
        if n > _MAX_N:
            raise ParameterError(f"n is capped at {_MAX_N}, got {n}")
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"p must lie strictly inside (0, 1), got {self.p}")
        if self.range_bounded and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ParameterError("range-bounded function has values outside [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "n", n)

    @cached_property
    def point_weights(self) -> np.ndarray:
        """Probability of each point x under Bern(p)^n."""
        ones = _popcounts(1 << self.n)
        return (self.p**ones) * ((1.0 - self.p) ** (self.n - ones))

    def expectation(self) -> float:
        return float(self.point_weights @ self.values)

    @cached_property
    def expansion(self) -> "FourierExpansion":
        return fourier_expand(self)


@dataclass(frozen=True)
class FourierExpansion:
    """Coefficients h_hat[S] indexed by the subset bitmask S, plus the basis p."""

    coeffs: np.ndarray
    basis_p: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size.bit_length() - 1

    def evaluate(self) -> BooleanFn:
        """Reconstruct the function table from the coefficients."""
        p = self.basis_p
        chi0 = -math.sqrt(p / (1.0 - p))
        chi1 = math.sqrt((1.0 - p) / p)
        table = self.coeffs.copy()
        n = self.n
        for i in range(n):
            shaped = table.reshape(-1, 2, 1 << i)
            a = shaped[:, 0, :]
            b = shaped[:, 1, :]
            h0 = a + chi0 * b
            h1 = a + chi1 * b
            shaped[:, 0, :] = h0
            shaped[:, 1, :] = h1
        return BooleanFn(table, p=p)


def fourier_expand(f: BooleanFn) -> FourierExpansion:
    """Multilinear expansion of f in the chi basis (coefficient per subset)."""
    p = f.p
    scale = math.sqrt(p * (1.0 - p))
    table = f.values.copy()
    for i in range(f.n):
        shaped = table.reshape(-1, 2, 1 << i)
        h0 = shaped[:, 0, :].copy()
        h1 = shaped[:, 1, :]
        shaped[:, 0, :] = (1.0 - p) * h0 + p * h1
        shaped[:, 1, :] = scale * (h1 - h0)
    return FourierExpansion(table, basis_p=p)


def _check_coord(f: BooleanFn, i: int) -> int:
    if not 1 <= i <= f.n:
        raise ParameterError(f"coordinate must lie in 1..{f.n}, got {i}")
    return i - 1


def influence(f: BooleanFn, i: int) -> float:
    """Influence of coordinate i: the squared Fourier mass on sets containing i."""
    bit = _check_coord(f, i)
    coeffs = f.expansion.coeffs
    idx = np.arange(coeffs.size)
    mask = (idx >> bit) & 1 == 1
    return float(np.sum(coeffs[mask] ** 2))


def low_degree_influence(f: BooleanFn, i: int, d: int) -> float:
    """Influence restricted to sets of size at most d that contain i."""
    bit = _check_coord(f, i)
    if d < 1:
        raise ParameterError(f"degree must be >= 1, got {d}")
    coeffs = f.expansion.coeffs
    idx = np.arange(coeffs.size)
    sizes = _popcounts(coeffs.size)
    mask = (((idx >> bit) & 1) == 1) & (sizes <= d)
    return float(np.sum(coeffs[mask] ** 2))


def count_influential(f: BooleanFn, tau: float, d: int) -> int:
    """How many coordinates have degree-d influence exceeding tau.

    For functions with range inside [-1, 1] the count never exceeds d/tau,
    since the total degree-<=d influence is at most d * E[f^2] <= d.
    """
    if tau <= 0.0:
        raise ParameterError(f"threshold must be positive, got {tau}")
    return sum(
        1 for i in range(1, f.n + 1) if low_degree_influence(f, i, d) > tau
    )


def noise_operator(f: BooleanFn, eta: float) -> BooleanFn:
    """Per-coordinate resampling: with probability eta coordinate i is redrawn.

    Implemented directly on the table (coordinate-by-coordinate averaging),
    not through the Fourier side, so the damped-coefficient identity can be
    checked against it independently.
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    p = f.p
    table = f.values.copy()
    for i in range(f.n):
        shaped = table.reshape(-1, 2, 1 << i)
        h0 = shaped[:, 0, :].copy()
        h1 = shaped[:, 1, :]
        mean = (1.0 - p) * h0 + p * h1
        shaped[:, 0, :] = (1.0 - eta) * h0 + eta * mean
        shaped[:, 1, :] = (1.0 - eta) * h1 + eta * mean
    return BooleanFn(table, p=p, range_bounded=f.range_bounded)
