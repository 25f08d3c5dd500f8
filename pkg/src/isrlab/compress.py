"""Compression against mismatched priors over a noisy shared dictionary.

Alice encodes message m as a prefix of the dictionary word indexed by m, with
a length that charges log2(1/P(m)) plus slack for the prior mismatch and the
dictionary noise; Bob decodes by scanning his (coordinate-wise correlated)
copy of the dictionary for words within a Hamming radius of the received
prefix and keeping the one his own prior Q likes best.

The dictionary-size slack constant: c = ceil((kappa/eps'^2) * ln(2/delta))
with kappa = 3 by default, the Chernoff exponent that makes the true message
survive the radius test with probability at least 1 - delta/2. kappa is a
field of CompressParams for anyone who wants a different tradeoff.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit

from . import mc
from .errors import ConfigError, ParameterError
from .mathcore import binary_entropy
from .randsource import (
    KIND_DICT,
    KIND_MESSAGE,
    MASK64,
    CorrelatedSource,
    PARTY_B,
    _mix64_np,
    _CHAIN,
    _GOLDEN,
    derive_seed,
    dictionary_word,
    make_pair,
    stream_key,
    uniforms,
)

__all__ = [
    "ProbVec",
    "CompressParams",
    "FAILURE",
    "solve_epsilon_prime",
    "encode",
    "decode",
    "run_compression_experiment",
    "load_probvec",
    "geometric_probvec",
    "perturb_probvec",
]


class _Failure:
    __slots__ = ()

    def __repr__(self):
        return "Failure"


#: Decode result when no dictionary word survives the radius test.
FAILURE = _Failure()


@dataclass(frozen=True)
class ProbVec:
    """A probability distribution over the message universe [0, n)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ParameterError("ProbVec needs a nonempty 1-d array")
        if np.any(p < 0.0):
            raise ParameterError("probabilities must be nonnegative")
        total = float(p.sum())
        if not (1.0 - 1e-9 <= total <= 1.0 + 1e-9):
            raise ParameterError(f"probabilities sum to {total}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.size

    @cached_property
    def entropy(self) -> float:
        """Shannon entropy in bits."""
        p = self.probs[self.probs > 0.0]
        return float(-(p * np.log2(p)).sum())

    @cached_property
    def _cum(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def sample(self, u: float) -> int:
        """Inverse-CDF sample from a uniform in (0, 1)."""
        return int(np.searchsorted(self._cum, u, side="right").clip(0, self.n - 1))

    def log_ratio_bound(self, other: "ProbVec") -> float:
        """max_i |log2(P_i / Q_i)| over the union of supports (inf if one-sided zero)."""
        p, q = self.probs, other.probs
        if p.size != q.size:
            raise ParameterError("distributions live on different universes")
        both = (p > 0) & (q > 0)
        onesided = (p > 0) != (q > 0)
        if np.any(onesided):
            return math.inf
        if not np.any(both):
            return 0.0
        return float(np.abs(np.log2(p[both] / q[both])).max())


def load_probvec(path) -> ProbVec:
    """Load a distribution from a JSON array or whitespace-separated text file."""
    text = Path(path).read_text()
    try:
        if text.lstrip().startswith(("[", "{")):
            data = json.loads(text)
            if isinstance(data, dict):
                data = data["probs"]
        else:
            data = [float(tok) for tok in text.split()]
        return ProbVec(np.asarray(data, dtype=np.float64))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"cannot load distribution from {path}: {exc}") from exc


def geometric_probvec(n: int, rate: float = 0.958) -> ProbVec:
    """Truncated geometric distribution p_i proportional to rate**i."""
    if not 0.0 < rate < 1.0:
        raise ParameterError(f"rate must lie in (0, 1), got {rate}")
    w = rate ** np.arange(n, dtype=np.float64)
    return ProbVec(w / w.sum())


def perturb_probvec(p: ProbVec, delta_bound: float, seed: int) -> ProbVec:
    """A Q with |log2(P_i/Q_i)| <= delta_bound, seeded and deterministic.

    Each weight is multiplied by 2**u_i with u_i uniform in
    [-delta_bound/2, +delta_bound/2]; renormalizing shifts every log-ratio by
    the same log2(Z) with |log2(Z)| <= delta_bound/2, so the promise holds.
    """
    if delta_bound < 0:
        raise ParameterError("delta_bound must be >= 0")
    u = uniforms(stream_key(seed, KIND_MESSAGE, 1), 0, p.n)
    expo = (u - 0.5) * delta_bound
    w = p.probs * np.exp2(expo)
    return ProbVec(w / w.sum())


def solve_epsilon_prime(eps: float, mu: float) -> float:
    """Slack eps' with 1/(1 - h(mu + eps')) = (1 + eps)/(1 - h(mu)), by bisection."""
    if eps <= 0.0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if not 0.0 <= mu < 0.5:
        raise ParameterError(f"mu must lie in [0, 1/2), got {mu}")
    target = 1.0 - (1.0 - binary_entropy(mu)) / (1.0 + eps)
    if target >= 1.0:
        raise ParameterError(
            f"infeasible slack equation: required entropy {target} >= 1"
        )
    lo, hi = mu, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < target:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    residual = 1.0 / (1.0 - binary_entropy(z)) - (1.0 + eps) / (1.0 - binary_entropy(mu))
    if abs(residual) > 1e-9:
        raise ParameterError(f"slack equation residual {residual} too large")
    return z - mu


@dataclass(frozen=True)
class CompressParams:
    """Protocol parameters plus the derived quantities they pin down."""

    rho: float
    eps: float
    delta: float
    delta_log_bound: float
    kappa: float = 3.0
    mu: float = field(init=False)
    eps_prime: float = field(init=False)
    c: int = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must lie in [0, 1], got {self.rho}")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        if self.delta_log_bound < 0.0:
            raise ParameterError("the log-ratio bound must be >= 0")
        mu = 0.5 * (1.0 - self.rho)
        eps_prime = solve_epsilon_prime(self.eps, mu)
        c = math.ceil((self.kappa / (eps_prime * eps_prime)) * math.log(2.0 / self.delta))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "eps_prime", eps_prime)
        object.__setattr__(self, "c", c)

    @property
    def rate_factor(self) -> float:
        """(1 + eps)/(1 - h(mu)), the per-bit charge of the length formula."""
        return (1.0 + self.eps) / (1.0 - binary_entropy(self.mu))

    def word_length(self, p_m: float) -> int:
        """Encoded length for a message of prior probability p_m."""
        if p_m <= 0.0:
            raise ParameterError("message has zero prior probability")
        raw = self.rate_factor * (
            math.log2(1.0 / p_m) + 2.0 * self.delta_log_bound + math.log2(1.0 / self.delta)
        )
        return max(self.c, math.ceil(raw))

    def length_bound(self, entropy_bits: float) -> float:
        """Expected-length budget at a given source entropy."""
        return self.rate_factor * (entropy_bits + 2.0 * self.delta_log_bound + self.c)


def encode(p: ProbVec, m: int, params: CompressParams, src: CorrelatedSource) -> np.ndarray:
    """Alice's word: the length-j dictionary word for message m."""
    if not 0 <= m < p.n:
        raise ParameterError(f"message {m} outside universe [0, {p.n})")
    j = params.word_length(float(p.probs[m]))
    return dictionary_word(src, m, j)


@njit(cache=True)
def _decode_dists(keys, j, xsign, thresh):
    golden = np.uint64(0x9E3779B97F4A7C15)
    s30 = np.uint64(30)
    s27 = np.uint64(27)
    s31 = np.uint64(31)
    s11 = np.uint64(11)
    mul1 = np.uint64(0xBF58476D1CE4E5B9)
    mul2 = np.uint64(0x94D049BB133111EB)
    one = np.uint64(1)
    inv53 = 1.0 / 9007199254740992.0
    n = keys.shape[0]
    out = np.empty(n, dtype=np.int64)
    for mm in range(n):
        base = keys[mm]
        d = 0
        for k in range(j):
            z = base + (np.uint64(k) + one) * golden
            z = (z ^ (z >> s30)) * mul1
            z = (z ^ (z >> s27)) * mul2
            z = z ^ (z >> s31)
            s = np.int64(z & one)
            u = (np.float64(z >> s11) + 0.5) * inv53
            if u < thresh:
                s = 1 - s
            if s != xsign[k]:
                d += 1
        out[mm] = d
    return out


def _candidate_keys(seed: int, n: int, j: int) -> np.ndarray:
    """Stream keys of every dictionary word (i, j) for i in [0, n), vectorized.

    Must match stream_key(seed, KIND_DICT, i, j) absorb-for-absorb.
    """
    g = np.uint64(_GOLDEN)
    ch = np.uint64(_CHAIN)
    k = np.uint64(stream_key(seed, KIND_DICT))
    ids = np.arange(n, dtype=np.uint64)
    keys = _mix64_np(k ^ (ids * g + ch))
    j_word = np.uint64((j * _GOLDEN + _CHAIN) & MASK64)
    return _mix64_np(keys ^ j_word)


def decode(q: ProbVec, x: np.ndarray, params: CompressParams, src: CorrelatedSource):
    """Bob's maximum-Q decoding over the radius ball, or FAILURE if it is empty."""
    j = int(x.size)
    if j < 1:
        raise ParameterError("received word is empty")
    keys = _candidate_keys(src.seed, q.n, j)
    xsign = (np.asarray(x) < 0).astype(np.int64)
    thresh = 0.5 * (1.0 - src.rho) if src.party == PARTY_B else 0.0
    dists = _decode_dists(keys, j, xsign, thresh)
    radius = (params.mu + params.eps_prime) * j
    survivors = np.flatnonzero(dists <= radius)
    if survivors.size == 0:
        return FAILURE
    # np.argmax takes the first maximizer, which is the lowest message index
    return int(survivors[np.argmax(q.probs[survivors])])


def _compress_trial(args) -> tuple[bool, int]:
    p, q, params, master_seed, t = args
    seed_t = derive_seed(master_seed, t)
    src_a, src_b = make_pair(seed_t, params.rho)
    u = float(uniforms(stream_key(seed_t, KIND_MESSAGE), 0, 1)[0])
    m = p.sample(u)
    x = encode(p, m, params, src_a)
    decoded = decode(q, x, params, src_b)
    return decoded == m, int(x.size)


def run_compression_experiment(
    p: ProbVec,
    q: ProbVec,
    params: CompressParams,
    trials: int,
    master_seed: int,
    jobs: int = 1,
) -> dict:
    """Monte Carlo success rate and mean encoded length against the budget."""
    observed = p.log_ratio_bound(q)
    if observed > params.delta_log_bound + 1e-12:
        warnings.warn(
            f"prior mismatch {observed:.4f} exceeds the promised bound "
            f"{params.delta_log_bound}; the decoding guarantee is void",
            stacklevel=2,
        )
    results = mc.parallel_map(
        _compress_trial,
        [(p, q, params, master_seed, t) for t in range(trials)],
        jobs=jobs,
    )
    bound = params.length_bound(p.entropy)
    if trials == 0:
        return {
            "trials": 0,
            "successes": 0,
            "successRate": math.nan,
            "ciLo": 0.0,
            "ciHi": 1.0,
            "meanLength": math.nan,
            "lengthBound": bound,
        }
    successes = sum(1 for ok, _ in results if ok)
    lengths = [ln for _, ln in results]
    lo, hi = mc.wilson_interval(successes, trials)
    return {
        "trials": trials,
        "successes": successes,
        "successRate": successes / trials,
        "ciLo": lo,
        "ciHi": hi,
        "meanLength": sum(lengths) / trials,
        "lengthBound": bound,
    }
