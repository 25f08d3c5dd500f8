"""Agreement distillation from correlated bits via random parity syndromes.

Alice keeps her raw k bits (so their min-entropy is k by construction) and
sends the syndrome under a shared random parity matrix; Bob searches the
Hamming ball around his noisy copy for the unique string with that syndrome.
A zero-communication baseline (both parties output their first k bits) is
included for the trade-off sweeps.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import mc
from .errors import ParameterError
from .mathcore import binary_entropy
from .randsource import (
    KIND_MATRIX,
    CorrelatedSource,
    PARTY_B,
    corr_bits,
    derive_seed,
    make_pair,
    raw64,
    stream_key,
)

__all__ = [
    "ParityMatrix",
    "AgreeOutcome",
    "gen_matrix",
    "alice_step",
    "bob_decode",
    "first_k_baseline",
    "sweep_tradeoff",
]


@dataclass(frozen=True)
class ParityMatrix:
    """A random ell x k matrix over GF(2)."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8)
        if b.ndim != 2:
            raise ParameterError("parity matrix must be 2-d")
        if np.any(b > 1):
            raise ParameterError("parity matrix entries must be 0/1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def ell(self) -> int:
        return self.bits.shape[0]

    @property
    def k(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class AgreeOutcome:
    wA: np.ndarray
    wB: np.ndarray
    sentBits: int
    agreed: bool


def gen_matrix(seed: int, k: int, eps: float, mu: float) -> ParityMatrix:
    """Uniform parity matrix with ell = ceil(h(mu + eps) * k) rows."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if not 0.0 <= mu + eps <= 1.0 or mu < 0.0 or eps < 0.0:
        raise ParameterError(f"need 0 <= mu + eps <= 1, got mu={mu}, eps={eps}")
    if mu + eps >= 0.5:
        raise ParameterError(f"mu + eps must stay below 1/2, got {mu + eps}")
    ell = math.ceil(binary_entropy(mu + eps) * k)
    if ell >= k:
        warnings.warn(
            f"syndrome length {ell} >= k={k}: no communication savings",
            stacklevel=2,
        )
    words = raw64(stream_key(seed, KIND_MATRIX), np.arange(ell * k, dtype=np.uint64))
    return ParityMatrix((words & np.uint64(1)).astype(np.uint8).reshape(ell, k))


def alice_step(r: np.ndarray, h: ParityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Alice outputs her raw bits and communicates the syndrome H r."""
    r = np.asarray(r, dtype=np.uint8)
    if r.shape != (h.k,):
        raise ParameterError(f"r has shape {r.shape}, matrix expects ({h.k},)")
    y = (h.bits @ r) & 1
    return r, y.astype(np.uint8)


def _ball_solutions(
    r_prime: np.ndarray, y: np.ndarray, h: ParityMatrix, radius: int
) -> list[np.ndarray]:
    """All strings within `radius` flips of r_prime whose syndrome equals y.

    Error patterns are enumerated by increasing weight; the full ball is
    scanned because the caller needs uniqueness over the whole ball.
    """
    base = (h.bits @ r_prime) & 1
    target = np.asarray(y, dtype=np.uint8)
    cols = h.bits
    out = []
    for w in range(radius + 1):
        for pattern in itertools.combinations(range(h.k), w):
            syn = base.copy()
            for i in pattern:
                syn ^= cols[:, i]
            if np.array_equal(syn & 1, target):
                cand = r_prime.copy()
                cand[list(pattern)] ^= 1
                out.append(cand)
    return out


def bob_decode(
    r_prime: np.ndarray, y: np.ndarray, h: ParityMatrix, radius: int
) -> np.ndarray:
    """The unique ball solution if there is exactly one, else r_prime itself."""
    r_prime = np.asarray(r_prime, dtype=np.uint8)
    if r_prime.shape != (h.k,):
        raise ParameterError(f"r' has shape {r_prime.shape}, matrix expects ({h.k},)")
    if np.asarray(y).shape != (h.ell,):
        raise ParameterError("syndrome length does not match the matrix")
    solutions = _ball_solutions(r_prime, y, h, radius)
    if len(solutions) == 1:
        return solutions[0]
    return r_prime


def _bits01(src: CorrelatedSource, offset: int, count: int) -> np.ndarray:
    # map +-1 source bits to 0/1 (plus -> 0) for GF(2) work
    return ((1 - corr_bits(src, offset, count)) // 2).astype(np.uint8)


def first_k_baseline(src: CorrelatedSource, k: int) -> AgreeOutcome:
    """Zero-communication baseline: both parties output their first k bits."""
    if k < 0:
        raise ParameterError(f"k must be >= 0, got {k}")
    pair_a, pair_b = make_pair(src.seed, src.rho)
    wa = _bits01(pair_a, 0, k)
    wb = _bits01(pair_b, 0, k)
    return AgreeOutcome(wa, wb, 0, bool(np.array_equal(wa, wb)))


def distill_once(
    src_a: CorrelatedSource,
    src_b: CorrelatedSource,
    h: ParityMatrix,
    radius: int,
) -> AgreeOutcome:
    """One protocol round: syndrome from Alice, ball decode at Bob."""
    r = _bits01(src_a, 0, h.k)
    r_prime = _bits01(src_b, 0, h.k)
    wa, y = alice_step(r, h)
    wb = bob_decode(r_prime, y, h, radius)
    return AgreeOutcome(wa, wb, h.ell, bool(np.array_equal(wa, wb)))


def _sweep_trial(args) -> bool:
    k, rho, h, radius, master_seed, row, t = args
    src_a, src_b = make_pair(derive_seed(master_seed, row, t), rho)
    return distill_once(src_a, src_b, h, radius).agreed


def sweep_tradeoff(
    k: int,
    rho: float,
    eps_grid,
    trials: int,
    master_seed: int,
    jobs: int = 1,
) -> list[dict]:
    """One row per eps: syndrome length vs empirical agreement rate."""
    eps_list = list(eps_grid)
    if not eps_list:
        raise ParameterError("eps grid must be nonempty")
    mu = 0.5 * (1.0 - rho)
    rows = []
    for row_idx, eps in enumerate(eps_list):
        h = gen_matrix(derive_seed(master_seed, row_idx), k, eps, mu)
        radius = math.floor((mu + eps) * k)
        args = [
            (k, rho, h, radius, master_seed, row_idx, t) for t in range(trials)
        ]
        agreed = sum(mc.parallel_map(_sweep_trial, args, jobs=jobs))
        lo, hi = mc.wilson_interval(agreed, trials)
        rows.append(
            {
                "k": k,
                "rho": rho,
                "eps": eps,
                "ell": h.ell,
                "trials": trials,
                "rate": agreed / trials if trials else math.nan,
                "ci_lo": lo,
                "ci_hi": hi,
            }
        )
    return rows
