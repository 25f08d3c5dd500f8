"""Small shared Monte Carlo utilities: intervals, tails, parallel trial maps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

__all__ = [
    "wilson_interval",
    "binom_tail_at_least",
    "majority_success_prob",
    "parallel_map",
]


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score 95% interval (default z) for a binomial proportion.

    Zero trials returns the vacuous interval (0, 1).
    """
    if trials < 0 or successes < 0 or successes > trials:
        raise ValueError(f"bad counts: {successes}/{trials}")
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    z2n = z * z / trials
    denom = 1.0 + z2n
    center = (phat + 0.5 * z2n) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + 0.25 * z2n / trials)
    return (max(0.0, center - half), min(1.0, center + half))


def binom_tail_at_least(n: int, k: int, p: float) -> float:
    """P[Binomial(n, p) >= k], computed exactly from binomial coefficients."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    total = 0.0
    for j in range(k, n + 1):
        total += math.comb(n, j) * (p**j) * ((1.0 - p) ** (n - j))
    return min(1.0, total)


def majority_success_prob(p: float, reps: int) -> float:
    """Probability that more than half of `reps` independent shots succeed."""
    return binom_tail_at_least(reps, reps // 2 + 1, p)


def parallel_map(fn, args_list, jobs: int = 1):
    """Map fn over args, optionally across processes, preserving input order.

    Each arg is a single picklable object. Deterministic independent of jobs:
    results come back in input order and every trial derives its own seed.
    """
    args_list = list(args_list)
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    chunk = max(1, len(args_list) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args_list, chunksize=chunk))
