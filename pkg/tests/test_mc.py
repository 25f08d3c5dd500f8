"""Confidence-interval and parallel-map plumbing."""

import math

import pytest
import scipy.stats

from isrlab.mc import binom_tail_at_least, majority_success_prob, parallel_map, wilson_interval


def test_wilson_matches_scipy_at_exact_z():
    z = scipy.stats.norm.ppf(0.975)
    for successes, trials in ((0, 50), (3, 50), (25, 50), (50, 50), (490, 1000)):
        lo, hi = wilson_interval(successes, trials, z=z)
        ref = scipy.stats.binomtest(successes, trials).proportion_ci(
            confidence_level=0.95, method="wilson"
        )
        assert lo == pytest.approx(ref.low, abs=1e-12)
        assert hi == pytest.approx(ref.high, abs=1e-12)


def test_wilson_basic_shape():
    lo, hi = wilson_interval(0, 0)
    assert (lo, hi) == (0.0, 1.0)
    lo, hi = wilson_interval(0, 20)
    assert lo == 0.0 and hi > 0.0
    lo, hi = wilson_interval(20, 20)
    assert hi == pytest.approx(1.0) and lo < 1.0
    lo, hi = wilson_interval(7, 20)
    assert lo < 7 / 20 < hi
    # wider z, wider interval
    lo1, hi1 = wilson_interval(7, 20, z=1.0)
    assert lo1 > lo and hi1 < hi


def test_binom_tail_matches_scipy():
    for n, k, p in ((10, 0, 0.3), (10, 4, 0.3), (33, 17, 0.8), (50, 51, 0.5)):
        ref = scipy.stats.binom.sf(k - 1, n, p) if k <= n else 0.0
        assert binom_tail_at_least(n, k, p) == pytest.approx(ref, abs=1e-12)
    assert binom_tail_at_least(5, 0, 0.2) == 1.0


def test_majority_success_prob():
    p = 0.7
    assert majority_success_prob(p, 1) == pytest.approx(p)
    three = 3 * p * p * (1 - p) + p**3
    assert majority_success_prob(p, 3) == pytest.approx(three, abs=1e-12)
    # amplification: above one half, more repetitions help
    seq = [majority_success_prob(0.6, r) for r in (1, 5, 21, 101)]
    assert all(b > a for a, b in zip(seq, seq[1:]))
    assert majority_success_prob(0.5, 99) == pytest.approx(0.5, abs=1e-9)


def _square(x):
    return x * x


def test_parallel_map_is_order_preserving():
    args = list(range(37))
    serial = parallel_map(_square, args, jobs=1)
    assert serial == [x * x for x in args]
    parallel = parallel_map(_square, args, jobs=3)
    assert parallel == serial
    assert parallel_map(_square, [], jobs=4) == []
    assert parallel_map(_square, [6], jobs=4) == [36]
