"""Gap inner-product testing under imperfectly shared randomness.

Two protocols for deciding whether two 0/1 vectors have inner product
at least c*n (yes) or below s*n (no):

* a one-message Gaussian sketch: Alice names the correlated Gaussian
  direction most aligned with her vector plus a coarse weight bucket,
  Bob thresholds his own vector's alignment with that direction;
* a one-way protocol for sparse x under perfectly shared randomness:
  both parties hold the same short list of uniform indices, Alice names
  the first one that hits her support, Bob answers with his bit there.

Also here: the product pair distributions used to generate planted
yes/no instances, a calibration-based experiment harness entry point
for each protocol, and an equality tester built by encoding the inputs
with a fixed distance code and running the Gaussian protocol on the
encodings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit

from . import codes
from .errors import ParameterError
from .mc import parallel_map, wilson_interval
from .randsource import (
    GOLDEN_NB,
    KIND_GAUSS_NOISE_B,
    KIND_GAUSS_SHARED,
    KIND_INDICES,
    KIND_INSTANCE,
    MASK64,
    PARTY_A,
    PARTY_B,
    ZIG_FN,
    ZIG_KN,
    ZIG_R,
    ZIG_WN,
    CorrelatedSource,
    _mix64_nb,
    _NB_S11,
    _TWO53_INV,
    derive_seed,
    make_pair,
    normal_support_dots,
    shared_indices,
    stream_key,
    uniforms,
)

__all__ = [
    "LABEL_YES",
    "LABEL_NO",
    "LABEL_NEITHER",
    "classify",
    "GapIPInstance",
    "make_instance",
    "PairDistribution",
    "bn_dist",
    "by_dist",
    "centered_dist",
    "sample_pair_dist",
    "sample_yes_prime",
    "ProtocolReport",
    "LiteralThreshold",
    "CalibratedThreshold",
    "DEFAULT_LITERAL_ALPHA",
    "GaussianParams",
    "gaussian_m_max",
    "gaussian_bits_sent",
    "gaussian_isr_protocol",
    "gaussian_isr_amplified",
    "run_gaussian_experiment",
    "sparse_round_count",
    "sparse_atomic_bounds",
    "sparse_recommended_reps",
    "sparse_bits_sent",
    "sparse_psr_oneway",
    "sparse_psr_repeated",
    "run_sparse_experiment",
    "equality_demo",
    "load_instance_file",
]

LABEL_YES = "yes"
LABEL_NO = "no"
LABEL_NEITHER = "neither"

DEFAULT_LITERAL_ALPHA = math.sqrt(2.0 * math.log(2.0))


# ---------------------------------------------------------------------------
# instances and classification
# ---------------------------------------------------------------------------


def _as_binary(v, name: str) -> np.ndarray:
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ParameterError(f"{name} must be nonempty")
    out = arr.astype(np.uint8)
    if np.any(out > 1):
        raise ParameterError(f"{name} must be a 0/1 vector")
    return out


def classify(x, y, q: float, c: float, s: float) -> tuple[str, bool]:
    """Label an instance exactly: yes iff <x,y> >= c*n, no iff < s*n.

    Thresholds are compared as rationals against the integer inner
    product, so boundary cases never depend on float rounding.  The
    second value reports whether x meets the sparsity promise
    ||x||^2 <= n/q.
    """
    xa = _as_binary(x, "x")
    ya = _as_binary(y, "y")
    if xa.size != ya.size:
        raise ParameterError(f"length mismatch: {xa.size} vs {ya.size}")
    n = xa.size
    ip = int(np.dot(xa.astype(np.int64), ya.astype(np.int64)))
    cn = Fraction(c) * n
    sn = Fraction(s) * n
    if ip >= cn:
        label = LABEL_YES
    elif ip < sn:
        label = LABEL_NO
    else:
        label = LABEL_NEITHER
    sparse_ok = Fraction(int(np.count_nonzero(xa))) <= Fraction(n) / Fraction(q)
    return label, sparse_ok


@dataclass(frozen=True, eq=False)
class GapIPInstance:
    x: np.ndarray
    y: np.ndarray
    n: int
    q: float
    c: float
    s: float
    label: str
    sparse_ok: bool


def make_instance(x, y, q: float, c: float, s: float) -> GapIPInstance:
    xa = _as_binary(x, "x")
    ya = _as_binary(y, "y")
    label, sparse_ok = classify(xa, ya, q, c, s)
    return GapIPInstance(xa, ya, xa.size, q, c, s, label, sparse_ok)


# ---------------------------------------------------------------------------
# pair distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairDistribution:
    """A distribution over one coordinate pair, given by four support cells."""

    kind: str
    support: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.support) != 4 or len(self.probs) != 4:
            raise ParameterError("a pair distribution has exactly four cells")
        if any(p < 0.0 for p in self.probs):
            raise ParameterError(f"negative cell probability in {self.kind}: {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ParameterError(f"cell probabilities of {self.kind} sum to {sum(self.probs)}")

    def moment(self, fn) -> float:
        return sum(p * fn(a, b) for (a, b), p in zip(self.support, self.probs))

    def mean_x(self) -> float:
        return self.moment(lambda a, b: a)

    def mean_y(self) -> float:
        return self.moment(lambda a, b: b)

    def mean_xy(self) -> float:
        return self.moment(lambda a, b: a * b)


_CELLS01 = ((0, 0), (0, 1), (1, 0), (1, 1))


def bn_dist(q: float) -> PairDistribution:
    """Background pairs: x ~ Bernoulli(1/q), y an independent fair bit."""
    if q < 1.0:
        raise ParameterError(f"background distribution needs q >= 1, got {q}")
    half_x0 = 0.5 * (1.0 - 1.0 / q)
    half_x1 = 0.5 / q
    return PairDistribution("bn", _CELLS01, (half_x0, half_x0, half_x1, half_x1))


def by_dist(q: float) -> PairDistribution:
    """Planted pairs: same marginals as bn_dist, but E[xy] = 1.95/(2q)."""
    if q < 1.95:
        raise ParameterError(f"planted distribution needs q >= 1.95, got {q}")
    probs = (
        0.5 * (1.0 - 0.05 / q),
        0.5 * (1.0 - 1.95 / q),
        0.05 / (2.0 * q),
        1.95 / (2.0 * q),
    )
    return PairDistribution("by", _CELLS01, probs)


def centered_dist(p1: float, p2: float, theta: float) -> PairDistribution:
    """Pairs on {-1,+1}^2 with E[x]=p1, E[y]=p2, E[xy]=theta."""
    support = ((-1, -1), (-1, 1), (1, -1), (1, 1))
    probs = tuple((1.0 + a * p1 + b * p2 + a * b * theta) / 4.0 for a, b in support)
    return PairDistribution("centered", support, probs)


def _sample_cells(probs: Sequence[float], n: int, key: int) -> np.ndarray:
    u = uniforms(key, 0, n)
    cum = np.cumsum(np.asarray(probs, dtype=np.float64))
    return np.minimum(np.searchsorted(cum, u, side="right"), 3)


def sample_pair_dist(dist: PairDistribution, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n i.i.d. coordinate pairs, deterministic in the seed."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    cells = _sample_cells(dist.probs, n, stream_key(seed, KIND_INSTANCE))
    xv = np.array([a for a, _ in dist.support])
    yv = np.array([b for _, b in dist.support])
    dtype = np.uint8 if xv.min() >= 0 else np.int8
    return xv.astype(dtype)[cells], yv.astype(dtype)[cells]


def sample_yes_prime(q: float, n: int, bad_set, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Planted pairs with background pairs substituted on bad_set coordinates."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    bad = np.unique(np.asarray(bad_set, dtype=np.int64)) if len(bad_set) else np.empty(0, np.int64)
    if bad.size and (bad[0] < 0 or bad[-1] >= n):
        raise ParameterError("bad_set indices out of range")
    good = by_dist(q)
    noise = bn_dist(q)
    # One shared uniform per coordinate; only the cell table switches, so
    # bad_set = empty reproduces sample_pair_dist(by_dist(q), ...) exactly.
    u = uniforms(stream_key(seed, KIND_INSTANCE), 0, n)
    cum_g = np.cumsum(np.asarray(good.probs))
    cum_b = np.cumsum(np.asarray(noise.probs))
    cells_g = np.minimum(np.searchsorted(cum_g, u, side="right"), 3)
    cells_b = np.minimum(np.searchsorted(cum_b, u, side="right"), 3)
    is_bad = np.zeros(n, dtype=bool)
    is_bad[bad] = True
    cells = np.where(is_bad, cells_b, cells_g)
    xv = np.array([a for a, _ in _CELLS01], dtype=np.uint8)
    yv = np.array([b for _, b in _CELLS01], dtype=np.uint8)
    return xv[cells], yv[cells]


# ---------------------------------------------------------------------------
# Gaussian protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolReport:
    accept: bool
    ell: int
    m: int
    bits_sent: int
    stat: Optional[float] = None
    threshold: Optional[float] = None


@dataclass(frozen=True)
class LiteralThreshold:
    """Closed-form threshold with an explicit constant alpha."""

    alpha: float = DEFAULT_LITERAL_ALPHA


@dataclass(frozen=True)
class CalibratedThreshold:
    """Fixed empirical threshold, typically a midpoint of class means."""

    threshold: float


ThresholdMode = Union[LiteralThreshold, CalibratedThreshold]


@dataclass(frozen=True)
class GaussianParams:
    c: float
    s: float
    t: int
    mode: ThresholdMode


def gaussian_m_max(c: float, s: float) -> int:
    """Largest weight bucket any 0/1 vector can occupy: ceil(100/(c-s)).

    The bucket of weight w is ceil(w / ((c-s)n/100)) <= ceil(100/(c-s))
    since w <= n, so this global bound lets both parties fix the message
    format without seeing the instance.
    """
    return math.ceil(100.0 / (c - s))


def gaussian_bits_sent(t: int, c: float, s: float) -> int:
    return math.ceil(math.log2(t)) + math.ceil(math.log2(gaussian_m_max(c, s) + 1))


def _check_thresholds(c: float, s: float):
    if not (0.0 < s < c):
        raise ParameterError(f"need 0 < s < c, got c={c}, s={s}")


def _check_pair(src_a: CorrelatedSource, src_b: CorrelatedSource):
    if src_a.party != PARTY_A or src_b.party != PARTY_B:
        raise ParameterError("protocol needs (party A, party B) sources in that order")
    if src_a.seed != src_b.seed or src_a.rho != src_b.rho:
        raise ParameterError("sources must be two views of the same seeded pair")


def _weight_bucket(wt: int, c: float, s: float, n: int) -> int:
    if wt == 0:
        return 0
    return math.ceil(wt / ((c - s) * n / 100.0))


def _m_floor(c: float, s: float) -> float:
    return 100.0 * c / (c - s)


def _literal_threshold(alpha: float, rho: float, t: int, c: float, s: float, n: int, m: int) -> float:
    if m < 1:
        return math.inf
    return (
        alpha
        * rho
        * math.sqrt(math.log2(t))
        * (c + s)
        * n
        / (2.0 * math.sqrt(m * (c - s) * (n / 100.0)))
    )


def threshold_value(mode: ThresholdMode, rho: float, t: int, c: float, s: float, n: int, m: int) -> float:
    if isinstance(mode, CalibratedThreshold):
        return mode.threshold
    if isinstance(mode, LiteralThreshold):
        return _literal_threshold(mode.alpha, rho, t, c, s, n, m)
    raise ParameterError(f"unknown threshold mode {mode!r}")


def _mapped_support(vec: np.ndarray, addr_map) -> np.ndarray:
    supp = np.flatnonzero(vec).astype(np.int64)
    if addr_map is None:
        return supp
    return np.sort(np.asarray(addr_map, dtype=np.int64)[supp])


def _gauss_keys(seed: int) -> tuple[np.uint64, np.uint64]:
    return (
        np.uint64(stream_key(seed, KIND_GAUSS_SHARED)),
        np.uint64(stream_key(seed, KIND_GAUSS_NOISE_B)),
    )


def _row_dots(key: np.uint64, n: int, rows: np.ndarray, support: np.ndarray) -> np.ndarray:
    return normal_support_dots(key, n, rows, support, ZIG_R, ZIG_KN, ZIG_WN, ZIG_FN)


def _shot_stats(seed: int, x: np.ndarray, y: np.ndarray, t: int, addr_map=None):
    """(weight of x, best row index, shared-part sum, noise-part sum).

    The two sums are Bob's statistic split along the correlated-Gaussian
    decomposition: his stream on row ell is rho*g + sqrt(1-rho^2)*g'',
    so the statistic at any correlation level is rho*s1 + sqrt(1-rho^2)*s2.
    """
    n = x.size
    addr_x = _mapped_support(x, addr_map)
    wt = int(addr_x.size)
    if wt == 0:
        return 0, -1, 0.0, 0.0
    key_sh, key_no = _gauss_keys(seed)
    dots = _row_dots(key_sh, n, np.arange(t, dtype=np.int64), addr_x)
    ell0 = int(np.argmax(dots))
    addr_y = _mapped_support(y, addr_map)
    if addr_y.size == 0:
        return wt, ell0, 0.0, 0.0
    row = np.array([ell0], dtype=np.int64)
    s1 = float(_row_dots(key_sh, n, row, addr_y)[0])
    s2 = float(_row_dots(key_no, n, row, addr_y)[0])
    return wt, ell0, s1, s2


def gaussian_isr_protocol(
    x,
    y,
    src_a: CorrelatedSource,
    src_b: CorrelatedSource,
    c: float,
    s: float,
    t: int,
    mode: ThresholdMode,
    addr_map=None,
) -> ProtocolReport:
    """One-message sketch protocol over rho-correlated Gaussian streams.

    Alice sends the index of the stream row most aligned with her support
    plus her weight bucket m; Bob rejects if m is below 100c/(c-s), and
    otherwise accepts when his own alignment with the named row clears the
    mode's threshold.  addr_map optionally relabels coordinates before
    addressing the Gaussian streams (both parties use the same map); the
    decision is invariant under any such permutation applied jointly to
    x, y and the map.
    """
    xa = _as_binary(x, "x")
    ya = _as_binary(y, "y")
    if xa.size != ya.size:
        raise ParameterError(f"length mismatch: {xa.size} vs {ya.size}")
    if t < 2:
        raise ParameterError(f"need t >= 2 rows, got {t}")
    _check_thresholds(c, s)
    _check_pair(src_a, src_b)
    n = xa.size
    bits = gaussian_bits_sent(t, c, s)
    rho = src_b.rho
    wt, ell0, s1, s2 = _shot_stats(src_a.seed, xa, ya, t, addr_map)
    m = _weight_bucket(wt, c, s, n)
    if wt == 0:
        thr = threshold_value(mode, rho, t, c, s, n, 0)
        return ProtocolReport(False, 0, 0, bits, 0.0, thr)
    stat = rho * s1 + math.sqrt(1.0 - rho * rho) * s2
    thr = threshold_value(mode, rho, t, c, s, n, m)
    accept = m >= _m_floor(c, s) and stat >= thr
    return ProtocolReport(accept, ell0 + 1, m, bits, stat, thr)


def gaussian_isr_amplified(
    x, y, srcs: tuple[CorrelatedSource, CorrelatedSource], params: GaussianParams, reps: int
) -> bool:
    """Majority vote over reps independent runs on disjoint seed derivations."""
    if reps < 1 or reps % 2 == 0:
        raise ParameterError(f"repetition count must be odd and positive, got {reps}")
    src_a, src_b = srcs
    _check_pair(src_a, src_b)
    hits = 0
    for rep in range(reps):
        pair = make_pair(derive_seed(src_a.seed, rep), src_a.rho)
        report = gaussian_isr_protocol(x, y, *pair, params.c, params.s, params.t, params.mode)
        hits += int(report.accept)
    return hits > reps // 2


# ---------------------------------------------------------------------------
# Gaussian experiment
# ---------------------------------------------------------------------------

_PHASE_CALIB = 0
_PHASE_TRIAL = 1
_PHASE_AMP = 2

_CLS_YES = 0
_CLS_NO = 1


def _class_dist(cls: int, q: float) -> PairDistribution:
    return by_dist(q) if cls == _CLS_YES else bn_dist(q)


def _gauss_trial_worker(args):
    master, phase, cls, idx, rep, q, n, t = args
    inst_seed = derive_seed(master, phase, cls, idx, 0)
    shot_seed = derive_seed(master, phase, cls, idx, 1 + rep)
    x, y = sample_pair_dist(_class_dist(cls, q), n, inst_seed)
    wt, _, s1, s2 = _shot_stats(shot_seed, x, y, t)
    return wt, s1, s2


def _stats_at_rho(rho: float, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    return rho * s1 + math.sqrt(1.0 - rho * rho) * s2


def _accepts(
    rho: float, t: int, c: float, s: float, n: int, mode_name: str, alpha: float,
    threshold: float, wt: np.ndarray, s1: np.ndarray, s2: np.ndarray,
) -> np.ndarray:
    m = np.ceil(wt / ((c - s) * n / 100.0)).astype(np.int64)
    m[wt == 0] = 0
    stat = _stats_at_rho(rho, s1, s2)
    if mode_name == "calibrated":
        thr = np.full(m.shape, threshold)
    else:
        with np.errstate(divide="ignore"):
            thr = np.where(
                m >= 1,
                alpha * rho * math.sqrt(math.log2(t)) * (c + s) * n
                / (2.0 * np.sqrt(np.maximum(m, 1) * (c - s) * (n / 100.0))),
                np.inf,
            )
    return (m >= _m_floor(c, s)) & (stat >= thr)


def run_gaussian_experiment(
    q: float,
    n: int,
    t: int,
    rhos: Sequence[float],
    trials: int,
    master_seed: int,
    mode: str = "calibrated",
    alpha: float = DEFAULT_LITERAL_ALPHA,
    c: Optional[float] = None,
    s: Optional[float] = None,
    calib_per_class: int = 256,
    amp_instances_per_class: int = 10,
    amp_reps: int = 33,
    jobs: int = 1,
) -> dict:
    """Planted-vs-background acceptance rates of the Gaussian protocol.

    trials counts single-shot protocol runs per correlation level and is
    split evenly between the planted and background classes.  All levels
    in rhos share instances and Gaussian draws: the statistic decomposes
    as rho*s1 + sqrt(1-rho^2)*s2 with class-independent (s1, s2), so one
    batch of draws yields every level's decisions (common random numbers;
    the selected row never depends on rho because Alice sees the shared
    stream unmodified).

    In calibrated mode a per-level threshold is set to the midpoint of
    the two classes' mean statistics over a dedicated calibration batch.
    The amplified phase reruns fresh instances through the odd-majority
    wrapper and reports the fraction classified correctly.
    """
    if mode not in ("calibrated", "literal"):
        raise ParameterError(f"mode must be 'calibrated' or 'literal', got {mode!r}")
    if trials < 0:
        raise ParameterError(f"trials must be >= 0, got {trials}")
    if not rhos:
        raise ParameterError("need at least one correlation level")
    for r in rhos:
        if not 0.0 <= r <= 1.0:
            raise ParameterError(f"correlation must lie in [0, 1], got {r}")
    if amp_reps % 2 == 0 or amp_reps < 1:
        raise ParameterError(f"amp_reps must be odd, got {amp_reps}")
    c = 0.9 / q if c is None else c
    s = 0.6 / q if s is None else s
    _check_thresholds(c, s)
    per_class = trials // 2
    master = int(master_seed) & MASK64

    def batch(phase, count, reps=1):
        args = [
            (master, phase, cls, idx, rep, q, n, t)
            for cls in (_CLS_YES, _CLS_NO)
            for idx in range(count)
            for rep in range(reps)
        ]
        out = parallel_map(_gauss_trial_worker, args, jobs)
        wt = np.array([r[0] for r in out], dtype=np.int64)
        s1 = np.array([r[1] for r in out])
        s2 = np.array([r[2] for r in out])
        # leading axis order: class, then instance, then repetition
        shape = (2, count, reps)
        return wt.reshape(shape), s1.reshape(shape), s2.reshape(shape)

    thresholds: dict[float, float] = {}
    if mode == "calibrated":
        cwt, cs1, cs2 = batch(_PHASE_CALIB, calib_per_class)
        for rho in rhos:
            mean_yes = float(np.mean(_stats_at_rho(rho, cs1[_CLS_YES], cs2[_CLS_YES])))
            mean_no = float(np.mean(_stats_at_rho(rho, cs1[_CLS_NO], cs2[_CLS_NO])))
            thresholds[rho] = 0.5 * (mean_yes + mean_no)

    rows = []
    if per_class > 0:
        twt, ts1, ts2 = batch(_PHASE_TRIAL, per_class)
    awt, as1, as2 = batch(_PHASE_AMP, amp_instances_per_class, amp_reps)

    for rho in rhos:
        thr = thresholds.get(rho, math.nan)
        row = {
            "rho": rho,
            "mode": mode,
            "threshold": thr,
            "trialsPerClass": per_class,
        }
        if per_class > 0:
            for cls, tag in ((_CLS_YES, "yes"), (_CLS_NO, "no")):
                acc = _accepts(
                    rho, t, c, s, n, mode, alpha, thr,
                    twt[cls, :, 0], ts1[cls, :, 0], ts2[cls, :, 0],
                )
                rate = float(np.mean(acc))
                lo, hi = wilson_interval(int(acc.sum()), per_class)
                row[f"{tag}Rate"] = rate
                row[f"{tag}Lo"] = lo
                row[f"{tag}Hi"] = hi
            row["gap"] = row["yesRate"] - row["noRate"]
        correct = 0
        for cls in (_CLS_YES, _CLS_NO):
            for idx in range(amp_instances_per_class):
                acc = _accepts(
                    rho, t, c, s, n, mode, alpha, thr,
                    awt[cls, idx], as1[cls, idx], as2[cls, idx],
                )
                majority = int(acc.sum()) > amp_reps // 2
                correct += int(majority == (cls == _CLS_YES))
        row["ampSuccess"] = correct / (2 * amp_instances_per_class)
        row["ampInstances"] = 2 * amp_instances_per_class
        row["ampReps"] = amp_reps
        rows.append(row)

    return {
        "params": {
            "q": q, "n": n, "t": t, "c": c, "s": s, "mode": mode,
            "alpha": alpha, "calibPerClass": calib_per_class if mode == "calibrated" else 0,
        },
        "mMax": gaussian_m_max(c, s),
        "mFloor": _m_floor(c, s),
        "bitsSent": gaussian_bits_sent(t, c, s),
        "rows": rows,
    }


# ---------------------------------------------------------------------------
# sparse one-way protocol (perfectly shared randomness)
# ---------------------------------------------------------------------------


def sparse_round_count(c: float, s: float) -> int:
    """Shared index count t with miss probability (1-c)^t <= (c-s)/(3c).

    Clamped to [1, 64*ceil(1/c)] so degenerate thresholds (c >= 1, or s
    pushed against c) cannot demand a pathological list length.
    """
    _check_thresholds(c, s)
    gamma = (c - s) / (3.0 * c)
    if c >= 1.0:
        t = 1
    else:
        t = math.ceil(math.log(gamma) / math.log(1.0 - c))
    return max(1, min(t, 64 * math.ceil(1.0 / c)))


def sparse_atomic_bounds(c: float, s: float, m: int) -> tuple[float, float]:
    """(yes lower bound, no upper bound) on atomic acceptance at bucket m."""
    _check_thresholds(c, s)
    if m < 2:
        raise ParameterError(f"bounds need bucket m >= 2, got {m}")
    gamma = (c - s) / (3.0 * c)
    yes_lb = (1.0 - gamma) * (c / (c - s)) * (100.0 / m)
    no_ub = (s / (c - s)) * (100.0 / (m - 1))
    return yes_lb, no_ub


def sparse_recommended_reps(m: int) -> int:
    return math.ceil(9 * m * m)


def sparse_bits_sent(t: int, c: float, s: float) -> int:
    # ell ranges over 0..t (0 is the empty-hit escape), hence t+1 values.
    return math.ceil(math.log2(t + 1)) + math.ceil(math.log2(gaussian_m_max(c, s) + 1))


def sparse_psr_oneway(x, y, shared_idx, q: float, c: float, s: float) -> ProtocolReport:
    """One atomic round: Alice names the first shared index in her support.

    Bob outputs her bit only if the escape message (0,0) was not sent and
    the weight bucket clears the floor 100c/(c-s); acceptance is Bob
    outputting 1.
    """
    xa = _as_binary(x, "x")
    ya = _as_binary(y, "y")
    if xa.size != ya.size:
        raise ParameterError(f"length mismatch: {xa.size} vs {ya.size}")
    _check_thresholds(c, s)
    idx = np.asarray(shared_idx, dtype=np.int64)
    if idx.ndim != 1 or idx.size < 1:
        raise ParameterError("shared_idx must be a nonempty index vector")
    if idx.min() < 0 or idx.max() >= xa.size:
        raise ParameterError("shared_idx out of range")
    t = int(idx.size)
    bits = sparse_bits_sent(t, c, s)
    hits = np.flatnonzero(xa[idx])
    if hits.size == 0:
        return ProtocolReport(False, 0, 0, bits)
    ell0 = int(hits[0])
    m = _weight_bucket(int(np.count_nonzero(xa)), c, s, xa.size)
    if m < _m_floor(c, s):
        return ProtocolReport(False, ell0 + 1, m, bits)
    accept = bool(ya[idx[ell0]] == 1)
    return ProtocolReport(accept, ell0 + 1, m, bits)


@njit(cache=True)
def _sparse_accept_count(key, n, t, reps, x, y):
    """Atomic rounds in bulk; round r uses index positions [r*t, (r+1)*t).

    Index derivation matches shared_indices(src, t, n, offset=r*t) word for
    word: uniform from the top 53 bits, scaled and clipped to n-1.
    """
    one = np.uint64(1)
    t_u = np.uint64(t)
    n_f = np.float64(n)
    top = n - 1
    total = 0
    for rep in range(reps):
        base = np.uint64(rep) * t_u
        for j in range(t):
            pos = base + np.uint64(j)
            raw = _mix64_nb(key + (pos + one) * GOLDEN_NB)
            u = (np.float64(raw >> _NB_S11) + 0.5) * _TWO53_INV
            idx = np.int64(u * n_f)
            if idx > top:
                idx = top
            if x[idx] == 1:
                total += np.int64(y[idx])
                break
    return total


def sparse_psr_repeated(x, y, src: CorrelatedSource, q: float, c: float, s: float, reps: int) -> bool:
    """Threshold the atomic acceptance count against the bound midpoint.

    With reps around 9*m^2 the empirical rate concentrates well inside
    whichever side of the midpoint the instance's class guarantees.
    """
    if reps < 1:
        raise ParameterError(f"need reps >= 1, got {reps}")
    if src.rho != 1.0:
        raise ParameterError("the sparse protocol requires perfectly shared randomness")
    xa = _as_binary(x, "x")
    ya = _as_binary(y, "y")
    if xa.size != ya.size:
        raise ParameterError(f"length mismatch: {xa.size} vs {ya.size}")
    _check_thresholds(c, s)
    t = sparse_round_count(c, s)
    m = _weight_bucket(int(np.count_nonzero(xa)), c, s, xa.size)
    if m < _m_floor(c, s):
        return False
    yes_lb, no_ub = sparse_atomic_bounds(c, s, m)
    midpoint = 0.5 * (yes_lb + no_ub)
    key = np.uint64(stream_key(src.seed, KIND_INDICES))
    count = int(_sparse_accept_count(key, xa.size, t, reps, xa, ya))
    return count >= reps * midpoint


def _sparse_trial_worker(args):
    master, phase, cls, idx, q, n, c, s = args
    inst_seed = derive_seed(master, phase, cls, idx, 0)
    proto_seed = derive_seed(master, phase, cls, idx, 1)
    x, y = sample_pair_dist(_class_dist(cls, q), n, inst_seed)
    src = CorrelatedSource(proto_seed, 1.0, PARTY_A)
    m = _weight_bucket(int(np.count_nonzero(x)), c, s, n)
    if phase == _PHASE_TRIAL:
        t = sparse_round_count(c, s)
        report = sparse_psr_oneway(x, y, shared_indices(src, t, n), q, c, s)
        return int(report.accept), m
    reps = sparse_recommended_reps(max(m, 1))
    return int(sparse_psr_repeated(x, y, src, q, c, s, reps)), m


def run_sparse_experiment(
    q: float,
    n: int,
    trials: int,
    master_seed: int,
    c: Optional[float] = None,
    s: Optional[float] = None,
    repeated_per_class: int = 10,
    jobs: int = 1,
) -> dict:
    """Atomic and repeated acceptance rates on planted vs background pairs.

    trials atomic rounds are split evenly between the classes, each on a
    fresh instance and fresh shared indices.  The repeated phase runs the
    full 9m^2-round vote on a few instances per class and counts correct
    classifications.
    """
    if trials < 0:
        raise ParameterError(f"trials must be >= 0, got {trials}")
    c = 0.9 / q if c is None else c
    s = 0.6 / q if s is None else s
    _check_thresholds(c, s)
    master = int(master_seed) & MASK64
    per_class = trials // 2

    atomic = {}
    gap_ok = False
    for cls, tag in ((_CLS_YES, "yes"), (_CLS_NO, "no")):
        args = [(master, _PHASE_TRIAL, cls, i, q, n, c, s) for i in range(per_class)]
        out = parallel_map(_sparse_trial_worker, args, jobs)
        hits = sum(a for a, _ in out)
        ms = sorted(m for _, m in out)
        rate = hits / per_class if per_class else math.nan
        lo, hi = wilson_interval(hits, per_class)
        atomic[tag] = {
            "trials": per_class,
            "acceptRate": rate,
            "ciLo": lo,
            "ciHi": hi,
            "mMedian": ms[len(ms) // 2] if ms else 0,
        }
    if per_class:
        gap_ok = atomic["yes"]["ciLo"] > atomic["no"]["ciHi"]

    rep_counts = {}
    for cls, tag in ((_CLS_YES, "yes"), (_CLS_NO, "no")):
        args = [(master, _PHASE_AMP, cls, i, q, n, c, s) for i in range(repeated_per_class)]
        out = parallel_map(_sparse_trial_worker, args, jobs)
        correct = sum(a == (1 if cls == _CLS_YES else 0) for a, _ in out)
        rep_counts[tag] = correct

    t = sparse_round_count(c, s)
    return {
        "params": {"q": q, "n": n, "c": c, "s": s, "t": t, "mFloor": _m_floor(c, s)},
        "bitsSent": sparse_bits_sent(t, c, s),
        "atomic": atomic,
        "atomicSeparated": gap_ok,
        "repeated": {
            "instancesPerClass": repeated_per_class,
            "yesCorrect": rep_counts["yes"],
            "noCorrect": rep_counts["no"],
            "repsPolicy": "ceil(9*m^2)",
        },
    }


# ---------------------------------------------------------------------------
# equality demo
# ---------------------------------------------------------------------------


def _calibration_block_pair(n_sym: int, agree: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic one-hot-per-block pair agreeing on exactly `agree` blocks.

    Calibrating on agree = n_sym (equal) versus the worst legal disagreement
    count bounds the threshold placement for every real encoding pair.
    """
    space = codes.SYMBOL_SPACE
    u = uniforms(stream_key(seed, KIND_INSTANCE), 0, 2 * n_sym)
    sym_x = np.minimum((u[:n_sym] * space).astype(np.int64), space - 1)
    shift = 1 + np.minimum((u[n_sym:] * (space - 1)).astype(np.int64), space - 2)
    sym_y = sym_x.copy()
    sym_y[agree:] = (sym_x[agree:] + shift[agree:]) % space
    x = np.zeros(n_sym * space, dtype=np.uint8)
    y = np.zeros(n_sym * space, dtype=np.uint8)
    x[np.arange(n_sym) * space + sym_x] = 1
    y[np.arange(n_sym) * space + sym_y] = 1
    return x, y


def equality_demo(
    a,
    b,
    srcs: tuple[CorrelatedSource, CorrelatedSource],
    rho: Optional[float] = None,
    t: int = 256,
    reps: int = 33,
    calib_per_class: int = 24,
) -> bool:
    """Equality test on two bit strings via the Gaussian protocol.

    Both inputs are expanded with a fixed public code so that equal
    strings share every codeword symbol while unequal ones share at most
    half minus one; the protocol then only has to separate the resulting
    inner-product gap.  The threshold is calibrated on synthetic pairs
    pinned at the two extremes (full agreement versus the worst count an
    unequal pair can reach), so placement does not depend on how the
    actual inputs differ.
    """
    src_a, src_b = srcs
    _check_pair(src_a, src_b)
    if rho is not None:
        src_a, src_b = make_pair(src_a.seed, rho)
    x = codes.encode_bits(a)
    y = codes.encode_bits(b)
    if x.size != y.size:
        raise ParameterError("inputs must have equal length")
    n = x.size
    n_sym = n // codes.SYMBOL_SPACE
    k_sym = n_sym // 2
    c, s = 1.5 * k_sym / n, float(k_sym) / n
    worst_unequal = k_sym - 1

    stats = {0: [], 1: []}
    level = src_b.rho
    root = math.sqrt(1.0 - level * level)
    for cls, agree in ((0, n_sym), (1, worst_unequal)):
        for i in range(calib_per_class):
            cx, cy = _calibration_block_pair(n_sym, agree, derive_seed(src_a.seed, 100 + cls, i))
            _, _, s1, s2 = _shot_stats(derive_seed(src_a.seed, 102 + cls, i), cx, cy, t)
            stats[cls].append(level * s1 + root * s2)
    threshold = 0.5 * (float(np.mean(stats[0])) + float(np.mean(stats[1])))

    params = GaussianParams(c, s, t, CalibratedThreshold(threshold))
    return gaussian_isr_amplified(x, y, (src_a, src_b), params, reps)


# ---------------------------------------------------------------------------
# instance files
# ---------------------------------------------------------------------------


def load_instance_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Two lines of 0/1 characters -> (x, y)."""
    from .errors import ConfigError

    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 2:
        raise ConfigError(f"instance file needs exactly two nonempty lines, got {len(lines)}")
    vecs = []
    for ln in lines:
        if set(ln) - {"0", "1"}:
            raise ConfigError("instance lines must contain only 0/1 characters")
        vecs.append(np.frombuffer(ln.encode("ascii"), dtype=np.uint8) - ord("0"))
    if vecs[0].size != vecs[1].size:
        raise ConfigError("instance vectors must have equal length")
    return vecs[0], vecs[1]
