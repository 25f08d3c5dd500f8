"""Two-party strategy calculus: trees, vectors, membership, acceptance.

A k-round alternating protocol (first bit spoken after the empty history,
verdict = last transcript bit) is represented two ways:

* ``StrategyTree``: the owning party's transition tables f^(j)(history) in
  [0,1], where party A owns even-length histories and party B odd-length.
* ``StrategyVector``: one party's vector in [0,1]^(2^k) indexed by full
  transcripts (first round = most significant bit); entry = product of that
  party's own emission probabilities along the transcript.

The consistency recursion evaluates, for party A, p(prefix) by summing the
two extensions at A's own levels and half-averaging at B's levels (and the
mirror image for B).  Valid vectors are exactly those with p() = 1 whose
sibling values agree at the other party's levels; the acceptance probability
of a pair of valid vectors is the verdict-masked inner product.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .randsource import KIND_SIM, KIND_TRIAL, stream_key, uniforms

__all__ = [
    "StrategyTree",
    "StrategyVector",
    "ptranscript",
    "is_member",
    "tree_to_vector",
    "random_strategy_tree",
    "vector_to_tree",
    "acceptance",
    "simulate",
    "psr_to_gapip",
    "verdict_mask",
]

PARTY_A = "A"
PARTY_B = "B"
_MAX_K = 16


def _check_party(party: str) -> str:
    if party not in (PARTY_A, PARTY_B):
        raise ParameterError(f"party must be 'A' or 'B', got {party!r}")
    return party


def _check_raw(raw) -> tuple[np.ndarray, int]:
    arr = np.asarray(raw, dtype=np.float64)
    size = arr.size
    k = size.bit_length() - 1
    if size < 2 or (1 << k) != size:
        raise ParameterError(f"vector length must be a power of two >= 2, got {size}")
    if k > _MAX_K:
        raise ParameterError(f"k is capped at {_MAX_K}, got {k}")
    return arr, k


def verdict_mask(k: int) -> np.ndarray:
    """v(transcript) = last bit of the transcript (1 means accept)."""
    return (np.arange(1 << k) & 1).astype(np.float64)


def _owns(party: str, j: int) -> bool:
    # party A speaks after even-length histories, B after odd-length
    return (j % 2 == 0) == (party == PARTY_A)


def _levels(raw: np.ndarray, party: str, k: int) -> list[np.ndarray]:
    """levels[j][h] = p(history h of length j) under the consistency recursion."""
    levels = [None] * (k + 1)
    levels[k] = raw
    for j in range(k - 1, -1, -1):
        pairs = levels[j + 1].reshape(-1, 2)
        sums = pairs[:, 0] + pairs[:, 1]
        levels[j] = sums if _owns(party, j) else 0.5 * sums
    return levels


def _prefix_index(prefix) -> tuple[int, int]:
    if isinstance(prefix, str):
        bits = [int(c) for c in prefix]
    else:
        bits = [int(b) for b in prefix]
    if any(b not in (0, 1) for b in bits):
        raise ParameterError(f"prefix must be binary, got {prefix!r}")
    idx = 0
    for b in bits:
        idx = (idx << 1) | b
    return idx, len(bits)


def ptranscript(raw, party: str, prefix=()) -> float:
    """The recursion value p(prefix) for one party's raw vector."""
    party = _check_party(party)
    arr, k = _check_raw(raw)
    idx, j = _prefix_index(prefix)
    if j > k:
        raise ParameterError(f"prefix longer than k={k}")
    return float(_levels(arr, party, k)[j][idx])


def is_member(raw, party: str, tol: float = 1e-9) -> tuple[bool, str | None]:
    """Check the consistency constraints; returns (ok, first-violation report)."""
    party = _check_party(party)
    arr, k = _check_raw(raw)
    if arr.min() < -tol or arr.max() > 1.0 + tol:
        bad = int(np.argmax((arr < -tol) | (arr > 1.0 + tol)))
        return False, f"entry {bad} = {arr[bad]} outside [0, 1]"
    levels = _levels(arr, party, k)
    total = float(levels[0][0])
    if abs(total - 1.0) > tol:
        return False, f"p() = {total} != 1"
    for j in range(k):
        if _owns(party, j):
            continue
        pairs = levels[j + 1].reshape(-1, 2)
        diffs = np.abs(pairs[:, 0] - pairs[:, 1])
        worst = int(np.argmax(diffs))
        if diffs[worst] > tol:
            hist = format(worst, f"0{j}b") if j else ""
            return False, (
                f"children of history '{hist}' (length {j}) differ by {diffs[worst]}"
            )
    return True, None


@dataclass(frozen=True)
class StrategyVector:
    """A validated strategy vector with its verdict-masked companion."""

    party: str
    raw: np.ndarray

    def __post_init__(self):
        _check_party(self.party)
        arr, k = _check_raw(self.raw)
        ok, report = is_member(arr, self.party)
        if not ok:
            raise ParameterError(f"not a valid {self.party} strategy vector: {report}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "raw", arr)

    @property
    def k(self) -> int:
        return self.raw.size.bit_length() - 1

    @property
    def masked(self) -> np.ndarray:
        return self.raw * verdict_mask(self.k)


@dataclass(frozen=True)
class StrategyTree:
    """Transition tables for one party's owned rounds, keyed by history length."""

    party: str
    k: int
    tables: dict

    def __post_init__(self):
        _check_party(self.party)
        if not 1 <= self.k <= _MAX_K:
            raise ParameterError(f"k must lie in 1..{_MAX_K}, got {self.k}")
        fixed = {}
        for j in range(self.k):
            if not _owns(self.party, j):
                continue
            if j not in self.tables:
                raise ParameterError(f"missing table for history length {j}")
            t = np.array(self.tables[j], dtype=np.float64)
            if t.shape != (1 << j,):
                raise ParameterError(
                    f"table at history length {j} must have 2^{j} entries"
                )
            if t.min() < 0.0 or t.max() > 1.0:
                raise ParameterError(f"table at history length {j} leaves [0, 1]")
            t.setflags(write=False)
            fixed[j] = t
        object.__setattr__(self, "tables", fixed)

    def owned_lengths(self) -> list[int]:
        return sorted(self.tables)

    def to_json(self) -> str:
        flat = {}
        for j, table in self.tables.items():
            for h in range(1 << j):
                key = format(h, f"0{j}b") if j else ""
                flat[key] = float(table[h])
        return json.dumps({"party": self.party, "k": self.k, "tables": flat})

    @classmethod
    def from_json(cls, text: str) -> "StrategyTree":
        data = json.loads(text)
        party = data["party"]
        k = int(data["k"])
        by_len: dict[int, np.ndarray] = {}
        for key, val in data["tables"].items():
            j = len(key)
            table = by_len.setdefault(j, np.full(1 << j, np.nan))
            table[int(key, 2) if key else 0] = float(val)
        bad = [j for j, t in by_len.items() if np.any(np.isnan(t))]
        if bad:
            raise ParameterError(f"incomplete tables at history lengths {bad}")
        return cls(party, k, by_len)


def tree_to_vector(tree: StrategyTree) -> StrategyVector:
    """x(transcript) = product of the tree's own emission probabilities."""
    k = tree.k
    idx = np.arange(1 << k)
    raw = np.ones(1 << k, dtype=np.float64)
    for j in tree.owned_lengths():
        hist = idx >> (k - j)
        bits = (idx >> (k - j - 1)) & 1
        f = tree.tables[j][hist]
        raw *= np.where(bits == 1, f, 1.0 - f)
    return StrategyVector(tree.party, raw)


def random_strategy_tree(party: str, k: int, seed: int) -> StrategyTree:
    """Uniformly random emission probability at every owned history."""
    party = _check_party(party)
    tables = {
        j: uniforms(stream_key(seed, KIND_TRIAL, j), 0, 1 << j)
        for j in range(k)
        if _owns(party, j)
    }
    return StrategyTree(party, k, tables)


def vector_to_tree(raw, party: str) -> StrategyTree:
    """Conditional emission probabilities from the recursion; 0/0 becomes 1/2."""
    party = _check_party(party)
    arr, k = _check_raw(raw)
    ok, report = is_member(arr, party)
    if not ok:
        raise ParameterError(f"not a valid {party} strategy vector: {report}")
    levels = _levels(arr, party, k)
    tables = {}
    for j in range(k):
        if not _owns(party, j):
            continue
        parents = levels[j]
        ones = levels[j + 1].reshape(-1, 2)[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(parents > 0.0, ones / np.where(parents > 0.0, parents, 1.0), 0.5)
        tables[j] = np.clip(f, 0.0, 1.0)
    return StrategyTree(party, k, tables)


def acceptance(x_a: StrategyVector, x_b: StrategyVector) -> float:
    """Acceptance probability of the interaction: sum of raw_A * raw_B * v."""
    if x_a.party != PARTY_A or x_b.party != PARTY_B:
        raise ParameterError(
            f"need an (A, B) pair, got ({x_a.party}, {x_b.party})"
        )
    if x_a.k != x_b.k:
        raise ParameterError(f"round counts differ: {x_a.k} vs {x_b.k}")
    v = verdict_mask(x_a.k)
    return float(np.sum(x_a.raw * x_b.raw * v))


def simulate(
    tree_a: StrategyTree, tree_b: StrategyTree, seed: int, samples: int
) -> tuple[float, np.ndarray]:
    """Monte Carlo transcripts; returns (acceptance rate, transcript counts)."""
    if tree_a.party != PARTY_A or tree_b.party != PARTY_B:
        raise ParameterError("simulate needs (tree_A, tree_B) in that order")
    if tree_a.k != tree_b.k:
        raise ParameterError(f"round counts differ: {tree_a.k} vs {tree_b.k}")
    k = tree_a.k
    hist = np.zeros(1 << k, dtype=np.int64)
    if samples == 0:
        return float("nan"), hist
    prefix = np.zeros(samples, dtype=np.int64)
    for j in range(k):
        owner = tree_a if _owns(PARTY_A, j) else tree_b
        probs = owner.tables[j][prefix]
        u = uniforms(stream_key(seed, KIND_SIM, j), 0, samples)
        bits = (u < probs).astype(np.int64)
        prefix = (prefix << 1) | bits
    counts = np.bincount(prefix, minlength=1 << k).astype(np.int64)
    rate = float(np.mean(prefix & 1))
    return rate, counts


def psr_to_gapip(strategy_family, k: int) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Concatenate a family of deterministic strategy pairs into one gap instance.

    Each pair contributes its two verdict-masked 0/1 vectors; the normalized
    inner product of the concatenations is 2^-k times the fraction of blocks
    whose interaction accepts, which lands above (2/3)*2^-k when at least 2/3
    accept and below (1/3)*2^-k when at most 1/3 do.
    """
    pairs = list(strategy_family)
    if not pairs:
        raise ParameterError("strategy family must be nonempty")
    xs, ys = [], []
    for idx, (xv, yv) in enumerate(pairs):
        if xv.party != PARTY_A or yv.party != PARTY_B:
            raise ParameterError(f"block {idx}: need an (A, B) pair")
        if xv.k != k or yv.k != k:
            raise ParameterError(f"block {idx}: round count != {k}")
        for v in (xv, yv):
            if not np.all((v.raw == 0.0) | (v.raw == 1.0)):
                raise ParameterError(
                    f"block {idx}: reduction needs deterministic 0/1 vectors"
                )
        xs.append(xv.masked.astype(np.uint8))
        ys.append(yv.masked.astype(np.uint8))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    return x, y, (2.0 / 3.0) * 2.0**-k, (1.0 / 3.0) * 2.0**-k
