"""Experiment configuration, dispatch, and result emission.

A config is a flat JSON object: {"kind": ..., "seed": ..., "trials": ...,
"jobs": ..., "out": ..., plus kind-specific parameters}.  Results go to a
CSV with a fixed column order per kind and a JSON mirror carrying the same
rows plus the full result document.  Rerunning a config reproduces both
byte-identically except for the JSON "meta" object (timestamp, wall time).

Every row starts with a 12-hex-digit hash of the canonical config (kind,
seed, trials, parameters; output path and parallelism excluded), so rows
from different runs can be joined back to their provenance.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import agree, compress, gapip, mathcore, strategies
from .errors import ConfigError, ParameterError
from .mc import parallel_map, wilson_interval
from .randsource import (
    KIND_MESSAGE,
    KIND_TRIAL,
    MASK64,
    PARTY_A,
    PARTY_B,
    CorrelatedSource,
    derive_seed,
    make_pair,
    parse_seed,
    shared_indices,
    stream_key,
    uniforms,
)

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "normalize_config",
    "load_config_file",
    "config_hash",
    "HarnessResult",
    "run",
    "render_csv",
    "write_outputs",
]

KINDS = (
    "compress",
    "agree",
    "gapip-gaussian",
    "gapip-sparse",
    "strategy-check",
    "influence",
    "equality",
)


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------


def _cast_int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}")
    return v


def _cast_float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}")
    return float(v)


def _cast_str(v):
    if not isinstance(v, str):
        raise ConfigError(f"expected a string, got {v!r}")
    return v


def _cast_float_list(v):
    vals = v if isinstance(v, (list, tuple)) else [v]
    if not vals:
        raise ConfigError("expected at least one number")
    return [_cast_float(x) for x in vals]


_SCHEMAS = {
    "compress": {
        "rho": (_cast_float, 0.9),
        "eps": (_cast_float, 1.0),
        "delta": (_cast_float, 0.1),
        "deltaLog": (_cast_float, 1.0),
        "n": (_cast_int, 4096),
        "rate": (_cast_float, 0.958),
        "kappa": (_cast_float, 3.0),
        "probsFile": (_cast_str, None),
        "qProbsFile": (_cast_str, None),
    },
    "agree": {
        "k": (_cast_int, 24),
        "rho": (_cast_float, 0.98),
        "eps": (_cast_float_list, [0.1]),
    },
    "gapip-gaussian": {
        "q": (_cast_float, 4.0),
        "n": (_cast_int, 1 << 16),
        "t": (_cast_int, 1024),
        "rho": (_cast_float_list, [1.0]),
        "mode": (_cast_str, "calibrated"),
        "alpha": (_cast_float, gapip.DEFAULT_LITERAL_ALPHA),
        "c": (_cast_float, None),
        "s": (_cast_float, None),
        "threshold": (_cast_float, None),
        "calibPerClass": (_cast_int, 256),
        "ampInstancesPerClass": (_cast_int, 10),
        "ampReps": (_cast_int, 33),
        "instance": (_cast_str, None),
    },
    "gapip-sparse": {
        "q": (_cast_float, 16.0),
        "n": (_cast_int, 1 << 16),
        "c": (_cast_float, None),
        "s": (_cast_float, None),
        "repeatedPerClass": (_cast_int, 10),
        "instance": (_cast_str, None),
    },
    "strategy-check": {
        "k": (_cast_int, 4),
        "samples": (_cast_int, 100_000),
    },
    "influence": {
        "n": (_cast_int, 8),
        "p": (_cast_float, 0.5),
        "tau": (_cast_float, 0.1),
        "eta": (_cast_float, 0.3),
    },
    "equality": {
        "bits": (_cast_int, 128),
        "rho": (_cast_float, 0.9),
        "t": (_cast_int, 256),
        "reps": (_cast_int, 33),
        "calibPerClass": (_cast_int, 24),
    },
}

_COLUMNS = {
    "compress": (
        "config", "rho", "eps", "delta", "delta_log", "n", "entropy", "trials",
        "success_rate", "ci_lo", "ci_hi", "mean_length", "length_bound",
    ),
    "agree": ("config", "k", "rho", "eps", "ell", "trials", "rate", "ci_lo", "ci_hi"),
    "gapip-gaussian": (
        "config", "q", "n", "t", "rho", "mode", "threshold", "trials_per_class",
        "yes_rate", "yes_lo", "yes_hi", "no_rate", "no_lo", "no_hi", "gap",
        "amp_success", "amp_reps", "bits_sent",
    ),
    "gapip-sparse": (
        "config", "q", "n", "c", "s", "t", "label", "trials", "accept_rate",
        "ci_lo", "ci_hi", "m_median", "repeated_correct", "repeated_instances",
        "bits_sent",
    ),
    "strategy-check": (
        "config", "k", "trials", "samples", "member_failures", "max_mc_dev",
    ),
    "influence": (
        "config", "n", "p", "tau", "eta", "trials", "parseval_max",
        "influence_max", "noise_max", "count_violations",
    ),
    "equality": (
        "config", "bits", "rho", "t", "reps", "label", "trials",
        "correct_rate", "ci_lo", "ci_hi",
    ),
}

# single protocol run on an explicit instance file
_INSTANCE_COLUMNS = ("config", "label", "accept", "ell", "m", "bits")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    trials: int
    params: dict
    out: Optional[str] = None
    jobs: int = 1


def load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def normalize_config(mapping) -> ExperimentConfig:
    if not isinstance(mapping, dict):
        raise ConfigError("config must be a mapping")
    data = dict(mapping)
    kind = data.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}; got {kind!r}")
    seed = data.pop("seed", 0)
    if isinstance(seed, str):
        try:
            seed = parse_seed(seed)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
    elif isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer or string, got {seed!r}")
    seed = seed & MASK64
    trials = data.pop("trials", 1000)
    trials = _cast_int(trials)
    if trials < 0:
        raise ConfigError(f"trials must be >= 0, got {trials}")
    out = data.pop("out", None)
    if out is not None:
        out = _cast_str(out)
    jobs = _cast_int(data.pop("jobs", 1))
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    schema = _SCHEMAS[kind]
    params = {}
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"unknown parameter {key!r} for kind {kind!r}")
        caster, _ = schema[key]
        params[key] = caster(value) if value is not None else None
    for key, (_, default) in schema.items():
        params.setdefault(key, default)
    return ExperimentConfig(kind, seed, trials, params, out, jobs)


def config_hash(cfg: ExperimentConfig) -> str:
    canon = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "params": {k: cfg.params[k] for k in sorted(cfg.params)},
    }
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def _run_compress(cfg: ExperimentConfig, h: str):
    p = cfg.params
    if p["probsFile"] is not None:
        dist_p = compress.load_probvec(p["probsFile"])
    else:
        dist_p = compress.geometric_probvec(p["n"], p["rate"])
    if p["qProbsFile"] is not None:
        dist_q = compress.load_probvec(p["qProbsFile"])
    elif p["deltaLog"] > 0.0:
        dist_q = compress.perturb_probvec(dist_p, p["deltaLog"], derive_seed(cfg.seed, 1))
    else:
        dist_q = dist_p
    params = compress.CompressParams(
        rho=p["rho"], eps=p["eps"], delta=p["delta"],
        delta_log_bound=p["deltaLog"], kappa=p["kappa"],
    )
    res = compress.run_compression_experiment(
        dist_p, dist_q, params, cfg.trials, cfg.seed, jobs=cfg.jobs
    )
    row = {
        "config": h,
        "rho": p["rho"],
        "eps": p["eps"],
        "delta": p["delta"],
        "delta_log": p["deltaLog"],
        "n": dist_p.n,
        "entropy": dist_p.entropy,
        "trials": res["trials"],
        "success_rate": res["successRate"],
        "ci_lo": res["ciLo"],
        "ci_hi": res["ciHi"],
        "mean_length": res["meanLength"],
        "length_bound": res["lengthBound"],
    }
    return [row], res


def _run_agree(cfg: ExperimentConfig, h: str):
    p = cfg.params
    rows = agree.sweep_tradeoff(
        p["k"], p["rho"], p["eps"], cfg.trials, cfg.seed, jobs=cfg.jobs
    )
    out = [{"config": h, **row} for row in rows]
    return out, {"rows": rows}


def _instance_run_gaussian(cfg: ExperimentConfig, h: str):
    p = cfg.params
    x, y = gapip.load_instance_file(p["instance"])
    q = p["q"]
    c = 0.9 / q if p["c"] is None else p["c"]
    s = 0.6 / q if p["s"] is None else p["s"]
    if p["mode"] == "literal":
        mode = gapip.LiteralThreshold(p["alpha"])
    elif p["mode"] == "calibrated":
        if p["threshold"] is None:
            raise ConfigError(
                "calibrated single-instance runs need an explicit threshold"
            )
        mode = gapip.CalibratedThreshold(p["threshold"])
    else:
        raise ConfigError(f"mode must be 'literal' or 'calibrated', got {p['mode']!r}")
    rho = p["rho"][0] if isinstance(p["rho"], list) else p["rho"]
    pair = make_pair(cfg.seed, rho)
    report = gapip.gaussian_isr_protocol(x, y, *pair, c, s, p["t"], mode)
    label, _ = gapip.classify(x, y, q, c, s)
    row = {
        "config": h, "label": label, "accept": report.accept,
        "ell": report.ell, "m": report.m, "bits": report.bits_sent,
    }
    return [row], {"report": report.__dict__, "label": label}


def _run_gapip_gaussian(cfg: ExperimentConfig, h: str):
    p = cfg.params
    if p["instance"] is not None:
        return _instance_run_gaussian(cfg, h)
    res = gapip.run_gaussian_experiment(
        q=p["q"], n=p["n"], t=p["t"], rhos=p["rho"], trials=cfg.trials,
        master_seed=cfg.seed, mode=p["mode"], alpha=p["alpha"],
        c=p["c"], s=p["s"], calib_per_class=p["calibPerClass"],
        amp_instances_per_class=p["ampInstancesPerClass"],
        amp_reps=p["ampReps"], jobs=cfg.jobs,
    )
    rows = []
    for r in res["rows"]:
        rows.append({
            "config": h,
            "q": p["q"],
            "n": p["n"],
            "t": p["t"],
            "rho": r["rho"],
            "mode": r["mode"],
            "threshold": r["threshold"],
            "trials_per_class": r["trialsPerClass"],
            "yes_rate": r.get("yesRate", math.nan),
            "yes_lo": r.get("yesLo", math.nan),
            "yes_hi": r.get("yesHi", math.nan),
            "no_rate": r.get("noRate", math.nan),
            "no_lo": r.get("noLo", math.nan),
            "no_hi": r.get("noHi", math.nan),
            "gap": r.get("gap", math.nan),
            "amp_success": r["ampSuccess"],
            "amp_reps": r["ampReps"],
            "bits_sent": res["bitsSent"],
        })
    return rows, res


def _instance_run_sparse(cfg: ExperimentConfig, h: str):
    p = cfg.params
    x, y = gapip.load_instance_file(p["instance"])
    q = p["q"]
    c = 0.9 / q if p["c"] is None else p["c"]
    s = 0.6 / q if p["s"] is None else p["s"]
    t = gapip.sparse_round_count(c, s)
    src = CorrelatedSource(cfg.seed, 1.0, PARTY_A)
    report = gapip.sparse_psr_oneway(x, y, shared_indices(src, t, x.size), q, c, s)
    label, _ = gapip.classify(x, y, q, c, s)
    row = {
        "config": h, "label": label, "accept": report.accept,
        "ell": report.ell, "m": report.m, "bits": report.bits_sent,
    }
    return [row], {"report": report.__dict__, "label": label}


def _run_gapip_sparse(cfg: ExperimentConfig, h: str):
    p = cfg.params
    if p["instance"] is not None:
        return _instance_run_sparse(cfg, h)
    res = gapip.run_sparse_experiment(
        q=p["q"], n=p["n"], trials=cfg.trials, master_seed=cfg.seed,
        c=p["c"], s=p["s"], repeated_per_class=p["repeatedPerClass"],
        jobs=cfg.jobs,
    )
    prm = res["params"]
    rows = []
    for label in ("yes", "no"):
        atom = res["atomic"][label]
        rows.append({
            "config": h,
            "q": prm["q"],
            "n": prm["n"],
            "c": prm["c"],
            "s": prm["s"],
            "t": prm["t"],
            "label": label,
            "trials": atom["trials"],
            "accept_rate": atom["acceptRate"],
            "ci_lo": atom["ciLo"],
            "ci_hi": atom["ciHi"],
            "m_median": atom["mMedian"],
            "repeated_correct": res["repeated"][f"{label}Correct"],
            "repeated_instances": res["repeated"]["instancesPerClass"],
            "bits_sent": res["bitsSent"],
        })
    return rows, res


def _strategy_check_worker(args):
    master, i, k, samples = args
    tree_a = strategies.random_strategy_tree(PARTY_A, k, derive_seed(master, i, 0))
    tree_b = strategies.random_strategy_tree(PARTY_B, k, derive_seed(master, i, 1))
    vec_a = strategies.tree_to_vector(tree_a)
    vec_b = strategies.tree_to_vector(tree_b)
    ok_a, _ = strategies.is_member(vec_a.raw, PARTY_A)
    ok_b, _ = strategies.is_member(vec_b.raw, PARTY_B)
    ip = strategies.acceptance(vec_a, vec_b)
    rate, _ = strategies.simulate(tree_a, tree_b, derive_seed(master, i, 2), samples)
    return int(ok_a and ok_b), abs(rate - ip)


def _run_strategy_check(cfg: ExperimentConfig, h: str):
    p = cfg.params
    args = [(cfg.seed, i, p["k"], p["samples"]) for i in range(cfg.trials)]
    out = parallel_map(_strategy_check_worker, args, cfg.jobs)
    failures = sum(1 - ok for ok, _ in out)
    max_dev = max((dev for _, dev in out), default=math.nan)
    row = {
        "config": h, "k": p["k"], "trials": cfg.trials, "samples": p["samples"],
        "member_failures": failures, "max_mc_dev": max_dev,
    }
    return [row], {"memberFailures": failures, "maxMcDev": max_dev}


def _flip_influence(fn: mathcore.BooleanFn, i: int) -> float:
    """Influence via the discrete-derivative definition, not the expansion.

    Inf_i = p(1-p) * E[(f(x with x_i=1) - f(x with x_i=0))^2]; used as the
    second route against the coefficient-mask formula.
    """
    bit = i - 1
    vals = fn.values
    shaped = vals.reshape(-1, 2, 1 << bit)
    diff = shaped[:, 1, :] - shaped[:, 0, :]
    w = fn.point_weights.reshape(-1, 2, 1 << bit)
    # weights sum over both settings of x_i, so scale the shared part back up
    mass = (w[:, 0, :] + w[:, 1, :])
    return float(fn.p * (1.0 - fn.p) * np.sum(mass * diff * diff))


def _influence_worker(args):
    master, i, n, p, tau, eta = args
    u = uniforms(stream_key(derive_seed(master, i), KIND_TRIAL), 0, 1 << n)
    fn = mathcore.BooleanFn(np.where(u < 0.5, -1.0, 1.0), p=p)
    coeffs = fn.expansion.coeffs
    sq_fourier = float(np.sum(coeffs**2))
    sq_direct = float(fn.point_weights @ (fn.values**2))
    parseval = abs(sq_fourier - sq_direct)
    inf_dev = max(
        abs(mathcore.influence(fn, j) - _flip_influence(fn, j))
        for j in range(1, n + 1)
    )
    smoothed = mathcore.noise_operator(fn, eta)
    sizes = np.count_nonzero(
        (np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1, axis=1
    )
    damped = mathcore.FourierExpansion(coeffs * (1.0 - eta) ** sizes, p).evaluate()
    noise_dev = float(np.max(np.abs(smoothed.values - damped.values)))
    degree = int(sizes[np.abs(coeffs) > 1e-12].max()) if np.any(np.abs(coeffs) > 1e-12) else 0
    count = mathcore.count_influential(fn, tau, max(degree, 1))
    violated = count > max(degree, 1) / tau
    return parseval, inf_dev, noise_dev, int(violated)


def _run_influence(cfg: ExperimentConfig, h: str):
    p = cfg.params
    if p["n"] > 14:
        raise ParameterError("influence experiment is capped at n = 14 tables")
    args = [
        (cfg.seed, i, p["n"], p["p"], p["tau"], p["eta"]) for i in range(cfg.trials)
    ]
    out = parallel_map(_influence_worker, args, cfg.jobs)
    row = {
        "config": h, "n": p["n"], "p": p["p"], "tau": p["tau"], "eta": p["eta"],
        "trials": cfg.trials,
        "parseval_max": max((r[0] for r in out), default=math.nan),
        "influence_max": max((r[1] for r in out), default=math.nan),
        "noise_max": max((r[2] for r in out), default=math.nan),
        "count_violations": sum(r[3] for r in out),
    }
    return [row], {"rows": [row]}


def _equality_worker(args):
    master, cls, i, bits, rho, t, reps, calib = args
    u = uniforms(stream_key(derive_seed(master, cls, i), KIND_MESSAGE), 0, 2 * bits)
    a = (u[:bits] < 0.5).astype(np.uint8)
    if cls == 0:
        b = a.copy()
    else:
        b = (u[bits:] < 0.5).astype(np.uint8)
        if np.array_equal(a, b):
            b[0] ^= 1
    pair = make_pair(derive_seed(master, cls, i, 1), rho)
    verdict = gapip.equality_demo(a, b, pair, t=t, reps=reps, calib_per_class=calib)
    return int(verdict == (cls == 0))


def _run_equality(cfg: ExperimentConfig, h: str):
    p = cfg.params
    per_class = cfg.trials // 2
    rows = []
    doc = {}
    for cls, label in ((0, "equal"), (1, "unequal")):
        args = [
            (cfg.seed, cls, i, p["bits"], p["rho"], p["t"], p["reps"], p["calibPerClass"])
            for i in range(per_class)
        ]
        out = parallel_map(_equality_worker, args, cfg.jobs)
        correct = sum(out)
        lo, hi = wilson_interval(correct, per_class)
        rows.append({
            "config": h, "bits": p["bits"], "rho": p["rho"], "t": p["t"],
            "reps": p["reps"], "label": label, "trials": per_class,
            "correct_rate": correct / per_class if per_class else math.nan,
            "ci_lo": lo, "ci_hi": hi,
        })
        doc[label] = {"correct": correct, "trials": per_class}
    return rows, doc


_RUNNERS = {
    "compress": _run_compress,
    "agree": _run_agree,
    "gapip-gaussian": _run_gapip_gaussian,
    "gapip-sparse": _run_gapip_sparse,
    "strategy-check": _run_strategy_check,
    "influence": _run_influence,
    "equality": _run_equality,
}


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
        return str(v)
    return v


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in columns])
    return buf.getvalue()


@dataclass(frozen=True)
class HarnessResult:
    config: ExperimentConfig
    config_hash: str
    columns: tuple
    rows: list
    document: dict = field(repr=False)

    @property
    def csv_text(self) -> str:
        return render_csv(self.columns, self.rows)


def run(cfg: ExperimentConfig) -> HarnessResult:
    """Dispatch one experiment; deterministic in (kind, seed, trials, params)."""
    h = config_hash(cfg)
    start = time.perf_counter()
    if cfg.trials == 0:
        rows: list = []
        result: dict = {}
    else:
        rows, result = _RUNNERS[cfg.kind](cfg, h)
    wall = time.perf_counter() - start
    columns = _INSTANCE_COLUMNS if (
        cfg.kind.startswith("gapip") and cfg.params.get("instance")
    ) else _COLUMNS[cfg.kind]
    document = {
        "config": {
            "kind": cfg.kind,
            "seed": cfg.seed,
            "trials": cfg.trials,
            "params": _jsonable(cfg.params),
        },
        "configHash": h,
        "columns": list(columns),
        "rows": _jsonable(rows),
        "result": _jsonable(result),
        "meta": {
            "timestampUtc": datetime.now(timezone.utc).isoformat(),
            "wallSeconds": wall,
        },
    }
    return HarnessResult(cfg, h, tuple(columns), rows, document)


def write_outputs(result: HarnessResult, out: str) -> tuple[str, str]:
    """Write CSV and its JSON mirror next to each other; returns both paths."""
    csv_path = out if out.endswith(".csv") else out + ".csv"
    json_path = csv_path[: -len(".csv")] + ".json"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(result.csv_text)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(result.document, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path
