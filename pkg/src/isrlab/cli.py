"""Command-line front end: one subcommand per experiment kind.

Flags override values from an optional JSON config file.  Exit codes:
0 ran, 2 malformed configuration (including argparse errors), 3 well-formed
but infeasible parameters.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from . import __version__
from .errors import ConfigError, ParameterError
from .harness import KINDS, load_config_file, normalize_config, run, write_outputs

_COMMON = ("config", "seed", "trials", "out", "jobs")


def _add_common(sp: argparse.ArgumentParser):
    sp.add_argument("--config", metavar="FILE", help="JSON config; flags override it")
    sp.add_argument("--seed", help="master seed (decimal or 0x-prefixed hex)")
    sp.add_argument("--trials", type=int, help="trial count (0 emits only headers)")
    sp.add_argument("--out", metavar="PATH", help="write CSV here plus a .json mirror")
    sp.add_argument("--jobs", type=int, help="worker processes (default 1)")


def _add_gaussian_flags(sp: argparse.ArgumentParser):
    sp.add_argument("--q", type=float, help="sparsity parameter (weight ~ n/q)")
    sp.add_argument("--n", type=int, help="vector length")
    sp.add_argument("--t", type=int, help="number of Gaussian directions")
    sp.add_argument("--rho", type=float, nargs="+", help="correlation level(s)")
    sp.add_argument("--mode", choices=("literal", "calibrated"))
    sp.add_argument("--alpha", type=float, help="constant for literal thresholds")
    sp.add_argument("--c", type=float, help="yes threshold (default 0.9/q)")
    sp.add_argument("--s", type=float, help="no threshold (default 0.6/q)")
    sp.add_argument("--threshold", type=float,
                    help="fixed threshold for calibrated single-instance runs")
    sp.add_argument("--calib-per-class", dest="calibPerClass", type=int)
    sp.add_argument("--amp-instances-per-class", dest="ampInstancesPerClass", type=int)
    sp.add_argument("--amp-reps", dest="ampReps", type=int)
    sp.add_argument("--instance", metavar="FILE",
                    help="two-line 0/1 instance file; runs the protocol once")


def _add_sparse_flags(sp: argparse.ArgumentParser):
    sp.add_argument("--q", type=float, help="sparsity parameter (weight ~ n/q)")
    sp.add_argument("--n", type=int, help="vector length")
    sp.add_argument("--c", type=float, help="yes threshold (default 0.9/q)")
    sp.add_argument("--s", type=float, help="no threshold (default 0.6/q)")
    sp.add_argument("--repeated-per-class", dest="repeatedPerClass", type=int)
    sp.add_argument("--instance", metavar="FILE",
                    help="two-line 0/1 instance file; runs the protocol once")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isr-lab",
        description="Monte Carlo experiments on communication with "
                    "imperfectly shared randomness",
    )
    parser.add_argument("--version", action="version", version=f"isr-lab {__version__}")
    parser.add_argument("--config", metavar="FILE",
                        help="JSON config naming the experiment kind")
    sub = parser.add_subparsers(dest="kind", metavar="EXPERIMENT")

    sp = sub.add_parser("compress", help="uncertain-prior compression")
    _add_common(sp)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--eps", type=float, help="rate slack over the noiseless bound")
    sp.add_argument("--delta", type=float, help="failure budget")
    sp.add_argument("--delta-log", dest="deltaLog", type=float,
                    help="bound on |log2 P(m)/Q(m)|")
    sp.add_argument("--n", type=int, help="message universe size")
    sp.add_argument("--rate", type=float, help="geometric decay of the default prior")
    sp.add_argument("--kappa", type=float, help="slack constant inside c")
    sp.add_argument("--probs-file", dest="probsFile", metavar="FILE")
    sp.add_argument("--q-probs-file", dest="qProbsFile", metavar="FILE")

    sp = sub.add_parser("agree", help="agreement distillation sweep")
    _add_common(sp)
    sp.add_argument("--k", type=int, help="raw bits per party")
    sp.add_argument("--rho", type=float)
    sp.add_argument("--eps", type=float, nargs="+", help="slack grid")

    sp = sub.add_parser("gapip-gaussian", help="Gaussian sketch protocol experiment")
    _add_common(sp)
    _add_gaussian_flags(sp)

    sp = sub.add_parser("gapip-sparse", help="sparse one-way protocol experiment")
    _add_common(sp)
    _add_sparse_flags(sp)

    sp = sub.add_parser("gapip", help="gapip-gaussian/-sparse selected via --proto")
    _add_common(sp)
    sp.add_argument("--proto", required=True, choices=("gaussian", "sparse"))
    _add_gaussian_flags(sp)
    sp.add_argument("--repeated-per-class", dest="repeatedPerClass", type=int)

    sp = sub.add_parser("strategy-check", help="strategy tree/vector consistency")
    _add_common(sp)
    sp.add_argument("--k", type=int, help="rounds per interaction")
    sp.add_argument("--samples", type=int, help="Monte Carlo transcripts per pair")

    sp = sub.add_parser("influence", help="Boolean-function identity checks")
    _add_common(sp)
    sp.add_argument("--n", type=int, help="coordinates (table size 2^n)")
    sp.add_argument("--p", type=float, help="bias of each coordinate")
    sp.add_argument("--tau", type=float, help="influence threshold")
    sp.add_argument("--eta", type=float, help="resampling rate for the noise check")

    sp = sub.add_parser("equality", help="equality testing via coded inner products")
    _add_common(sp)
    sp.add_argument("--bits", type=int, help="input length")
    sp.add_argument("--rho", type=float)
    sp.add_argument("--t", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--calib-per-class", dest="calibPerClass", type=int)

    return parser


def _assemble(args: argparse.Namespace) -> dict:
    cfg_map: dict = {}
    if getattr(args, "config", None):
        cfg_map.update(load_config_file(args.config))
    kind = getattr(args, "kind", None)
    if kind == "gapip":
        kind = f"gapip-{args.proto}"
    if kind is not None:
        if "kind" in cfg_map and cfg_map["kind"] != kind:
            raise ConfigError(
                f"config file says kind={cfg_map['kind']!r} but the "
                f"command line says {kind!r}"
            )
        cfg_map["kind"] = kind
    skip = {"config", "kind", "proto", "version"}
    for dest, value in vars(args).items():
        if dest in skip or value is None:
            continue
        cfg_map[dest] = value
    return cfg_map


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "kind", None) is None and not getattr(args, "config", None):
        parser.error("name an experiment or pass --config FILE")
    try:
        cfg = normalize_config(_assemble(args))
        result = run(cfg)
        if cfg.out:
            csv_path, json_path = write_outputs(result, cfg.out)
            print(f"{csv_path}\n{json_path}")
        else:
            sys.stdout.write(result.csv_text)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
