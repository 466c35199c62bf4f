"""Command-line entry point: ``randnls <experiment> [flags]``.

Exit status is 0 on success, 1 when an acceptance assertion fails and 2 on
usage or runtime errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import EXPERIMENTS, ExperimentConfig
from .errors import RandNLSError, UsageError

log = logging.getLogger("randnls")

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _items(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


# flag, config key, type
_D = ("--d", "d", int)
_K = ("--k", "k", float)
_R = ("--r", "r", int)
_Q = ("--q", "q", float)
_P = ("--p", "p", float)
_SIGMA = ("--sigma", "sigma", float)
_NU = ("--nu", "nu", float)
_N = ("--n-modes", "N", int)
_NMIN = ("--n-min", "n_min", int)
_NMAX = ("--n-max", "n_max", int)
_LAW = ("--law", "law", str)
_MDRAWS = ("--m-draws", "M", int)
_T = ("--t-horizon", "T", float)
_TOL = ("--tol", "tol", float)
_MT = ("--time-nodes", "M_t", int)
_POINTS = ("--points", "points", int)
_MARGIN = ("--margin", "margin", float)
_SIGN = ("--sign", "sign", int)

FLAGS = {
    "basis": [_D, _N, _K, _POINTS, _MARGIN],
    "decay-fit": [_Q, _K, _D, _NMIN, _NMAX, _N, ("--eta", "eta", float)],
    "theta": [_Q, _K, _D, ("--eta", "eta", float)],
    "projector-decay": [_K, _NU, _NMIN, _NMAX, _N],
    "khinchin": [_LAW, _R, _MDRAWS, _N, ("--vectors", "draws", int)],
    "randomize": [("--in", "input", str), _LAW, _N, _D, _K, _SIGMA],
    "strichartz": [_P, _Q, _SIGMA, _LAW, _MDRAWS, _T, _N, _MT],
    "tail": [("--lambda-min", "lambda_min", float), ("--lambda-max", "lambda_max", float),
             ("--n-lambda", "n_lambda", int), _MDRAWS, _P, _Q, _SIGMA, _LAW, _T, _N],
    "solve": [_D, _R, _SIGMA, _LAW, _T, _TOL, _N, _MT, _SIGN, ("--s", "s", float),
              ("--draws", "draws", int), ("--max-iter", "max_iter", int),
              ("--trajectory", "output", str)],
    "lens-check": [_D, _R, _T, _TOL, _N, _MT, _SIGN],
    "smoothing": [_K, _NU, _NMIN, _NMAX, _N, ("--gamma-grid", "gamma_grid", _floats), _MT],
    "suite": [("--criteria", "criteria", _items)],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, dest="seed")
    common.add_argument("--out", dest="out", help="report directory, or a .npz container path")
    common.add_argument("--cache", dest="cache", help="directory for cached bases")
    common.add_argument("--threads", type=int, dest="threads")
    common.add_argument("--config", dest="config_file", help="flat key = value configuration")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="randnls", description="Randomized NLS experiment harness.")
    parser.add_argument("--version", action="version", version=f"randnls {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, parents=[common])
        for flag, key, kind in FLAGS[name]:
            p.add_argument(flag, dest=key, type=kind)
    return parser


def config_from_args(args):
    values = {k: v for k, v in vars(args).items()
              if v is not None and k not in ("config_file", "verbose")}
    if args.config_file:
        base = ExperimentConfig.from_text(Path(args.config_file).read_text())
        if base.experiment != args.experiment:
            raise UsageError(
                f"config file is for '{base.experiment}', not '{args.experiment}'")
        return base.replace(**values)
    return ExperimentConfig(**values)


def main(argv=None):
    from . import experiments

    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        config = config_from_args(args)
        report = experiments.run(config)
    except (RandNLSError, ValueError, OSError) as exc:
        print(f"randnls: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, ok in report.assertions.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    failed = [name for name, ok in report.assertions.items() if not ok]
    if failed:
        print(f"randnls: {len(failed)} assertion(s) failed: {'; '.join(failed)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
