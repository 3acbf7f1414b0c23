"""Command line entry point.

Exit codes: 0 success, 1 input or runtime error, 2 a checked claim was violated.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ComplianceError
from .experiments import ConfigError, ExperimentConfig, parse_regularizer, run, write_outputs
from .model import SparseModel
from .recovery import RecoveryInstance, nonuniform_certificate, solve
from .regularizers import weighted_l1_weights

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2

DEFAULTS = {
    "theorem1": {"n": 3, "k": 1},
    "compliance": {"n": 3, "k": 1},
    "phase": {"n": 8, "k": 1},
    "rip": {"n": 3, "k": 1, "matrices": ["identity", "zero", "gaussian:2"]},
}


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit status 2 is reserved for violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sparsecompliance",
                                description="Compliance measures for sparse recovery.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in DEFAULTS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON config file")
        s.add_argument("--seed", type=int, required=True)
        s.add_argument("--out", type=Path, default=Path("results"))
        s.add_argument("--n", type=int)
        s.add_argument("--k", type=int)
        s.add_argument("--samples", type=int)
        s.add_argument("--budget", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--workers", type=int)
        s.add_argument("--regularizer", action="append", dest="regularizers",
                       help="regularizer spec, repeatable (l1, wl1:1,1,10, ksupport:2, atoms:FILE, ...)")
        s.add_argument("--no-plots", action="store_true")
    s = sub.add_parser("solve", help="solve one recovery instance given as JSON")
    s.add_argument("instance", type=Path)
    s.add_argument("--out", type=Path, help="write the result JSON here instead of stdout")
    return p


def _load_config(args) -> ExperimentConfig:
    data = dict(DEFAULTS[args.command], experiment=args.command)
    base = Path(".")
    if args.config:
        base = args.config.parent
        loaded = json.loads(args.config.read_text())
        if loaded.get("experiment", args.command) != args.command:
            raise ConfigError(f"config is for {loaded['experiment']!r}, not {args.command!r}")
        data.update(loaded)
    overrides = {k: getattr(args, k) for k in ("seed", "n", "k", "samples", "budget",
                                               "trials", "workers", "regularizers")}
    if args.no_plots:
        overrides["plots"] = False
    return ExperimentConfig.from_dict(data, base_dir=str(base), **overrides)


def _solve(args) -> int:
    doc = json.loads(args.instance.read_text())
    M = np.array(doc["M"], dtype=float)
    y = np.array(doc["y"], dtype=float)
    x0 = np.array(doc["x0"], dtype=float) if doc.get("x0") is not None else None
    n = M.shape[1]
    model = SparseModel(n, int(doc.get("k", 1)))
    R = parse_regularizer(doc.get("regularizer", "l1"), model, args.instance.parent)
    inst = RecoveryInstance(M, y, R, x0)
    x = solve(inst)
    result = {"M": M.tolist(), "y": y.tolist(), "x0": None if x0 is None else x0.tolist(),
              "regularizer": R.descriptor, "solution": x.tolist()}
    if x0 is not None and weighted_l1_weights(R, n) is not None:
        result["certificate"] = nonuniform_certificate(M, x0, R).to_json()
    text = json.dumps(result, indent=2)
    if args.out:
        args.out.write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return _solve(args)
        config = _load_config(args)
        summary = run(config)
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        paths = write_outputs(summary, config, args.out, stamp)
    except (ComplianceError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for a in summary.assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'} {a['name']}")
    print(f"wrote {args.out / paths['csv']}")
    if not summary.ok:
        for v in summary.violations:
            print(f"violation: {json.dumps(v)}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
