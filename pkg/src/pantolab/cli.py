"""Command-line interface: ``pantolab {simulate,ensemble,diagnose,verify,construct}``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 acceptance failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, PantolabError, UsageError
from . import runner, verify

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ACCEPTANCE = 4


def _parser():
    p = argparse.ArgumentParser(prog="pantolab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="scenario JSON file")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides config and $PANTOLAB_SEED)")
        sp.add_argument("--out", help="output directory")

    s = sub.add_parser("simulate", help="run one trajectory and write CSV + report")
    common(s)
    s.add_argument("--stream", type=int, default=0, help="RNG stream of the path (stochastic kinds)")
    e = sub.add_parser("ensemble", help="run N paths and summarize")
    common(e)
    e.add_argument("--threads", type=int, default=1, help="worker threads")
    d = sub.add_parser("diagnose", help="diagnostics on an existing trajectory CSV")
    d.add_argument("--config", required=True,
                   help='JSON with "csv", "diagnostics" and optional "kappa", "component"')
    d.add_argument("--out", help="output directory")
    v = sub.add_parser("verify", help="run an acceptance suite")
    v.add_argument("suite", help=f"one of: {', '.join(sorted(verify.SUITES))}")
    common(v, config=False)
    c = sub.add_parser("construct", help="tabulate a manufactured forcing")
    c.add_argument("--config", required=True, help='JSON with "z", "params", "t", "points"')
    c.add_argument("--out", help="output directory")
    return p


def _load(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None


def _dispatch(args):
    if args.command == "simulate":
        cfg = runner.load_config(args.config, args.seed)
        rep = runner.run_simulate(cfg, args.out, args.stream)
        print(json.dumps({"csv": rep.csv_paths, "summary": rep.summary}, sort_keys=True))
        return EXIT_OK
    if args.command == "ensemble":
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        cfg = runner.load_config(args.config, args.seed)
        rep = runner.run_ensemble(cfg, args.out, args.threads)
        print(json.dumps({"csv": rep.csv_paths, "tally": rep.summary["tally"]}, sort_keys=True))
        return EXIT_OK
    if args.command == "diagnose":
        d = _load(args.config)
        if "csv" not in d:
            raise ConfigError("csv", "missing")
        rep = runner.run_diagnose(d["csv"], d.get("diagnostics", {}), args.out, d.get("kappa"),
                                  int(d.get("component", 0)))
        print(json.dumps(rep, sort_keys=True, indent=1))
        return EXIT_OK
    if args.command == "verify":
        seed = runner.resolve_seed(None, args.seed)
        seed = verify.DEFAULT_SEED if seed is None else seed
        report = verify.run_verify(args.suite, seed, echo=print)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"verify_{args.suite}.json").write_text(verify.report_json(report, timings=True))
        print("suite", args.suite, "PASS" if report.passed else "FAIL")
        return EXIT_OK if report.passed else EXIT_ACCEPTANCE
    if args.command == "construct":
        res = runner.run_construct(_load(args.config), args.out)
        print(json.dumps(res, sort_keys=True))
        return EXIT_OK
    raise UsageError(f"unknown command {args.command!r}")


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PantolabError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
