"""Command-line entry point: run, catalog, verify and discontinuity subcommands.

Exit status is 0 when every verdict passes, 2 when a verdict fails and 1 on an
execution error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .catalog import builtin, builtin_catalog
from .runner import EXIT_ERROR, EXIT_OK, Report, discontinuity_experiment, run_catalog
from .schema import ScenarioError, load
from .verify import verify_inequalities

OUT_ENV = "PHLAB_OUT"


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "reports")


def _scenarios(args) -> list:
    if args.config:
        return [load(args.config)]
    if args.builtin:
        return [builtin(args.builtin)]
    return builtin_catalog()


def _print_verdicts(report: Report) -> None:
    for v in report.verdicts:
        if v.status == "skipped":
            print(f"  SKIP  {v.name}: {v.reason}")
            continue
        lhs = "-" if v.lhs is None else f"{v.lhs:.6g}"
        rhs = "-" if v.rhs is None else f"{v.rhs:.6g}"
        print(f"  {v.status.upper():4}  {v.name}: lhs={lhs} rhs={rhs} tol={v.tolerance:g}")


def _summarize(report: Report) -> None:
    print(f"{report.name}: {report.status} ({report.wall_time.get('total', 0.0):.1f} s)")
    for kind, entry in report.body.get("experiments", {}).items():
        if entry["status"] == "error":
            print(f"  ERROR {kind}: {entry['error']}")
    if "error" in report.body:
        print(f"  ERROR {report.body['error']}")
    _print_verdicts(report)


def _finish(reports: list, out: Path | None) -> int:
    for r in reports:
        if out is not None:
            r.write(out)
        _summarize(r)
    return max((r.exit_code for r in reports), default=EXIT_OK)


def cmd_run(args) -> int:
    reports = run_catalog(_scenarios(args), args.seed, args.threads)
    return _finish(reports, _out_dir(args))


def cmd_catalog(args) -> int:
    scenarios = builtin_catalog()
    if args.dump:
        d = Path(args.dump)
        d.mkdir(parents=True, exist_ok=True)
        for sc in scenarios:
            (d / f"{sc.name}.json").write_text(json.dumps(sc.to_dict(), indent=2) + "\n")
    for sc in scenarios:
        print(f"{sc.name:24} {sc.map['kind']:6} {' '.join(sc.kinds)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.report:
        body = json.loads(Path(args.report).read_text())
        results = {k: e["result"] for k, e in body["experiments"].items()
                   if e["status"] == "ok" and k != "verify"}
        verdicts = [v.to_dict() for v in verify_inequalities(body["scenario"]["map"], results)]
        failed = any(v["status"] == "fail" for v in verdicts)
        errored = any(e["status"] == "error" for e in body["experiments"].values())
        report = Report({**body, "verdicts": verdicts,
                         "status": "error" if errored else "fail" if failed else "pass"})
        _summarize(report)
        return report.exit_code
    reports = run_catalog(_scenarios(args), args.seed, args.threads)
    return _finish(reports, None if args.out is None else _out_dir(args))


def cmd_discontinuity(args) -> int:
    eps = [float(e) for e in args.eps.split(",")]
    report = discontinuity_experiment(eps, args.c, 0 if args.seed is None else args.seed)
    return _finish([report], _out_dir(args))


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _threads(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phlab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None,
                        help="override the scenario seed")
    common.add_argument("--out", default=None,
                        help=f"report directory (default ${OUT_ENV} or ./reports)")
    common.add_argument("--threads", type=_threads, default=1,
                        help="worker threads; affects wall time only")
    pick = argparse.ArgumentParser(add_help=False)
    g = pick.add_mutually_exclusive_group()
    g.add_argument("--config", help="scenario JSON file")
    g.add_argument("--builtin", help="built-in scenario name")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common, pick],
                       help="run scenarios (default: whole catalog) and write reports")
    s.set_defaults(func=cmd_run)
    s = sub.add_parser("catalog", help="list built-in scenarios")
    s.add_argument("--dump", help="also write each scenario as JSON into this directory")
    s.set_defaults(func=cmd_catalog)
    s = sub.add_parser("verify", parents=[common, pick],
                       help="print verdicts for scenarios or for an existing report")
    s.add_argument("--report", help="recompute verdicts from a report JSON instead of running")
    s.set_defaults(func=cmd_verify)
    s = sub.add_parser("discontinuity", parents=[common],
                       help="entropy jump of the skew family across the saddle-node")
    s.add_argument("--eps", default="0,0.005,-0.005", help="comma-separated eps values")
    s.add_argument("--c", type=float, default=0.05, help="circle map amplitude")
    s.set_defaults(func=cmd_discontinuity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
