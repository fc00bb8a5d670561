"""Command line interface.

Usage::

    gridsync analyze scenario.json
    gridsync simulate scenario.json --horizon 30 --dt 0.01 --out traj.csv
    gridsync verify scenario.json
    gridsync sweep scenario.json --param m --from 0.5 --to 5 --points 20 --log
    gridsync spectrum scenario.json

Exit codes: 0 success (all rows pass for ``verify``), 1 usage error,
2 domain error (disconnected network, invalid parameters), 3 verification
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .config import parse_config
from .errors import GridSyncError
from .scenario import (
    SWEEP_PARAMS,
    analyze_scenario,
    rows_pass,
    spectrum_summary,
    sweep_scenario,
    verify_scenario,
)
from .simulate import assemble, measure, step_response, write_trajectory_csv

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(x):
    """Round floats to 15 significant digits so reports are byte-stable."""
    if isinstance(x, (bool, str)) or x is None:
        return x
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.15g}") if math.isfinite(x) else None
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.15g}"
    return str(x)


def _dump_json(obj) -> str:
    return json.dumps(_num(obj), indent=2) + "\n"


def _dump_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(_num(row.get(h))) for h in header])
    return buf.getvalue()


def _flatten_report(report: dict):
    rows = []
    for name in ("w_inf", "nadir", "t_nadir", "rocof", "sync_cost"):
        rows.append({"metric": name, "value": report[name]["value"], "method": report[name]["method"]})
    return rows


def _emit(args, text: str):
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    try:
        cfg = parse_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config} is not valid JSON: {exc}") from exc
    return cfg


def _format(args, cfg, default="json"):
    return args.format or cfg.output.get("format") or default


def cmd_analyze(args) -> int:
    cfg = _load(args)
    report = analyze_scenario(cfg)
    if _format(args, cfg) == "csv":
        _emit(args, _dump_csv(["metric", "value", "method"], _flatten_report(report)))
    else:
        _emit(args, _dump_json(report))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    horizon = args.horizon if args.horizon is not None else cfg.horizon
    dt = args.dt if args.dt is not None else cfg.dt
    traj = step_response(assemble(cfg.network, cfg.machine), cfg.u0, horizon, dt)
    if (args.format or "csv") == "json":
        rep = measure(traj)
        _emit(args, _dump_json({
            "w_inf": rep.w_inf, "nadir": rep.nadir,
            "t_nadir": "none (monotone)" if rep.t_nadir is None else rep.t_nadir,
            "rocof": rep.rocof, "sync_cost": rep.sync_cost, "method": "simulated",
        }))
    else:
        buf = io.StringIO()
        write_trajectory_csv(traj, buf)
        _emit(args, buf.getvalue())
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    rows = verify_scenario(cfg, mc_samples=args.mc_samples, seed=args.seed)
    ok = rows_pass(rows)
    if _format(args, cfg) == "csv":
        _emit(args, _dump_csv(["metric", "closed_form", "simulated", "rel_error", "pass", "status"], rows))
    else:
        _emit(args, _dump_json({"rows": rows, "all_pass": ok}))
    if not ok:
        failed = ", ".join(r["metric"] for r in rows if r["pass"] is False)
        print(f"verification failed: {failed}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(args) -> int:
    cfg = _load(args)
    rows = sweep_scenario(cfg, args.param, args.start, args.stop, args.points, args.log)
    if (args.format or "csv") == "json":
        _emit(args, _dump_json(rows))
    else:
        header = ["param_value", "w_inf", "nadir", "rocof", "sync_cost", "underdamped"]
        _emit(args, _dump_csv(header, rows))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    summary = spectrum_summary(cfg)
    if _format(args, cfg) == "csv":
        rows = [{"k": k, "lambda": lam} for k, lam in enumerate(summary["lambdas"])]
        _emit(args, _dump_csv(["k", "lambda"], rows))
    else:
        _emit(args, _dump_json(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for randomized checks")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)

    parser = _Parser(prog="gridsync", parents=[common],
                     description="Closed-form and simulated synchronization metrics for power grids.")
    parser.set_defaults(out=None, seed=None, format=None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="closed-form metrics report")
    p.add_argument("config")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common], help="simulate the step response")
    p.add_argument("config")
    p.add_argument("--horizon", type=float, help="simulated time span (s)")
    p.add_argument("--dt", type=float, help="uniform sample step (s); adaptive if omitted")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="closed form vs simulation table")
    p.add_argument("config")
    p.add_argument("--mc-samples", type=int, default=0,
                   help="also check mean costs by Monte Carlo with this many samples")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="metrics along a parameter sweep")
    p.add_argument("config")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--log", action="store_true", help="logarithmic spacing")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", parents=[common], help="scaled-Laplacian spectrum")
    p.add_argument("config")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gridsync: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GridSyncError as exc:
        print(f"gridsync: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
