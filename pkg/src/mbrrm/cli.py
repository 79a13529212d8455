"""Command-line front end.

Subcommands::

    mbrrm gen      --beams L --seed S -o scenario.json
    mbrrm solve    -s scenario.json --method {coloring,alternating,bruteforce} -o plan.json
    mbrrm schedule -s scenario.json --seed S -o schedule.json
    mbrrm bh       -s scenario.json --method {proportional,lp,bruteforce} -o pattern.json
    mbrrm report   -s scenario.json --plan plan.json --format {json,csv}

Exit status is 0 on success, 1 on invalid input and 2 when a solver guard
rail rejects the instance. Errors go to stderr and name the offending field.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .beam_hopping import (BH_METHODS, DEFAULT_SNAPSHOT_CAP, design_pattern,
                           enumerate_snapshots, snapshots_from_json)
from .carrier_power import (RELAXATION_MODES, SolverOptions, alternating_solve,
                            best_coloring, brute_force_plan, coloring_baseline, plan_usc)
from .errors import GuardRailError, MbrrmError, ParseError, ValidationError
from .metrics import AllocationPlan, metrics_report, plan_violations
from .scenario import (ScenarioParams, generate_scenario, generate_user_channels,
                       load_scenario, scenario_to_document)
from .sched_precode import DEMO_MODCOD, ModCodTable, joint_schedule_precode
from .serialize import dumps, fmt_float

EXIT_OK, EXIT_INVALID, EXIT_GUARD = 0, 1, 2
SOLVE_METHODS = ("coloring", "alternating", "bruteforce")
FORMATS = ("json", "csv")


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors: exit 1, not argparse's 2
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _read(path: str, field: str) -> str:
    if not path:
        raise ValidationError(field, "path must be non-empty")
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(field, f"cannot read {path!r}: {exc.strerror}") from exc


def _write(path: str, text: str) -> None:
    if not path:
        raise ValidationError("out", "path must be non-empty")
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ValidationError("out", f"cannot write {path!r}: {exc.strerror}") from exc


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _scenario(args):
    return load_scenario(_read(args.scenario, "scenario"))


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    if args.format != "json":
        raise ValidationError("format", "gen writes JSON scenario files only")
    params = ScenarioParams(
        num_beams=args.beams, seed=args.seed, layout=args.layout, spacing=args.spacing,
        k_carriers=args.carriers, p_total_w=args.power, n_transponders=args.transponders,
        demand_min_bps=args.demand_min, demand_max_bps=args.demand_max)
    _write(args.out, dumps(scenario_to_document(generate_scenario(params))))
    return EXIT_OK


def cmd_solve(args) -> int:
    s = _scenario(args)
    opts = SolverOptions(seed=args.seed, relaxation_mode=args.relaxation,
                         power_grid_levels=args.levels, n_colors=args.n_colors)
    trace_csv = None
    n_colors = None
    if args.method == "coloring":
        if args.n_colors is None:
            plan, n_colors = best_coloring(s)
        else:
            n_colors = args.n_colors
            plan = coloring_baseline(s, n_colors)
    elif args.method == "alternating":
        res = alternating_solve(s, opts)
        plan, n_colors, trace_csv = res.plan, res.n_colors, res.trace_csv()
    else:
        plan = brute_force_plan(s, levels=args.levels)
    usc = plan_usc(s, plan.x, plan.p)
    if args.trace:
        if trace_csv is None:
            raise ValidationError("trace", "only the alternating method records a trace")
        _write(args.trace, trace_csv)
    if args.format == "json":
        doc = {"method": args.method, "usc": usc}
        if n_colors is not None:
            doc["n_colors"] = n_colors
        doc.update(plan.to_document())
        text = dumps(doc)
    else:
        K, L = plan.x.shape
        text = _csv(["carrier", "beam", "x", "p_w"],
                    ((k, s.beam_ids[l], int(plan.x[k, l]), float(plan.p[k, l]))
                     for k in range(K) for l in range(L)))
    _write(args.out, text)
    return EXIT_OK


def cmd_schedule(args) -> int:
    s = _scenario(args)
    table = DEMO_MODCOD
    if args.modcod:
        table = ModCodTable.from_csv(_read(args.modcod, "modcod"))
    channels = generate_user_channels(s, args.seed)
    res = joint_schedule_precode(s, channels, alpha=args.alpha, rounds=args.rounds,
                                 eps=args.eps, frame_size=args.frame_size, table=table)
    if args.format == "json":
        text = dumps(res.to_document())
    else:
        rows = []
        for i, f in enumerate(res.frame_plan.frames):
            users = " ".join(str(n) for _, n in f.users)
            rows.append((i, s.beam_ids[f.beam], users, min(f.sinr_db), f.efficiency, f.loss))
        text = _csv(["frame", "beam", "users", "min_sinr_db", "efficiency", "loss"], rows)
    _write(args.out, text)
    return EXIT_OK


def cmd_bh(args) -> int:
    s = _scenario(args)
    if args.snapshots:
        ss = snapshots_from_json(s, _read(args.snapshots, "snapshots"))
    else:
        ss = enumerate_snapshots(s, args.max_active, args.min_distance, args.snapshot_cap)
    window = args.slots * args.slot_duration
    res = design_pattern(ss, s.demands, window, args.slot_duration, args.method,
                         ordering=args.ordering, max_switches_per_window=args.max_switches,
                         max_revisit_gap_slots=args.max_gap)
    if args.format == "json":
        text = dumps(res.to_document(s.beam_ids))
    else:
        rows = [(g, " ".join(s.beam_ids[l] for l in snap), int(res.pattern.t[g]))
                for g, snap in enumerate(ss.snapshots)]
        text = _csv(["snapshot", "beams", "slots"], rows)
    _write(args.out, text)
    return EXIT_OK


def cmd_report(args) -> int:
    s = _scenario(args)
    try:
        doc = json.loads(_read(args.plan, "plan"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"plan file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("plan", "expected a JSON object with keys x and p_w")
    plan = AllocationPlan.from_document(doc)
    if plan.x.shape != (s.k_carriers, s.num_beams):
        raise ValidationError("plan", f"shape {plan.x.shape} does not match K x L = "
                                      f"{(s.k_carriers, s.num_beams)}")
    bad = plan_violations(s, plan)
    if bad:
        raise ValidationError("plan", "; ".join(bad))
    rep = metrics_report(s, plan)
    _write(args.out, rep.to_json() if args.format == "json" else rep.to_csv())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
    if scenario:
        p.add_argument("--scenario", "-s", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--out", "-o", default="-", help="output file, '-' for stdout (default: -)")
    p.add_argument("--format", choices=FORMATS, default="json", help="output format (default: json)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mbrrm", description="Multibeam satellite radio-resource toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a random scenario")
    _common(p, scenario=False)
    p.add_argument("--beams", type=int, required=True, help="number of beams L")
    p.add_argument("--layout", choices=("hex", "line"), default="hex", help="beam layout (default: hex)")
    p.add_argument("--spacing", type=float, default=1.0, help="beam spacing (default: 1.0)")
    p.add_argument("--carriers", type=int, default=4, help="carriers K (default: 4)")
    p.add_argument("--power", type=float, default=200.0, help="total power in W (default: 200)")
    p.add_argument("--transponders", type=int, default=0, help="transponder count, 0 for none (default: 0)")
    p.add_argument("--demand-min", type=float, default=5e8, help="minimum demand bit/s (default: 5e8)")
    p.add_argument("--demand-max", type=float, default=4e9, help="maximum demand bit/s (default: 4e9)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="carrier and power allocation")
    _common(p)
    p.add_argument("--method", choices=SOLVE_METHODS, default="alternating",
                   help="solver (default: alternating)")
    p.add_argument("--relaxation", choices=RELAXATION_MODES, default="binary_hungarian",
                   help="carrier assignment mode (default: binary_hungarian)")
    p.add_argument("--levels", type=int, default=4, help="brute-force power grid levels (default: 4)")
    p.add_argument("--n-colors", type=int, default=None,
                   help="reuse colors for the baseline (default: best divisor of K)")
    p.add_argument("--trace", default=None, help="write the per-iteration trace CSV here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("schedule", help="user scheduling with RZF precoding")
    _common(p)
    p.add_argument("--modcod", default=None, help="ModCod CSV (default: built-in demo table)")
    p.add_argument("--frame-size", type=int, default=2, help="users per frame (default: 2)")
    p.add_argument("--rounds", type=int, default=3, help="schedule/precode rounds (default: 3)")
    p.add_argument("--eps", type=float, default=0.4, help="semi-orthogonality threshold (default: 0.4)")
    p.add_argument("--alpha", type=float, default=None,
                   help="RZF regularizer (default: L * mean noise / P_total)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("bh", help="beam-hopping illumination design")
    _common(p)
    p.add_argument("--method", choices=BH_METHODS, default="lp", help="design method (default: lp)")
    p.add_argument("--max-active", type=int, default=2, help="beams lit per snapshot (default: 2)")
    p.add_argument("--min-distance", type=float, default=0.0,
                   help="minimum distance between lit beams (default: 0)")
    p.add_argument("--snapshot-cap", type=int, default=DEFAULT_SNAPSHOT_CAP,
                   help=f"snapshot enumeration limit (default: {DEFAULT_SNAPSHOT_CAP})")
    p.add_argument("--snapshots", default=None, help="JSON list of beam-id lists instead of enumeration")
    p.add_argument("--slots", type=int, default=10, help="slots per hopping window (default: 10)")
    p.add_argument("--slot-duration", type=float, default=1e-3, help="slot length in s (default: 1e-3)")
    p.add_argument("--ordering", choices=("interleaved", "blocked"), default="interleaved",
                   help="slot sequence ordering (default: interleaved)")
    p.add_argument("--max-switches", type=int, default=None, help="audit limit on switches per window")
    p.add_argument("--max-gap", type=int, default=None, help="audit limit on dark slots between visits")
    p.set_defaults(func=cmd_bh)

    p = sub.add_parser("report", help="metrics of a plan")
    _common(p)
    p.add_argument("--plan", required=True, help="plan JSON written by solve")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GuardRailError as exc:
        print(f"mbrrm {args.command}: rejected: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValidationError as exc:
        print(f"mbrrm {args.command}: invalid {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, MbrrmError, ValueError) as exc:
        print(f"mbrrm {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
