"""Command-line entry point.

Exit codes: 0 success, 1 validation or acceptance failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import presets
from .energy import table2_arithmetic
from .engine import parse_trace_line, report_from_trace, simulate
from .errors import ValidationError
from .scenario import Scenario, errors_only, load_scenario, validate

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
TABLE2_TOLERANCE = 0.05
BUILTIN_PREFIX = "builtin:"

log = logging.getLogger("wsnlight")


def _out(args: argparse.Namespace, text: str) -> None:
    if not args.quiet:
        print(text)


def _err(text: str) -> None:
    print(text, file=sys.stderr)


def _load(args: argparse.Namespace) -> Scenario:
    path = args.scenario
    if path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX):]
        if name not in presets.BUILTIN:
            raise ValidationError(f"unknown built-in scenario {name!r}")
        scenario = presets.BUILTIN[name]()
    else:
        scenario = load_scenario(path)
    return _overrides(scenario, args)


def _overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    if args.seed is not None:
        scenario = scenario.replace(seed=args.seed)
    if args.duration is not None:
        scenario = scenario.replace(duration=args.duration)
    return scenario


def _report_diagnostics(exc: ValidationError) -> None:
    _err(f"invalid scenario: {exc}")
    for diag in getattr(exc, "diagnostics", None) or []:
        _err(f"  {diag}")


def _write_report(report, path: str | None) -> None:
    if path is None:
        return
    Path(path).write_text(report.to_text())
    Path(path + ".csv").write_text(report.to_csv())


def _default_outputs(args: argparse.Namespace, scenario: Scenario) -> tuple[str, str]:
    stem = scenario.name or "scenario"
    return (
        args.trace_out or f"{stem}.trace.tsv",
        args.report_out or f"{stem}.report.txt",
    )


def _simulate_to_file(scenario: Scenario, trace_path: str | None):
    if trace_path is None:
        return simulate(scenario, keep_trace=False)
    with open(trace_path, "w") as fh:
        return simulate(scenario, keep_trace=False, trace_sink=lambda r: fh.write(r.format() + "\n"))


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args)
        trace_path, report_path = _default_outputs(args, scenario)
        result = _simulate_to_file(scenario, trace_path)
        _write_report(result.report, report_path)
    except ValidationError as exc:
        _report_diagnostics(exc)
        return EXIT_INVALID
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO
    rep = result.report
    _out(args, f"scenario {scenario.name}: {rep.days:.3f} simulated days")
    if result.commissioned_at is not None:
        _out(args, f"commissioned at t={result.commissioned_at:.3f} s")
    else:
        _out(args, "commissioning did not finish")
    _out(args, f"energy: {rep.total_wh_month:.1f} Wh/month (baseline {rep.baseline_wh_month:.1f})")
    _out(args, f"savings: {rep.savings_wh_month:.1f} Wh/month")
    _out(args, f"trace: {trace_path}\nreport: {report_path}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args)
    except ValidationError as exc:
        _report_diagnostics(exc)
        return EXIT_INVALID
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO
    diags = validate(scenario)
    for diag in diags:
        _err(str(diag))
    if errors_only(diags):
        return EXIT_INVALID
    _out(args, "OK")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args)
        with open(args.trace) as fh:
            report = report_from_trace((parse_trace_line(line) for line in fh if line.strip()), scenario)
        _write_report(report, args.report_out)
    except ValidationError as exc:
        _report_diagnostics(exc)
        return EXIT_INVALID
    except (ValueError, KeyError) as exc:
        _err(f"malformed trace {args.trace}: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO
    _out(args, report.to_text().rstrip("\n"))
    return EXIT_OK


def _deviation(value: float, golden: float) -> float:
    return (value - golden) / golden


def cmd_table2(args: argparse.Namespace) -> int:
    arith = table2_arithmetic()
    _out(args, "normal system (always full brightness):")
    _out(args, f"  energy per day    {arith['normal_wh_day']:.0f} Wh")
    _out(args, f"  energy per month  {arith['normal_wh_month']:.0f} Wh")
    if args.baseline_only:
        return EXIT_OK

    _out(args, "closed-form arithmetic, proposed system:")
    _out(args, f"  4 dimmed lamps, day   {arith['dimmed_day_wh']:.0f} Wh")
    _out(args, f"  middle lamp, day      {arith['full_day_wh']:.0f} Wh")
    _out(args, f"  all lamps, night      {arith['night_wh']:.0f} Wh")
    _out(args, f"  per day {arith['proposed_wh_day']:.0f} Wh, per month {arith['proposed_wh_month']:.0f} Wh")
    _out(args, f"  savings {arith['savings_wh_month']:.0f} Wh/month")

    scenario = _overrides(presets.table2(), args)
    try:
        result = _simulate_to_file(scenario, args.trace_out)
        _write_report(result.report, args.report_out)
    except OSError as exc:
        _err(f"I/O error: {exc}")
        return EXIT_IO
    rep = result.report
    rows = [
        ("normal Wh/day", 2400.0, rep.baseline_wh_day),
        ("normal Wh/month", 72000.0, rep.baseline_wh_month),
        ("proposed Wh/day", 1920.0, rep.total_wh_day),
        ("proposed Wh/month", 57600.0, rep.total_wh_month),
    ]
    _out(args, f"event-driven simulation ({rep.days:g} days):")
    _out(args, f"  {'figure':<18}{'golden':>10}{'simulated':>14}{'deviation':>11}")
    worst = 0.0
    for label, golden, value in rows:
        dev = _deviation(value, golden)
        worst = max(worst, abs(dev))
        _out(args, f"  {label:<18}{golden:>10.0f}{value:>14.1f}{dev:>+10.2%}")
    _out(args, f"  savings {rep.savings_wh_month:.1f} Wh/month (golden 14400)")
    if worst > TABLE2_TOLERANCE:
        _err(f"deviation {worst:.2%} exceeds {TABLE2_TOLERANCE:.0%}")
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsnlight", description="Simulate a wireless daylight-harvesting lighting network."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress the summary")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--duration", type=float, default=None, help="override the run length (s)")
    common.add_argument("--trace-out", default=None, help="trace file (tab-separated)")
    common.add_argument("--report-out", default=None, help="report file; CSV goes to <path>.csv")

    sub = parser.add_subparsers(dest="command", required=True)
    scen_help = f"scenario YAML file, or {BUILTIN_PREFIX}NAME ({', '.join(presets.BUILTIN)})"

    p = sub.add_parser("run", parents=[common], help="run a scenario")
    p.add_argument("--scenario", required=True, help=scen_help)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", parents=[common], help="check a scenario file")
    p.add_argument("--scenario", required=True, help=scen_help)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", parents=[common], help="rebuild the energy report from a trace")
    p.add_argument("--scenario", required=True, help=scen_help)
    p.add_argument("trace", help="trace file written by 'run'")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("table2", parents=[common], help="reproduce the five-lamp energy table")
    p.add_argument("--baseline-only", action="store_true", help="only print the normal-system rows")
    p.set_defaults(func=cmd_table2)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
