"""Command-line entry point: ingest -> detect -> rank -> resolve -> simulate -> report.

Exit status: 0 on success, 1 on domain/config errors (a JSON diagnostic is
printed to stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date, timedelta
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .config import (
    atomic_write_text,
    load_app_config,
    load_profiles,
    load_registry,
    load_toml,
)
from .detection import detect_conflicts
from .domain import ConflictCase, Strategy, events_to_csv, read_events_csv
from .errors import ConfigError, HomeConflictError, SchemaError
from .evaluation import (
    DEFAULT_BATCHES,
    DEFAULT_STDDEV,
    DEFAULT_FIXTURE,
    AccuracyReport,
    DistKind,
    DistributionSpec,
    ExperimentConfig,
    Fixture,
    aggregate_reports,
    fixtures_from_cases,
    reports_from_csv,
    reports_to_csv,
    reports_to_records,
    run_experiment,
)
from .ingest import CASAS_WINDOW, DEFAULT_SETTLE, load_home, merge_homes
from .prioritization import explain_ranking
from .resolution import (
    decision_to_dict,
    resolve_adaptive,
    resolve_average,
    resolve_static_priority,
    resolve_use_first,
)

log = logging.getLogger("homeconflict")


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def _read_conflicts(path: str) -> list[ConflictCase]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"conflicts file not found: {path}", path=path) from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}", path=path) from exc
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a JSON list of conflict records", path=path)
    return [ConflictCase.from_dict(d) for d in data]


def _read_events(path: str):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return read_events_csv(fh)
    except FileNotFoundError:
        raise ConfigError(f"events file not found: {path}", path=path) from None


# --- subcommands ---------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> None:
    registry = load_registry(args.registry)
    streams = []
    for spec in args.home:
        label, sep, path = spec.partition("=")
        if not sep:
            label, path = Path(spec).stem, spec
        try:
            streams.append(load_home(path, label, strict=not args.lenient))
        except FileNotFoundError:
            raise ConfigError(f"log file not found: {path}", path=path) from None
    window = None
    if args.casas_window:
        window = CASAS_WINDOW
    if args.start or args.end:
        window = (
            date.fromisoformat(args.start) if args.start else date.min,
            date.fromisoformat(args.end) if args.end else date.max,
        )
    merged = merge_homes(streams, registry, window, timedelta(seconds=args.settle))
    log.info("merged %d events from %d homes", len(merged), len(streams))
    _emit(events_to_csv(merged), args.out)


def cmd_detect(args: argparse.Namespace) -> None:
    events = _read_events(args.events)
    profiles = load_profiles(args.profiles)
    cases = detect_conflicts(events, profiles)
    log.info("%d conflicts detected", len(cases))
    _emit(_dump_json([c.to_dict() for c in cases]), args.out)


def cmd_rank(args: argparse.Namespace) -> None:
    cases = _read_conflicts(args.conflicts)
    profiles = load_profiles(args.profiles)
    app = load_app_config(args.config)
    out = []
    for case in cases:
        report = explain_ranking(case, profiles, app.templates, delta=app.delta)
        out.append({"conflict": case.to_dict(), **report.to_dict()})
    _emit(_dump_json(out), args.out)


def cmd_resolve(args: argparse.Namespace) -> None:
    cases = _read_conflicts(args.conflicts)
    profiles = load_profiles(args.profiles)
    app = load_app_config(args.config)
    registry = load_registry(args.registry) if args.registry else None
    strategy = Strategy(args.strategy)
    order = tuple(x.strip() for x in args.order.split(",") if x.strip()) if args.order else None
    if strategy is Strategy.STATIC_PRIORITY and not order:
        raise ConfigError("the static strategy needs --order R1,R2,...")
    decisions = []
    for case in cases:
        if strategy is Strategy.ADAPTIVE:
            report = explain_ranking(case, profiles, app.templates, delta=app.delta)
            d = resolve_adaptive(case, report, app.strategy_config(case.attribute, registry))
        elif strategy is Strategy.AVERAGE:
            d = resolve_average(case)
        elif strategy is Strategy.USE_FIRST:
            d = resolve_use_first(case)
        else:
            d = resolve_static_priority(case, order)
        decisions.append(decision_to_dict(d))
    _emit(_dump_json(decisions), args.out)


def load_experiments(path: str | Path, seed: int | None = None) -> list[ExperimentConfig]:
    """One experiment per ``[[distributions]]`` entry (or per ``derive.kinds`` entry)."""
    path = Path(path)
    d = load_toml(path)
    base = path.parent
    if seed is None:
        if "seed" not in d:
            raise ConfigError("experiments draw random numbers; give 'seed' in the config or --seed")
        seed = int(d["seed"])
    strategies = tuple(d.get("strategies", ("adaptive", "average")))
    batches = tuple(d.get("batch_sizes", DEFAULT_BATCHES))
    baseline = d.get("baseline", "average")
    common = dict(seed=seed, strategies=strategies, batch_sizes=batches, baseline=baseline)

    try:
        if "derive" in d:
            der = d["derive"]
            cases = _read_conflicts(str(base / der["conflicts"]))
            profiles = load_profiles(base / der["profiles"])
            history = list(_read_events(str(base / der["history"]))) if der.get("history") else []
            app = load_app_config(base / der["config"] if der.get("config") else None)
            stddev = float(der.get("stddev", DEFAULT_STDDEV))
            out = []
            for kind in der.get("kinds", [k.value for k in DistKind]):
                kind = DistKind(kind)
                fixtures = fixtures_from_cases(
                    cases, profiles, history, kind, templates=app.templates, stddev=stddev,
                )
                if not fixtures:
                    raise ConfigError("no numeric conflicts to simulate", conflicts=der["conflicts"])
                out.append(ExperimentConfig(dist=fixtures[0].dist, fixtures=tuple(fixtures),
                                            label=f"{kind.value}(derived)", **common))
            return out

        fixtures = tuple(
            Fixture(f.get("name", f"fixture-{k}"), {s: float(v) for s, v in f["setpoints"].items()},
                    DistributionSpec.from_dict(f["distribution"]) if "distribution" in f else None)
            for k, f in enumerate(d.get("fixtures", []))
        ) or (DEFAULT_FIXTURE,)
        dists = d.get("distributions") or ([d["distribution"]] if "distribution" in d else None)
        if not dists:
            raise ConfigError("experiment config needs [[distributions]] or a [derive] table")
        return [ExperimentConfig(dist=DistributionSpec.from_dict(x), fixtures=fixtures, **common) for x in dists]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad experiment config: {exc}") from exc


def _render(reports: Sequence[AccuracyReport], as_json: bool) -> str:
    if as_json:
        return _dump_json(reports_to_records(reports))
    return reports_to_csv(reports)


def cmd_simulate(args: argparse.Namespace) -> None:
    experiments = load_experiments(args.config, args.seed)
    reports = [run_experiment(cfg) for cfg in experiments]
    if len(reports) > 1:
        reports.append(aggregate_reports(reports))
    _emit(_render(reports, args.json), args.out)


def cmd_report(args: argparse.Namespace) -> None:
    reports: list[AccuracyReport] = []
    for path in args.reports:
        try:
            with open(path, encoding="utf-8", newline="") as fh:
                reports.extend(r for r in reports_from_csv(fh) if r.distribution != "all")
        except FileNotFoundError:
            raise ConfigError(f"report file not found: {path}", path=path) from None
    overall = aggregate_reports(reports)
    out = [*reports, overall]
    if args.out:
        _emit(_render(out, args.json), args.out)
    width = max(len(r.distribution) for r in out)
    for r in out:
        for b in r.batch_sizes:
            cells = "  ".join(f"{s}={r.fractions[b][s]:.3f}" for s in r.strategies)
            print(f"{r.distribution:<{width}}  B={b:<5d} {cells}")


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homeconflict", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("ingest", help="parse CASAS logs and merge homes into a normalized event CSV")
    s.add_argument("--home", action="append", required=True, metavar="LABEL=PATH",
                   help="raw log of one single-resident home; LABEL becomes the resident id (repeatable)")
    s.add_argument("--registry", required=True, help="sensor registry TOML")
    s.add_argument("--start", help="first date kept (YYYY-MM-DD)")
    s.add_argument("--end", help="last date kept (YYYY-MM-DD)")
    s.add_argument("--casas-window", action="store_true", help="restrict to 2011-06-15..2011-08-14")
    s.add_argument("--settle", type=float, default=DEFAULT_SETTLE.total_seconds(),
                   help="settling window in seconds for rapidly changing values (default 60)")
    s.add_argument("--lenient", action="store_true", help="skip malformed lines instead of failing")
    s.add_argument("--out", required=True, help="output event CSV ('-' for stdout)")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("detect", help="find conflicts in an event CSV")
    s.add_argument("--events", required=True)
    s.add_argument("--profiles", required=True, help="resident profiles TOML")
    s.add_argument("--out", required=True, help="conflicts JSON ('-' for stdout)")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("rank", help="rank the residents of each conflict, with AHP diagnostics")
    s.add_argument("--conflicts", required=True)
    s.add_argument("--profiles", required=True)
    s.add_argument("--config", help="app config TOML (templates, delta, rounding, granularity)")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("resolve", help="compute setpoints for each conflict under one strategy")
    s.add_argument("--conflicts", required=True)
    s.add_argument("--profiles", required=True)
    s.add_argument("--strategy", required=True, choices=[x.value for x in Strategy])
    s.add_argument("--order", help="comma-separated resident order for the static strategy")
    s.add_argument("--config", help="app config TOML")
    s.add_argument("--registry", help="sensor registry TOML (per-attribute rounding granularity)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_resolve)

    s = sub.add_parser("simulate", help="Monte Carlo comparison of strategies against sampled ground truth")
    s.add_argument("--config", required=True, help="experiment TOML")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--json", action="store_true", help="emit JSON records instead of CSV")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("report", help="average simulation reports across distributions and print a table")
    s.add_argument("--reports", nargs="+", required=True, help="report CSVs from simulate")
    s.add_argument("--json", action="store_true")
    s.add_argument("--out", help="also write the aggregated report here")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except HomeConflictError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), default=str) + "\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(json.dumps({"error": "cli.InvalidInput", "message": str(exc), "details": {}}) + "\n")
        return 1
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())
