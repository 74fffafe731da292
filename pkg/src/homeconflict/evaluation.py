"""Monte Carlo comparison of resolution strategies against sampled ground truth.

Each trial draws one ground-truth value; the strategy whose (fixed) setpoint lies
closest wins the trial. Trial ``t`` always draws from its own Philox substream
keyed by ``(seed, t)``, so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .domain import ConflictCase, Criterion, ResidentProfile, ServiceEvent, is_numeric
from .errors import InvalidDistribution, ShapeMismatch
from .prioritization import EMPHASIS, explain_ranking
from .resolution import StrategyConfig, resolve_adaptive, resolve_average

DEFAULT_BATCHES = (200, 400, 600, 800, 1000)
DEFAULT_STDDEV = 1.0
TIE_TOL = 1e-9
CONTEXT_PREFIX = "context:"
REPORT_COLUMNS = ("distribution", "batch_size", "strategy", "win_fraction", "seed")


class DistKind(str, enum.Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"
    TRIANGULAR = "triangular"


@dataclass(frozen=True)
class DistributionSpec:
    """``normal(mean, stddev)``, ``uniform(min, max)`` or ``triangular(min, mode, max)``."""

    kind: DistKind
    params: tuple[float, ...]
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        kind = DistKind(self.kind)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "flags", tuple(self.flags))
        expected = 3 if kind is DistKind.TRIANGULAR else 2
        if len(params) != expected or not all(math.isfinite(p) for p in params):
            raise InvalidDistribution(f"{kind.value} takes {expected} finite parameters, got {params}")
        if kind is DistKind.NORMAL and params[1] < 0:
            raise InvalidDistribution("stddev must be non-negative", stddev=params[1])
        if kind is DistKind.UNIFORM and params[0] > params[1]:
            raise InvalidDistribution("uniform needs min <= max", min=params[0], max=params[1])
        if kind is DistKind.TRIANGULAR and not params[0] <= params[1] <= params[2]:
            raise InvalidDistribution("triangular needs min <= mode <= max", params=list(params))

    @classmethod
    def normal(cls, mean: float, stddev: float = DEFAULT_STDDEV, flags: Sequence[str] = ()) -> DistributionSpec:
        return cls(DistKind.NORMAL, (mean, stddev), tuple(flags))

    @classmethod
    def uniform(cls, lo: float, hi: float, flags: Sequence[str] = ()) -> DistributionSpec:
        return cls(DistKind.UNIFORM, (lo, hi), tuple(flags))

    @classmethod
    def triangular(cls, lo: float, mode: float, hi: float, flags: Sequence[str] = ()) -> DistributionSpec:
        return cls(DistKind.TRIANGULAR, (lo, mode, hi), tuple(flags))

    @property
    def label(self) -> str:
        return f"{self.kind.value}({', '.join(f'{p:g}' for p in self.params)})"

    @property
    def mean(self) -> float:
        if self.kind is DistKind.NORMAL:
            return self.params[0]
        return sum(self.params) / len(self.params)

    @property
    def variance(self) -> float:
        if self.kind is DistKind.NORMAL:
            return self.params[1] ** 2
        if self.kind is DistKind.UNIFORM:
            return (self.params[1] - self.params[0]) ** 2 / 12
        a, c, b = self.params
        return (a * a + b * b + c * c - a * b - a * c - b * c) / 18

    def to_dict(self) -> dict[str, Any]:
        names = {
            DistKind.NORMAL: ("mean", "stddev"),
            DistKind.UNIFORM: ("min", "max"),
            DistKind.TRIANGULAR: ("min", "mode", "max"),
        }[self.kind]
        d: dict[str, Any] = {"kind": self.kind.value, **dict(zip(names, self.params))}
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> DistributionSpec:
        try:
            kind = DistKind(str(d["kind"]).lower())
            if kind is DistKind.NORMAL:
                return cls.normal(d["mean"], d.get("stddev", DEFAULT_STDDEV))
            if kind is DistKind.UNIFORM:
                return cls.uniform(d["min"], d["max"])
            return cls.triangular(d["min"], d["mode"], d["max"])
        except (KeyError, ValueError) as exc:
            raise InvalidDistribution(f"bad distribution entry {dict(d)}: {exc}") from exc


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trial ``index``: Philox keyed by ``(seed, index)``."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | index))


def sample(dist: DistributionSpec, rng: np.random.Generator) -> float:
    """One variate, built from uniform draws only (inverse CDF / Box-Muller)."""
    if dist.kind is DistKind.UNIFORM:
        lo, hi = dist.params
        return lo + (hi - lo) * rng.random()
    if dist.kind is DistKind.TRIANGULAR:
        a, c, b = dist.params
        if a == b:
            return a
        u = rng.random()
        if u < (c - a) / (b - a):
            return a + math.sqrt(u * (b - a) * (c - a))
        return b - math.sqrt((1.0 - u) * (b - a) * (b - c))
    mean, sd = dist.params
    u1, u2 = rng.random(), rng.random()
    z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
    return mean + sd * z


def run_trial(decisions: Mapping[str, float], ground_truth: float, baseline: str | None = None) -> str:
    """Name of the strategy closest to ``ground_truth``.

    Ties (within 1e-9) go to ``baseline`` when it is among them, otherwise to the
    first tied strategy that is not ``"adaptive"``.
    """
    if len(decisions) < 2:
        raise ValueError("a trial needs at least two strategies")
    dist = {name: abs(float(v) - ground_truth) for name, v in decisions.items()}
    best = min(dist.values())
    tied = [name for name, d in dist.items() if d - best <= TIE_TOL]
    if len(tied) == 1:
        return tied[0]
    if baseline in tied:
        return baseline
    for name in tied:
        if name != "adaptive":
            return name
    return tied[0]


@dataclass(frozen=True)
class Fixture:
    name: str
    setpoints: Mapping[str, float]
    dist: DistributionSpec | None = None


DEFAULT_FIXTURE = Fixture("ac-25-vs-19", {"adaptive": 23.32, "average": 22.0})


@dataclass(frozen=True)
class ExperimentConfig:
    dist: DistributionSpec
    seed: int
    fixtures: tuple[Fixture, ...] = (DEFAULT_FIXTURE,)
    strategies: tuple[str, ...] = ("adaptive", "average")
    batch_sizes: tuple[int, ...] = DEFAULT_BATCHES
    baseline: str = "average"
    label: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "fixtures", tuple(self.fixtures))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "batch_sizes", tuple(int(b) for b in self.batch_sizes))
        if len(self.strategies) < 2:
            raise ValueError("an experiment compares at least two strategies")
        if not self.fixtures:
            raise ValueError("an experiment needs at least one fixture")
        b = self.batch_sizes
        if not b or any(x <= 0 for x in b) or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError(f"batch sizes must be positive and strictly ascending, got {b}")
        for f in self.fixtures:
            missing = [s for s in self.strategies if s not in f.setpoints]
            if missing:
                raise ValueError(f"fixture {f.name!r} has no setpoint for {missing}")


@dataclass(frozen=True)
class AccuracyReport:
    distribution: str
    seed: int | None
    fixture: str
    strategies: tuple[str, ...]
    fractions: Mapping[int, Mapping[str, float]] = field(default_factory=dict)

    @property
    def batch_sizes(self) -> tuple[int, ...]:
        return tuple(sorted(self.fractions))

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "distribution": self.distribution,
                "batch_size": b,
                "strategy": s,
                "win_fraction": self.fractions[b][s],
                "seed": self.seed,
            }
            for b in self.batch_sizes
            for s in self.strategies
        ]


def run_experiment(cfg: ExperimentConfig) -> AccuracyReport:
    """Win fractions per batch size; trial ``t`` is the same draw in every batch."""
    fractions: dict[int, dict[str, float]] = {}
    for batch in cfg.batch_sizes:
        wins: Counter[str] = Counter()
        for t in range(batch):
            fx = cfg.fixtures[t % len(cfg.fixtures)]
            truth = sample(fx.dist or cfg.dist, trial_rng(cfg.seed, t))
            decisions = {s: fx.setpoints[s] for s in cfg.strategies}
            wins[run_trial(decisions, truth, cfg.baseline)] += 1
        fractions[batch] = {s: wins[s] / batch for s in cfg.strategies}
    return AccuracyReport(
        distribution=cfg.label or cfg.dist.label,
        seed=cfg.seed,
        fixture="+".join(f.name for f in cfg.fixtures),
        strategies=cfg.strategies,
        fractions=fractions,
    )


def aggregate_reports(reports: Sequence[AccuracyReport], distribution: str = "all") -> AccuracyReport:
    """Unweighted mean of win fractions per (batch size, strategy)."""
    if not reports:
        raise ShapeMismatch("nothing to aggregate")
    first = reports[0]
    for r in reports[1:]:
        if r.strategies != first.strategies or r.batch_sizes != first.batch_sizes:
            raise ShapeMismatch(
                "reports differ in strategies or batch sizes",
                expected={"strategies": list(first.strategies), "batch_sizes": list(first.batch_sizes)},
                got={"strategies": list(r.strategies), "batch_sizes": list(r.batch_sizes)},
            )
    seeds = {r.seed for r in reports}
    fractions = {
        b: {s: math.fsum(r.fractions[b][s] for r in reports) / len(reports) for s in first.strategies}
        for b in first.batch_sizes
    }
    fixtures = sorted({r.fixture for r in reports})
    return AccuracyReport(
        distribution=distribution,
        seed=seeds.pop() if len(seeds) == 1 else None,
        fixture="+".join(fixtures),
        strategies=first.strategies,
        fractions=fractions,
    )


def reports_to_csv(reports: Iterable[AccuracyReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        for row in r.rows():
            w.writerow({**row, "win_fraction": repr(float(row["win_fraction"])),
                        "seed": "" if row["seed"] is None else row["seed"]})
    return buf.getvalue()


def reports_to_records(reports: Iterable[AccuracyReport]) -> list[dict[str, Any]]:
    return [row for r in reports for row in r.rows()]


def reports_from_csv(fh: Iterable[str]) -> list[AccuracyReport]:
    """Inverse of :func:`reports_to_csv`; one report per distribution label, in file order."""
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise ShapeMismatch("unexpected report header", expected=list(REPORT_COLUMNS), got=reader.fieldnames)
    grouped: dict[str, dict[str, Any]] = {}
    for row in reader:
        g = grouped.setdefault(row["distribution"], {"seed": row["seed"], "strategies": [], "fractions": {}})
        if row["strategy"] not in g["strategies"]:
            g["strategies"].append(row["strategy"])
        g["fractions"].setdefault(int(row["batch_size"]), {})[row["strategy"]] = float(row["win_fraction"])
    return [
        AccuracyReport(
            distribution=name,
            seed=int(g["seed"]) if g["seed"] else None,
            fixture="",
            strategies=tuple(g["strategies"]),
            fractions=g["fractions"],
        )
        for name, g in grouped.items()
    ]


# --- deriving ground-truth distributions from context ---------------------------


def _advantaged(case: ConflictCase, profiles: Mapping[str, ResidentProfile],
                criterion: Criterion) -> str:
    return min(case.participants, key=lambda p: (-profiles[p.resident_id].value(criterion), p.resident_id)).resident_id


def historical_preference(
    history: Iterable[ServiceEvent], case: ConflictCase, residents: Iterable[str], criterion: Criterion
) -> float | None:
    """Mean preference of ``residents`` on the case's service and attribute while in ``criterion``'s context.

    A history event is in context when it carries a positive ``context:<field>``
    attribute (e.g. ``context:illness``). Each resident's mean counts once.
    """
    tag = CONTEXT_PREFIX + criterion.profile_field
    wanted = set(residents)
    per_user: dict[str, list[float]] = {}
    for ev in history:
        if ev.user not in wanted or ev.service_id != case.service_id:
            continue
        value = ev.attrs.get(case.attribute)
        ctx = ev.attrs.get(tag)
        if is_numeric(value) and is_numeric(ctx) and ctx > 0:
            per_user.setdefault(ev.user, []).append(float(value))
    if not per_user:
        return None
    means = [math.fsum(v) / len(v) for _, v in sorted(per_user.items())]
    return math.fsum(means) / len(means)


def derive_distribution_params(
    case: ConflictCase,
    history: Iterable[ServiceEvent],
    profiles: Mapping[str, ResidentProfile],
    kind: DistKind | str = DistKind.NORMAL,
    stddev: float = DEFAULT_STDDEV,
    advantaged: str | None = None,
) -> DistributionSpec:
    """Ground-truth distribution for a numeric conflict.

    The centre is the mean of the advantaged resident's current preference and the
    other participants' historical preference under the advantaged resident's
    dominant context (the criterion the conflict type emphasises). Without usable
    history it falls back to the preference midpoint and flags ``empty_history``.
    Uniform spans the preference range; triangular uses it with the centre as mode.
    """
    kind = DistKind(kind)
    prefs = {p.resident_id: p.preferred_value for p in case.participants}
    bad = [rid for rid, v in prefs.items() if not is_numeric(v)]
    if bad:
        raise InvalidDistribution(f"attribute {case.attribute!r} is not numeric", residents=bad)
    lo, hi = min(prefs.values()), max(prefs.values())
    if kind is DistKind.UNIFORM:
        return DistributionSpec.uniform(lo, hi)

    flags: list[str] = []
    criterion = EMPHASIS.get(case.conflict_type)
    centre = None
    if criterion is None:
        flags.append("no_dominant_context")
    else:
        adv = advantaged or _advantaged(case, profiles, criterion)
        others = [rid for rid in prefs if rid != adv]
        hist = historical_preference(history, case, others, criterion)
        if hist is not None:
            centre = (float(prefs[adv]) + hist) / 2
    if centre is None:
        flags.append("empty_history")
        centre = (lo + hi) / 2

    if kind is DistKind.TRIANGULAR:
        return DistributionSpec.triangular(lo, min(max(centre, lo), hi), hi, flags)
    return DistributionSpec.normal(centre, stddev, flags)


def fixtures_from_cases(
    cases: Iterable[ConflictCase],
    profiles: Mapping[str, ResidentProfile],
    history: Sequence[ServiceEvent],
    kind: DistKind | str,
    *,
    templates: Mapping[str, Any] | None = None,
    strategy_cfg: StrategyConfig = StrategyConfig(),
    stddev: float = DEFAULT_STDDEV,
) -> list[Fixture]:
    """Adaptive-vs-average fixtures for every numeric case, each with its derived distribution."""
    out = []
    for k, case in enumerate(cases):
        if not all(is_numeric(p.preferred_value) for p in case.participants):
            continue
        report = explain_ranking(case, profiles, templates)
        adaptive = resolve_adaptive(case, report, strategy_cfg)
        average = resolve_average(case)
        dist = derive_distribution_params(
            case, history, profiles, kind, stddev, advantaged=report.weights[0].resident_id
        )
        out.append(
            Fixture(
                f"{case.service_id}@{case.overlap_start.isoformat()}#{k}",
                {"adaptive": float(adaptive.setpoint), "average": float(average.setpoint)},
                dist,
            )
        )
    return out
