"""Setpoint strategies for a detected conflict.

``resolve_adaptive`` blends preferences by resident priority; the others are the
usual baselines (mean of preferences, first user wins, fixed household order).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Sequence

from .domain import ConflictCase, ResolutionDecision, Strategy, is_numeric
from .errors import NonNumericAttribute, UnrankedParticipant
from .prioritization import RankingReport, ResidentWeight

_GRID_TOL = 1e-9


class Rounding(str, enum.Enum):
    DIRECTIONAL = "directional"
    NEAREST = "nearest"
    NONE = "none"


@dataclass(frozen=True)
class StrategyConfig:
    rounding: Rounding = Rounding.DIRECTIONAL
    granularity: float = 1.0
    static_order: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.granularity <= 0:
            raise ValueError("granularity must be positive")
        if self.static_order is not None:
            order = tuple(self.static_order)
            if len(set(order)) != len(order):
                raise ValueError(f"static order has duplicates: {order}")
            object.__setattr__(self, "static_order", order)


def _numeric_prefs(case: ConflictCase) -> list[float]:
    bad = [p.resident_id for p in case.participants if not is_numeric(p.preferred_value)]
    if bad:
        raise NonNumericAttribute(
            f"attribute {case.attribute!r} is not numeric for {', '.join(bad)}; blending is undefined",
            attribute=case.attribute,
            residents=bad,
        )
    return [float(p.preferred_value) for p in case.participants]


def _round_to_grid(raw: float, target: float, cfg: StrategyConfig) -> float:
    g = cfg.granularity
    steps = raw / g
    nearest = round(steps)
    if cfg.rounding is Rounding.NONE:
        return raw
    if abs(steps - nearest) <= _GRID_TOL:
        return nearest * g
    if cfg.rounding is Rounding.NEAREST:
        return nearest * g
    if target > raw:
        return math.ceil(steps) * g
    if target < raw:
        return math.floor(steps) * g
    return raw


def resolve_adaptive(
    case: ConflictCase,
    ranking: Sequence[ResidentWeight] | RankingReport,
    cfg: StrategyConfig = StrategyConfig(),
) -> ResolutionDecision:
    """Priority-weighted blend, rounded toward the top-ranked resident and clamped to the preference range."""
    report = ranking if isinstance(ranking, RankingReport) else None
    weights = list(report.weights if report else ranking)
    prefs = dict(zip((p.resident_id for p in case.participants), _numeric_prefs(case)))
    if {w.resident_id for w in weights} != set(prefs) or len(weights) != len(prefs):
        raise UnrankedParticipant(
            "ranking must cover exactly the conflict participants",
            ranked=sorted(w.resident_id for w in weights),
            participants=sorted(prefs),
        )
    raw = sum(w.normalized_weight * prefs[w.resident_id] for w in weights)
    lo, hi = min(prefs.values()), max(prefs.values())
    raw = min(max(raw, lo), hi)
    top = min(weights, key=lambda w: w.rank)
    setpoint = min(max(_round_to_grid(raw, prefs[top.resident_id], cfg), lo), hi)
    return ResolutionDecision(
        strategy=Strategy.ADAPTIVE,
        case=case,
        setpoint=setpoint,
        raw_setpoint=raw,
        ranking=tuple((w.resident_id, w.normalized_weight) for w in sorted(weights, key=lambda w: w.rank)),
        diagnostics=report,
    )


def resolve_average(case: ConflictCase) -> ResolutionDecision:
    prefs = _numeric_prefs(case)
    mean = math.fsum(prefs) / len(prefs)
    return ResolutionDecision(Strategy.AVERAGE, case, mean, mean)


def resolve_use_first(case: ConflictCase) -> ResolutionDecision:
    first = min(case.participants, key=lambda p: (p.start, p.resident_id))
    return ResolutionDecision(Strategy.USE_FIRST, case, first.preferred_value, first.preferred_value)


def resolve_static_priority(case: ConflictCase, order: Sequence[str]) -> ResolutionDecision:
    position = {rid: k for k, rid in enumerate(order)}
    missing = [p.resident_id for p in case.participants if p.resident_id not in position]
    if missing:
        raise UnrankedParticipant(f"static order does not rank {', '.join(missing)}", residents=missing)
    chosen = min(case.participants, key=lambda p: position[p.resident_id])
    return ResolutionDecision(Strategy.STATIC_PRIORITY, case, chosen.preferred_value, chosen.preferred_value)


def decision_to_dict(decision: ResolutionDecision) -> dict[str, Any]:
    d: dict[str, Any] = {
        "strategy": decision.strategy.value,
        "conflict": decision.case.to_dict(),
        "setpoint": decision.setpoint,
        "raw_setpoint": decision.raw_setpoint,
        "ranking": [{"resident_id": rid, "normalized_weight": w} for rid, w in decision.ranking],
    }
    if decision.diagnostics is not None:
        d["diagnostics"] = decision.diagnostics.to_dict()
    return d
