"""Resident ranking: conflict-type criteria templates, per-criterion scoring, synthesis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import ahp
from .ahp import RANDOM_INDEX, PairwiseMatrix, PrioritizationResult
from .domain import CRITERIA, ConflictCase, ConflictType, Criterion, ResidentProfile
from .errors import AHPError, InvalidOverride, UnknownResident

CRITERIA_LABELS: tuple[str, ...] = tuple(c.value for c in CRITERIA)

# Age, VI, HI, Illness; illness emphasised for temperature conflicts
BASE_TEMPLATE = PairwiseMatrix.from_rows(
    [
        [1, "1/3", "1/3", "1/7"],
        [3, 1, 1, "1/5"],
        [3, 1, 1, "1/5"],
        [7, 5, 5, 1],
    ],
    CRITERIA_LABELS,
)

EMPHASIS: Mapping[ConflictType, Criterion] = {
    ConflictType.TEMPERATURE: Criterion.ILLNESS,
    ConflictType.ILLUMINATION: Criterion.VI,
    ConflictType.AUDIO: Criterion.HI,
}

DEFAULT_DELTA = 1.0
# ranking compares weights at this many decimals so float noise never decides a tie
_RANK_DECIMALS = 12


@dataclass(frozen=True)
class CriteriaTemplate:
    conflict_type: ConflictType
    matrix: PairwiseMatrix


@dataclass(frozen=True)
class ResidentWeight:
    resident_id: str
    raw_weight: float
    normalized_weight: float
    rank: int


@dataclass(frozen=True)
class RankingReport:
    """Everything behind a ranking, for audit output."""

    template: CriteriaTemplate
    criteria: PrioritizationResult
    alternatives: Mapping[Criterion, PrioritizationResult]
    weights: tuple[ResidentWeight, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "conflict_type": self.template.conflict_type.value,
            "criteria_matrix": self.template.matrix.to_dict(),
            "criteria": self.criteria.to_dict(),
            "alternatives": {c.value: r.to_dict() for c, r in self.alternatives.items()},
            "ranking": [
                {
                    "resident_id": w.resident_id,
                    "raw_weight": w.raw_weight,
                    "normalized_weight": w.normalized_weight,
                    "rank": w.rank,
                }
                for w in self.weights
            ],
        }


def emphasized_template(criterion: Criterion) -> PairwiseMatrix:
    """The base template with the illness row/column swapped into ``criterion``'s place."""
    i, j = CRITERIA.index(Criterion.ILLNESS), CRITERIA.index(criterion)
    order = list(range(len(CRITERIA)))
    order[i], order[j] = order[j], order[i]
    idx = np.asarray(order)
    return PairwiseMatrix(CRITERIA_LABELS, BASE_TEMPLATE.entries[np.ix_(idx, idx)])


def _override_for(
    conflict_type: ConflictType, attribute: str | None, overrides: Mapping[str, PairwiseMatrix]
) -> PairwiseMatrix | None:
    keys = [conflict_type.value]
    if conflict_type is ConflictType.OTHER and attribute:
        keys.insert(0, f"Other({attribute})")
    for key in keys:
        if key in overrides:
            return overrides[key]
    return None


def criteria_matrix_for(
    conflict_type: ConflictType,
    overrides: Mapping[str, PairwiseMatrix] | None = None,
    *,
    attribute: str | None = None,
    ri_table: Mapping[int, float] = RANDOM_INDEX,
) -> CriteriaTemplate:
    """Criteria matrix for a conflict type.

    ``overrides`` maps a conflict-type name (``"Temperature"``) or an other-label
    (``"Other(door_angle)"``) to a replacement matrix over the four criteria.
    """
    override = _override_for(conflict_type, attribute, overrides or {})
    if override is None:
        if conflict_type in EMPHASIS:
            return CriteriaTemplate(conflict_type, emphasized_template(EMPHASIS[conflict_type]))
        return CriteriaTemplate(conflict_type, PairwiseMatrix.uniform(CRITERIA_LABELS))

    if set(override.labels) != set(CRITERIA_LABELS) or override.n != len(CRITERIA_LABELS):
        raise InvalidOverride(
            f"criteria override for {conflict_type.value} must be labelled {list(CRITERIA_LABELS)}",
            labels=list(override.labels),
        )
    matrix = override.permuted([override.labels.index(lbl) for lbl in CRITERIA_LABELS])
    try:
        ahp.prioritize(matrix, ri_table)
    except AHPError as exc:
        raise InvalidOverride(
            f"criteria override for {conflict_type.value} rejected: {exc}", cause=exc.code, **exc.details
        ) from exc
    return CriteriaTemplate(conflict_type, matrix)


def score_residents(
    profiles: Sequence[ResidentProfile],
    criterion: Criterion,
    delta: float = DEFAULT_DELTA,
) -> PairwiseMatrix:
    """Alternative comparison matrix for one criterion.

    ``a_ij = clamp((v_i + delta) / (v_j + delta), 1/9, 9)`` with the upper triangle
    computed and the lower triangle set to exact reciprocals.
    """
    if not profiles:
        raise ValueError("score_residents needs at least one profile")
    if delta <= 0:
        raise ValueError("delta must be positive")
    v = np.array([p.value(criterion) for p in profiles], dtype=float) + delta
    n = len(v)
    a = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            r = min(max(v[i] / v[j], ahp.SCALE_MIN), ahp.SCALE_MAX)
            a[i, j] = r
            a[j, i] = 1.0 / r
    return PairwiseMatrix(tuple(p.resident_id for p in profiles), a)


def _profile_lookup(profiles: Mapping[str, ResidentProfile] | Iterable[ResidentProfile]) -> dict[str, ResidentProfile]:
    if isinstance(profiles, Mapping):
        return dict(profiles)
    return {p.resident_id: p for p in profiles}


def explain_ranking(
    case: ConflictCase,
    profiles: Mapping[str, ResidentProfile] | Iterable[ResidentProfile],
    templates: Mapping[str, PairwiseMatrix] | None = None,
    ri_table: Mapping[int, float] = RANDOM_INDEX,
    delta: float = DEFAULT_DELTA,
) -> RankingReport:
    lookup = _profile_lookup(profiles)
    missing = [p.resident_id for p in case.participants if p.resident_id not in lookup]
    if missing:
        raise UnknownResident(f"no profile for {', '.join(missing)}", residents=missing)
    people = [lookup[p.resident_id] for p in case.participants]

    template = criteria_matrix_for(case.conflict_type, templates, attribute=case.attribute, ri_table=ri_table)
    crit = ahp.prioritize(template.matrix, ri_table)
    alternatives = {c: ahp.prioritize(score_residents(people, c, delta), ri_table) for c in CRITERIA}

    raw = np.zeros(len(people))
    for k, c in enumerate(CRITERIA):
        raw += crit.weights[k] * alternatives[c].weights
    norm = raw / raw.sum()

    order = sorted(range(len(people)), key=lambda i: (-round(float(norm[i]), _RANK_DECIMALS), people[i].resident_id))
    weights = tuple(
        ResidentWeight(people[i].resident_id, float(raw[i]), float(norm[i]), rank)
        for rank, i in enumerate(order, start=1)
    )
    return RankingReport(template, crit, alternatives, weights)


def rank_residents(
    case: ConflictCase,
    profiles: Mapping[str, ResidentProfile] | Iterable[ResidentProfile],
    templates: Mapping[str, PairwiseMatrix] | None = None,
    ri_table: Mapping[int, float] = RANDOM_INDEX,
    delta: float = DEFAULT_DELTA,
) -> list[ResidentWeight]:
    """Residents of ``case`` ordered by synthesized priority, rank 1 first."""
    return list(explain_ranking(case, profiles, templates, ri_table, delta).weights)
