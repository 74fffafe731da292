"""Conflict detection over a service event log.

Two events conflict when they share a location and service, overlap in time
(half-open intervals), come from different users and disagree on at least one
non-functional attribute. Overlapping events are grouped into maximal cliques
per (service, location) by a sweep over sorted endpoints, so three residents
fighting over one thermostat form one case rather than three.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Sequence

from .domain import (
    ConflictCase,
    ConflictType,
    Participant,
    ResidentProfile,
    ServiceEvent,
    ServiceEventLog,
    format_value,
)
from .errors import UnknownResident

Interval = tuple[datetime, datetime]

_TYPE_KEYWORDS: tuple[tuple[ConflictType, tuple[str, ...]], ...] = (
    (ConflictType.TEMPERATURE, ("temperature", "temp", "thermostat", "setpoint")),
    (ConflictType.ILLUMINATION, ("illumination", "illuminance", "luminosity", "brightness", "light", "lumen", "lux")),
    (ConflictType.AUDIO, ("audio", "volume", "sound", "loudness")),
)


@dataclass(frozen=True)
class OverlapGroup:
    service_id: str
    location: str
    events: tuple[ServiceEvent, ...]
    shared_interval: Interval


def temporal_overlap(a: Interval, b: Interval) -> Interval | None:
    """Intersection of two half-open intervals, or ``None`` when it has zero length."""
    start = max(a[0], b[0])
    end = min(a[1], b[1])
    return (start, end) if start < end else None


def classify_attribute(attribute: str) -> ConflictType:
    name = attribute.lower()
    for ctype, words in _TYPE_KEYWORDS:
        if any(w in name for w in words):
            return ctype
    return ConflictType.OTHER


def classify_conflict(case: ConflictCase) -> ConflictType:
    return classify_attribute(case.attribute)


def overlap_groups(events: Sequence[ServiceEvent]) -> list[OverlapGroup]:
    """Maximal groups of pairwise-overlapping events per (service, location).

    In an interval graph the maximal cliques are exactly the active sets seen
    just before an end that follows at least one start; ends at a timestamp are
    processed before starts there, which gives half-open semantics.
    """
    partitions: dict[tuple[str, str], list[ServiceEvent]] = defaultdict(list)
    for ev in events:
        partitions[(ev.service_id, ev.location)].append(ev)

    groups: list[OverlapGroup] = []
    for (service_id, location), evs in sorted(partitions.items()):
        evs = sorted(evs, key=ServiceEvent.sort_key)
        points = []
        for k, ev in enumerate(evs):
            points.append((ev.start, 1, k))
            points.append((ev.end, 0, k))
        points.sort()
        active: dict[int, None] = {}
        grew = False
        for _, is_start, k in points:
            if is_start:
                active[k] = None
                grew = True
                continue
            if grew and len(active) >= 2:
                members = tuple(evs[i] for i in sorted(active))
                shared = (max(e.start for e in members), min(e.end for e in members))
                groups.append(OverlapGroup(service_id, location, members, shared))
            grew = False
            del active[k]
    return groups


def _cases_for_group(group: OverlapGroup) -> list[ConflictCase]:
    # one request per user: the latest-starting event in the group is their current intent
    latest: dict[str, ServiceEvent] = {}
    for ev in group.events:
        cur = latest.get(ev.user)
        if cur is None or ev.sort_key() > cur.sort_key():
            latest[ev.user] = ev
    if len(latest) < 2:
        return []

    attributes = sorted({a for ev in latest.values() for a in ev.attrs})
    cases = []
    for attr in attributes:
        holders = [(user, ev) for user, ev in sorted(latest.items()) if attr in ev.attrs]
        if len(holders) < 2:
            continue
        if len({format_value(ev.attrs[attr]) for _, ev in holders}) < 2:
            continue
        cases.append(
            ConflictCase(
                conflict_type=classify_attribute(attr),
                service_id=group.service_id,
                attribute=attr,
                location=group.location,
                overlap_start=group.shared_interval[0],
                overlap_end=group.shared_interval[1],
                participants=tuple(Participant(user, ev.attrs[attr], ev.start) for user, ev in holders),
            )
        )
    return cases


def detect_conflicts(
    log: ServiceEventLog | Iterable[ServiceEvent],
    profiles: Mapping[str, ResidentProfile] | Iterable[ResidentProfile],
) -> list[ConflictCase]:
    """All conflict cases in ``log``, ordered by overlap start.

    A maximal overlap group yields one case per attribute on which its users disagree.
    """
    if not isinstance(log, ServiceEventLog):
        log = ServiceEventLog(log)
    known = set(profiles) if isinstance(profiles, Mapping) else {p.resident_id for p in profiles}
    unknown = sorted(log.users - known)
    if unknown:
        raise UnknownResident(f"no profile for user(s) {', '.join(unknown)}", residents=unknown)

    cases = [case for group in overlap_groups(log) for case in _cases_for_group(group)]
    cases.sort(key=lambda c: (c.overlap_start, c.overlap_end, c.service_id, c.location, c.attribute))
    return cases
