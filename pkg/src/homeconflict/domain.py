"""Shared vocabulary: services, service events, resident profiles, conflicts, decisions."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from datetime import datetime
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

from .errors import InvalidInterval, InvalidProfile, MissingField, SchemaError

Value = float | str

EVENT_CSV_COLUMNS = ("start", "end", "service_id", "service_name", "location", "user", "attribute", "value")

SEVERITY_MIN = 0
SEVERITY_MAX = 10


def parse_value(text: str) -> Value:
    """Numeric when the text is a finite float, verbatim text otherwise."""
    try:
        v = float(text)
    except ValueError:
        return text
    return v if math.isfinite(v) else text


def format_value(value: Value) -> str:
    if isinstance(value, str):
        return value
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def is_numeric(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


@dataclass(frozen=True)
class Quantity:
    value: Value | None
    unit: str


@dataclass(frozen=True)
class Service:
    """An IoT service: identity, functional capabilities and unit-bearing attributes."""

    service_id: str
    service_name: str
    functional: frozenset[str] = frozenset()
    nonfunctional: Mapping[str, Quantity] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.service_id:
            raise MissingField("service_id must be non-empty")
        for name, q in self.nonfunctional.items():
            if not q.unit:
                raise MissingField(f"attribute {name!r} of {self.service_id} has no unit", attribute=name)
        object.__setattr__(self, "functional", frozenset(self.functional))
        object.__setattr__(self, "nonfunctional", MappingProxyType(dict(self.nonfunctional)))


@dataclass(frozen=True)
class ServiceEvent:
    """One timed, located, user-attributed invocation of a service.

    Intervals are half-open ``[start, end)``. Construction does not validate;
    use :func:`validate_event` (a :class:`ServiceEventLog` does so for every member).
    """

    service_id: str
    start: datetime
    end: datetime
    location: str
    user: str
    attrs: Mapping[str, Value] = field(default_factory=dict)
    service_name: str = ""
    dangling: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "attrs", MappingProxyType(dict(self.attrs)))

    def sort_key(self) -> tuple:
        return (
            self.start,
            self.service_id,
            self.user,
            self.end,
            self.location,
            tuple(sorted((k, format_value(v)) for k, v in self.attrs.items())),
        )


def validate_event(event: ServiceEvent) -> None:
    """Raise if ``event`` violates a ServiceEvent invariant."""
    for name in ("service_id", "location", "user"):
        if not getattr(event, name):
            raise MissingField(f"event field {name!r} is empty", field=name)
    if event.start is None or event.end is None:
        raise MissingField("event interval is incomplete", field="start" if event.start is None else "end")
    if not event.start < event.end:
        raise InvalidInterval(
            f"start {event.start.isoformat()} is not before end {event.end.isoformat()}",
            start=event.start.isoformat(),
            end=event.end.isoformat(),
        )


class ServiceEventLog(Sequence[ServiceEvent]):
    """Events validated and sorted by start, then service id, then user.

    The remaining fields complete the key so ordering never depends on input order.
    """

    def __init__(self, events: Iterable[ServiceEvent] = ()) -> None:
        evs = list(events)
        for ev in evs:
            validate_event(ev)
        self._events = tuple(sorted(evs, key=ServiceEvent.sort_key))

    def __getitem__(self, i):  # type: ignore[override]
        return self._events[i]

    def __len__(self) -> int:
        return len(self._events)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ServiceEventLog):
            return NotImplemented
        return self._events == other._events

    def __repr__(self) -> str:
        return f"ServiceEventLog({len(self)} events)"

    @property
    def users(self) -> set[str]:
        return {e.user for e in self._events}


class Criterion(str, enum.Enum):
    AGE = "Age"
    VI = "VI"
    HI = "HI"
    ILLNESS = "Illness"

    @property
    def profile_field(self) -> str:
        return _CRITERION_FIELD[self]


_CRITERION_FIELD = {
    Criterion.AGE: "age",
    Criterion.VI: "visual_impairment",
    Criterion.HI: "hearing_impairment",
    Criterion.ILLNESS: "illness",
}

CRITERIA: tuple[Criterion, ...] = (Criterion.AGE, Criterion.VI, Criterion.HI, Criterion.ILLNESS)


@dataclass(frozen=True)
class ResidentProfile:
    resident_id: str
    age: int
    visual_impairment: int = 0
    hearing_impairment: int = 0
    illness: int = 0

    def __post_init__(self) -> None:
        if not self.resident_id:
            raise InvalidProfile("resident_id must be non-empty")
        if not isinstance(self.age, int) or isinstance(self.age, bool) or self.age < 0:
            raise InvalidProfile(f"{self.resident_id}: age must be a non-negative integer", age=self.age)
        for name in ("visual_impairment", "hearing_impairment", "illness"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or not SEVERITY_MIN <= v <= SEVERITY_MAX:
                raise InvalidProfile(
                    f"{self.resident_id}: {name} must be an integer in [{SEVERITY_MIN}, {SEVERITY_MAX}]",
                    field=name,
                    value=v,
                )

    def value(self, criterion: Criterion) -> int:
        return getattr(self, criterion.profile_field)


class ConflictType(str, enum.Enum):
    TEMPERATURE = "Temperature"
    ILLUMINATION = "Illumination"
    AUDIO = "Audio"
    OTHER = "Other"


@dataclass(frozen=True)
class Participant:
    resident_id: str
    preferred_value: Value
    start: datetime


@dataclass(frozen=True)
class ConflictCase:
    conflict_type: ConflictType
    service_id: str
    attribute: str
    location: str
    overlap_start: datetime
    overlap_end: datetime
    participants: tuple[Participant, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "participants", tuple(self.participants))

    @property
    def label(self) -> str:
        if self.conflict_type is ConflictType.OTHER:
            return f"Other({self.attribute})"
        return self.conflict_type.value

    @property
    def preferences(self) -> dict[str, Value]:
        return {p.resident_id: p.preferred_value for p in self.participants}

    def to_dict(self) -> dict[str, Any]:
        return {
            "conflict_type": self.conflict_type.value,
            "label": self.label,
            "service_id": self.service_id,
            "attribute": self.attribute,
            "location": self.location,
            "overlap_interval": [self.overlap_start.isoformat(), self.overlap_end.isoformat()],
            "participants": [
                {"resident_id": p.resident_id, "preferred_value": p.preferred_value, "start": p.start.isoformat()}
                for p in self.participants
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ConflictCase:
        try:
            start, end = d["overlap_interval"]
            return cls(
                conflict_type=ConflictType(d["conflict_type"]),
                service_id=d["service_id"],
                attribute=d["attribute"],
                location=d["location"],
                overlap_start=datetime.fromisoformat(start),
                overlap_end=datetime.fromisoformat(end),
                participants=tuple(
                    Participant(p["resident_id"], p["preferred_value"], datetime.fromisoformat(p["start"]))
                    for p in d["participants"]
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed conflict record: {exc}") from exc


def validate_case(case: ConflictCase) -> None:
    ids = [p.resident_id for p in case.participants]
    if len(ids) < 2:
        raise SchemaError("a conflict needs at least two participants")
    if len(set(ids)) != len(ids):
        raise SchemaError("conflict participants must be distinct residents", participants=ids)
    if len({format_value(p.preferred_value) for p in case.participants}) < 2:
        raise SchemaError("conflict participants all prefer the same value")
    if not case.overlap_start < case.overlap_end:
        raise InvalidInterval("conflict overlap interval is empty")


class Strategy(str, enum.Enum):
    ADAPTIVE = "adaptive"
    AVERAGE = "average"
    USE_FIRST = "use-first"
    STATIC_PRIORITY = "static"


@dataclass(frozen=True)
class ResolutionDecision:
    strategy: Strategy
    case: ConflictCase
    setpoint: Value
    raw_setpoint: Value
    ranking: tuple[tuple[str, float], ...] = ()
    diagnostics: Any = None


# --- normalized event CSV ------------------------------------------------------


def write_events_csv(events: Iterable[ServiceEvent], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EVENT_CSV_COLUMNS)
    for ev in events:
        base = [ev.start.isoformat(), ev.end.isoformat(), ev.service_id, ev.service_name, ev.location, ev.user]
        if not ev.attrs:
            w.writerow(base + ["", ""])
        for name in sorted(ev.attrs):
            w.writerow(base + [name, format_value(ev.attrs[name])])


def events_to_csv(events: Iterable[ServiceEvent]) -> str:
    buf = io.StringIO()
    write_events_csv(events, buf)
    return buf.getvalue()


def read_events_csv(fh: Iterable[str]) -> ServiceEventLog:
    """Parse the normalized event CSV; rows sharing an event identity merge into one event."""
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("event CSV is empty; header row is mandatory") from None
    if tuple(h.strip() for h in header) != EVENT_CSV_COLUMNS:
        raise SchemaError("unexpected event CSV header", expected=list(EVENT_CSV_COLUMNS), got=header)
    grouped: dict[tuple, dict[str, Value]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(EVENT_CSV_COLUMNS):
            raise SchemaError(f"line {lineno}: expected {len(EVENT_CSV_COLUMNS)} columns", line=lineno)
        start, end, sid, sname, loc, user, attr, value = row
        try:
            key = (datetime.fromisoformat(start), datetime.fromisoformat(end), sid, sname, loc, user)
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}", line=lineno) from exc
        attrs = grouped.setdefault(key, {})
        if attr:
            attrs[attr] = parse_value(value)
    return ServiceEventLog(
        ServiceEvent(service_id=sid, start=s, end=e, location=loc, user=u, attrs=a, service_name=sn)
        for (s, e, sid, sn, loc, u), a in grouped.items()
    )
