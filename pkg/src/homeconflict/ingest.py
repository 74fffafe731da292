"""CASAS-style sensor logs to service events.

A raw line is ``DATE TIME SENSOR VALUE [annotation...]``. Status sensors emit
ON/OFF (or OPEN/CLOSE) and delimit service events; numeric sensors bound to the
same service supply the requested attribute value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .domain import Quantity, Service, ServiceEvent, ServiceEventLog
from .errors import BadTimestamp, EmptyIntersection, MalformedLine, RegistryError

log = logging.getLogger(__name__)

START_TOKENS = frozenset({"ON", "OPEN"})
END_TOKENS = frozenset({"OFF", "CLOSE", "CLOSED"})
DEFAULT_SETTLE = timedelta(seconds=60)

# Default merged observation window for the HH102/HH104/HH105/HH106 homes.
CASAS_WINDOW = (date(2011, 6, 15), date(2011, 8, 14))


@dataclass(frozen=True)
class SensorReading:
    date: date
    time: time
    sensor_id: str
    value: str

    @property
    def timestamp(self) -> datetime:
        return datetime.combine(self.date, self.time)

    def to_line(self) -> str:
        return f"{self.date.isoformat()} {self.time.isoformat()} {self.sensor_id} {self.value}"


@dataclass(frozen=True)
class HomeStream:
    home_label: str
    readings: tuple[SensorReading, ...]
    resident_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "readings", tuple(sorted(self.readings, key=lambda r: (r.date, r.time))))

    @property
    def span(self) -> tuple[date, date] | None:
        if not self.readings:
            return None
        return self.readings[0].date, self.readings[-1].date


def _parse_time(text: str) -> time:
    for fmt in ("%H:%M:%S.%f", "%H:%M:%S"):
        try:
            return datetime.strptime(text, fmt).time()
        except ValueError:
            continue
    raise BadTimestamp(f"unparseable time {text!r}", time=text)


def parse_casas_line(line: str) -> SensorReading:
    tokens = line.split()
    if len(tokens) < 4:
        raise MalformedLine(f"expected DATE TIME SENSOR VALUE, got {line.strip()!r}", line=line.strip())
    d, t, sensor, value = tokens[:4]
    try:
        day = date.fromisoformat(d)
    except ValueError:
        raise BadTimestamp(f"unparseable date {d!r}", date=d) from None
    return SensorReading(day, _parse_time(t), sensor, value)


def read_casas(lines: Iterable[str], *, strict: bool = True) -> list[SensorReading]:
    """Parse every non-blank line; with ``strict=False`` bad lines are logged and skipped."""
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            out.append(parse_casas_line(line))
        except (MalformedLine, BadTimestamp) as exc:
            if strict:
                exc.details["lineno"] = lineno
                raise
            log.warning("line %d skipped: %s", lineno, exc)
    return out


def load_home(path: str | Path, home_label: str | None = None, resident_id: str | None = None,
              *, strict: bool = True) -> HomeStream:
    path = Path(path)
    label = home_label or path.stem
    with path.open(encoding="utf-8") as fh:
        readings = read_casas(fh, strict=strict)
    return HomeStream(label, tuple(readings), resident_id or label)


# --- sensor registry -----------------------------------------------------------


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    unit: str
    granularity: float = 1.0


@dataclass(frozen=True)
class SensorBinding:
    prefix: str
    service_id: str
    location: str
    service_name: str = ""
    attribute: str | None = None


@dataclass(frozen=True)
class SensorRegistry:
    """Maps sensor-id prefixes onto shared services; the longest matching prefix wins."""

    bindings: tuple[SensorBinding, ...]
    attributes: Mapping[str, AttributeSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bindings", tuple(sorted(self.bindings, key=lambda b: (-len(b.prefix), b.prefix))))
        for b in self.bindings:
            if b.attribute is not None and b.attribute not in self.attributes:
                raise RegistryError(f"sensor {b.prefix!r} reports undeclared attribute {b.attribute!r}",
                                    sensor=b.prefix, attribute=b.attribute)
        for spec in self.attributes.values():
            if not spec.unit:
                raise RegistryError(f"attribute {spec.name!r} has no unit", attribute=spec.name)

    def lookup(self, sensor_id: str) -> SensorBinding | None:
        for b in self.bindings:
            if sensor_id.startswith(b.prefix):
                return b
        return None

    def granularity(self, attribute: str) -> float:
        spec = self.attributes.get(attribute)
        return spec.granularity if spec else 1.0

    def services(self) -> dict[str, Service]:
        out: dict[str, Service] = {}
        for b in sorted(self.bindings, key=lambda b: b.prefix):
            svc = out.get(b.service_id)
            q = dict(svc.nonfunctional) if svc else {}
            if b.attribute:
                q[b.attribute] = Quantity(None, self.attributes[b.attribute].unit)
            out[b.service_id] = Service(b.service_id, (svc.service_name if svc else "") or b.service_name,
                                        frozenset({"on_off"}), q)
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> SensorRegistry:
        try:
            attributes = {
                name: AttributeSpec(name, spec["unit"], float(spec.get("granularity", 1.0)))
                for name, spec in d.get("attributes", {}).items()
            }
            bindings = tuple(
                SensorBinding(
                    prefix=prefix,
                    service_id=spec["service_id"],
                    location=spec["location"],
                    service_name=spec.get("service_name", ""),
                    attribute=spec.get("attribute"),
                )
                for prefix, spec in d.get("sensors", {}).items()
            )
        except KeyError as exc:
            raise RegistryError(f"registry entry missing key {exc}") from exc
        if not bindings:
            raise RegistryError("registry declares no sensors")
        return cls(bindings, attributes)


# --- pairing -------------------------------------------------------------------


@dataclass
class IngestStats:
    unmatched_off: int = 0
    dangling_on: int = 0
    duplicate_on: int = 0
    degenerate: int = 0
    unmapped: int = 0
    ignored_values: int = 0


def _settled_value(samples: Sequence[tuple[datetime, float]], end: datetime, settle: timedelta) -> float:
    """Last value that held for at least ``settle`` (until the next sample or the event end).

    Falls back to the last value when nothing settled.
    """
    chosen = samples[-1][1]
    for k, (t, v) in enumerate(samples):
        nxt = samples[k + 1][0] if k + 1 < len(samples) else end
        if nxt - t >= settle:
            chosen = v
    return chosen


def build_service_events(
    stream: HomeStream,
    registry: SensorRegistry,
    settle: timedelta = DEFAULT_SETTLE,
    stats: IngestStats | None = None,
) -> list[ServiceEvent]:
    """Pair ON/OFF readings per sensor into events attributed to ``stream.resident_id``.

    Dangling ONs are closed at the stream's last reading and flagged. Pass
    ``stats`` to collect counts of skipped and repaired readings.
    """
    stats = stats if stats is not None else IngestStats()
    open_at: dict[str, tuple[datetime, SensorBinding]] = {}
    intervals: list[tuple[datetime, datetime, SensorBinding, bool]] = []
    samples: dict[tuple[str, str], list[tuple[datetime, float]]] = {}

    for r in stream.readings:
        b = registry.lookup(r.sensor_id)
        if b is None:
            stats.unmapped += 1
            continue
        ts = r.timestamp
        token = r.value.upper()
        if token in START_TOKENS:
            if r.sensor_id in open_at:
                stats.duplicate_on += 1
            else:
                open_at[r.sensor_id] = (ts, b)
        elif token in END_TOKENS:
            opened = open_at.pop(r.sensor_id, None)
            if opened is None:
                stats.unmatched_off += 1
            elif opened[0] < ts:
                intervals.append((opened[0], ts, b, False))
            else:
                stats.degenerate += 1
        else:
            try:
                value = float(r.value)
            except ValueError:
                stats.ignored_values += 1
                continue
            if b.attribute is None:
                stats.ignored_values += 1
                continue
            samples.setdefault((b.service_id, b.attribute), []).append((ts, value))

    if open_at:
        stream_end = stream.readings[-1].timestamp
        for sensor_id, (ts, b) in sorted(open_at.items()):
            if ts < stream_end:
                stats.dangling_on += 1
                intervals.append((ts, stream_end, b, True))
            else:
                stats.degenerate += 1

    events = []
    for start, end, b, dangling in intervals:
        attrs = {}
        for (sid, attr), series in samples.items():
            if sid != b.service_id:
                continue
            inside = [(t, v) for t, v in series if start <= t <= end]
            if inside:
                attrs[attr] = _settled_value(inside, end, settle)
        events.append(
            ServiceEvent(
                service_id=b.service_id,
                start=start,
                end=end,
                location=b.location,
                user=stream.resident_id,
                attrs=attrs,
                service_name=b.service_name,
                dangling=dangling,
            )
        )
    events.sort(key=ServiceEvent.sort_key)
    return events


def merge_homes(
    streams: Sequence[HomeStream],
    registry: SensorRegistry,
    window: tuple[date, date] | None = None,
    settle: timedelta = DEFAULT_SETTLE,
) -> ServiceEventLog:
    """Merge single-resident homes into one multi-resident log.

    Events are kept when their start date falls inside the dates every stream
    covers, further restricted to ``window`` (inclusive) when given.
    """
    if not streams:
        raise EmptyIntersection("no streams to merge")
    spans = [s.span for s in streams]
    if any(sp is None for sp in spans):
        empty = [s.home_label for s in streams if s.span is None]
        raise EmptyIntersection(f"stream(s) without readings: {', '.join(empty)}", homes=empty)
    lo = max(sp[0] for sp in spans)
    hi = min(sp[1] for sp in spans)
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    if lo > hi:
        raise EmptyIntersection(
            "streams share no calendar dates" + (" inside the window" if window else ""),
            homes=[s.home_label for s in streams],
        )

    merged: list[ServiceEvent] = []
    for s in streams:
        stats = IngestStats()
        events = build_service_events(s, registry, settle, stats)
        kept = [e for e in events if lo <= e.start.date() <= hi]
        log.info("%s: %d events (%d in window), %s", s.home_label, len(events), len(kept), stats)
        merged.extend(kept)
    return ServiceEventLog(merged)
