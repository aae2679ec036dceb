"""Shared domain types: alerts, tickets, events, windows, graphs, config.

All types are immutable value objects (frozen dataclasses with tuple /
frozenset collections) so they can be shared freely between workers.
Timestamps are integer epoch seconds, UTC.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import IO, Iterable, Iterator, Mapping

from .hashing import fnv1a64_str, hex16

SEVERITY_LEVELS = ("low", "medium", "high")

NON_INCIDENT = "non-incident"


class ValidationError(ValueError):
    """Raised when input records violate the domain schema."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class Alert:
    alert_id: str
    title: str
    creation_time: int
    region: str
    owning_service: str
    owning_component: str
    severity: str
    monitor_id: str


@dataclass(frozen=True)
class Ticket:
    ticket_id: str
    creation_time: int
    summary: str
    region: str
    product_name: str
    category: str
    label_event_id: str | None = None
    label_cluster: str | None = None


@dataclass(frozen=True)
class Event:
    """A parsed alert template instance; the node type of incident graphs."""

    event_id: str
    template: str
    monitor_id: str
    owning_service: str
    owning_component: str
    severity: str
    latest_time: int
    member_alert_ids: tuple[str, ...]


@dataclass(frozen=True)
class Window:
    start: int
    end: int
    event_ids: frozenset[str]


@dataclass(frozen=True)
class EventGraph:
    """A pruned connected component of correlated events (one incident).

    ``earliest_time`` is the earliest member event time; it makes
    component ordering and incident numbering deterministic.
    """

    nodes: frozenset[str]
    weighted_edges: tuple[tuple[str, str, float], ...]
    incident_label: str = ""
    earliest_time: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    window_length: int = 14400
    window_step: int = 3600
    mu: float = 0.8
    theta: float = 0.8
    k: int = 128
    r: int = 256
    online_period: int = 300
    rng_seed: int = 0

    def validate(self) -> None:
        problems = []
        if not 0.0 <= self.mu <= 1.0:
            problems.append(f"mu out of [0,1]: {self.mu}")
        if not 0.0 <= self.theta <= 1.0:
            problems.append(f"theta out of [0,1]: {self.theta}")
        if self.k < 1:
            problems.append(f"k must be >= 1: {self.k}")
        if self.r < 1:
            problems.append(f"r must be >= 1: {self.r}")
        if self.window_step <= 0 or self.window_length <= 0:
            problems.append("window_length and window_step must be positive")
        elif self.window_step > self.window_length:
            problems.append(
                f"window_step {self.window_step} exceeds window_length {self.window_length}"
            )
        if problems:
            raise ValidationError(problems)


def make_event_id(template: str, monitor_id: str, owning_component: str) -> str:
    """Stable event identity: 64-bit hash of template + partition key.

    Including monitor and component keeps templates from different
    partitions distinct even when their text collides.
    """
    payload = "\x1f".join((template, monitor_id, owning_component))
    return hex16(fnv1a64_str(payload))


_ALERT_REQUIRED = (
    "alert_id",
    "title",
    "creation_time",
    "region",
    "owning_service",
    "owning_component",
    "severity",
    "monitor_id",
)
_TICKET_REQUIRED = (
    "ticket_id",
    "creation_time",
    "summary",
    "region",
    "product_name",
    "category",
)


def _check_timestamp(value, violations: list[str], field_name: str) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        violations.append(f"{field_name}: malformed timestamp {value!r}")
    elif value < 0:
        violations.append(f"{field_name}: negative timestamp {value}")


def validate_record(record: Alert | Ticket) -> list[str]:
    """Field-level checks; returns an empty list when the record is valid."""
    violations: list[str] = []
    if isinstance(record, Alert):
        for name in _ALERT_REQUIRED:
            if getattr(record, name) is None:
                violations.append(f"{name}: missing required field")
        if not record.alert_id:
            violations.append("alert_id: empty id")
        _check_timestamp(record.creation_time, violations, "creation_time")
        if record.severity not in SEVERITY_LEVELS:
            violations.append(f"severity: unknown severity {record.severity!r}")
    elif isinstance(record, Ticket):
        for name in _TICKET_REQUIRED:
            if getattr(record, name) is None:
                violations.append(f"{name}: missing required field")
        if not record.ticket_id:
            violations.append("ticket_id: empty id")
        _check_timestamp(record.creation_time, violations, "creation_time")
        if record.category is not None and not str(record.category).strip("/"):
            violations.append("category: path needs at least one segment")
    else:
        violations.append(f"unsupported record type {type(record).__name__}")
    return violations


def validate_all(records: Iterable[Alert | Ticket]) -> None:
    """Validate a batch; raises ValidationError listing every violation."""
    problems: list[str] = []
    seen: set[str] = set()
    for record in records:
        problems.extend(validate_record(record))
        rid = getattr(record, "alert_id", None) or getattr(record, "ticket_id", None)
        if rid:
            if rid in seen:
                problems.append(f"duplicate id {rid!r}")
            seen.add(rid)
    if problems:
        raise ValidationError(problems)


# --- NDJSON encoding -------------------------------------------------
# One JSON object per line, field names exactly as in the dataclasses.
# Optional label fields are omitted when absent so that files written
# without ground truth stay minimal.


def _to_dict(record) -> dict:
    out = {}
    for f in fields(record):
        value = getattr(record, f.name)
        if value is None and f.name in ("label_event_id", "label_cluster"):
            continue
        if isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def encode_record(record) -> str:
    return json.dumps(_to_dict(record), sort_keys=True, separators=(",", ":"))


def decode_alert(data: Mapping) -> Alert:
    try:
        return Alert(**{f.name: data[f.name] for f in fields(Alert)})
    except KeyError as exc:
        raise ValidationError([f"alert missing field {exc.args[0]!r}"]) from exc


def decode_ticket(data: Mapping) -> Ticket:
    kwargs = {}
    for f in fields(Ticket):
        if f.name in ("label_event_id", "label_cluster"):
            kwargs[f.name] = data.get(f.name)
        else:
            if f.name not in data:
                raise ValidationError([f"ticket missing field {f.name!r}"])
            kwargs[f.name] = data[f.name]
    return Ticket(**kwargs)


def decode_event(data: Mapping) -> Event:
    kwargs = {}
    for f in fields(Event):
        if f.name not in data:
            raise ValidationError([f"event missing field {f.name!r}"])
        value = data[f.name]
        if f.name == "member_alert_ids":
            value = tuple(value)
        kwargs[f.name] = value
    return Event(**kwargs)


def _iter_ndjson(stream: IO[str], path: str) -> Iterator[dict]:
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError([f"{path}:{lineno}: invalid JSON ({exc.msg})"]) from exc


def read_alerts(path: str) -> list[Alert]:
    with open(path, encoding="utf-8") as stream:
        return [decode_alert(obj) for obj in _iter_ndjson(stream, path)]


def read_tickets(path: str) -> list[Ticket]:
    with open(path, encoding="utf-8") as stream:
        return [decode_ticket(obj) for obj in _iter_ndjson(stream, path)]


def read_events(path: str) -> list[Event]:
    with open(path, encoding="utf-8") as stream:
        return [decode_event(obj) for obj in _iter_ndjson(stream, path)]


def write_records(records: Iterable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as stream:
        for record in records:
            stream.write(encode_record(record))
            stream.write("\n")
