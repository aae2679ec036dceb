"""Alert parsing: template mining per partition, event extraction, dedup.

Alerts are first split into (monitor_id, owning_component) partitions;
titles from different monitors or components never share a template.
Inside a partition a fixed-depth prefix tree groups titles by their
leading tokens, then by token overlap against each group's template
(Drain-style grouping). Tokens containing any digit are masked to "*"
before grouping, so purely numeric variation always collapses.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .models import Alert, Event, ValidationError, make_event_id, validate_record

DEFAULT_SIMILARITY = 0.7
DEFAULT_DEPTH = 4

WILDCARD = "*"


@dataclass(frozen=True)
class ParserConfig:
    similarity_threshold: float = DEFAULT_SIMILARITY
    max_depth: int = DEFAULT_DEPTH

    def validate(self) -> None:
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValidationError(
                [f"similarity_threshold out of [0,1]: {self.similarity_threshold}"]
            )
        if self.max_depth < 3:
            raise ValidationError([f"max_depth must be >= 3: {self.max_depth}"])


def mask_tokens(title: str) -> list[str]:
    """Whitespace tokens with digit-bearing tokens masked to the wildcard."""
    return [
        WILDCARD if any(ch.isdigit() for ch in tok) else tok for tok in title.split()
    ]


def render_template(tokens: list[str]) -> str:
    """Join tokens with single spaces, collapsing wildcard runs to one "*"."""
    out: list[str] = []
    for tok in tokens:
        if tok == WILDCARD and out and out[-1] == WILDCARD:
            continue
        out.append(tok)
    return " ".join(out)


class _Group:
    """One template group: the evolving token template plus its members."""

    __slots__ = ("tokens", "alert_ids")

    def __init__(self, tokens: list[str], alert_id: str):
        self.tokens = list(tokens)
        self.alert_ids = [alert_id]

    def similarity(self, tokens: list[str]) -> float:
        matches = sum(1 for a, b in zip(self.tokens, tokens) if a == b)
        return matches / len(tokens)

    def absorb(self, tokens: list[str], alert_id: str) -> None:
        # Wildcards only ever appear; a "*" position never reverts.
        self.tokens = [
            a if a == b else WILDCARD for a, b in zip(self.tokens, tokens)
        ]
        self.alert_ids.append(alert_id)


class TemplateTree:
    """Fixed-depth prefix tree over masked tokens for one partition."""

    def __init__(self, config: ParserConfig | None = None):
        self.config = config or ParserConfig()
        self.config.validate()
        self._root: dict = {}
        self.groups: list[_Group] = []

    def _leaf(self, tokens: list[str]) -> list[_Group]:
        node = self._root.setdefault(len(tokens), {})
        for tok in tokens[: self.config.max_depth - 2]:
            node = node.setdefault(tok, {})
        return node.setdefault(None, [])

    def add(self, title: str, alert_id: str) -> _Group:
        tokens = mask_tokens(title)
        leaf = self._leaf(tokens)
        best: _Group | None = None
        best_sim = 0.0
        for group in leaf:
            sim = group.similarity(tokens)
            if sim >= self.config.similarity_threshold and sim > best_sim:
                best, best_sim = group, sim
        if best is None:
            best = _Group(tokens, alert_id)
            leaf.append(best)
            self.groups.append(best)
        else:
            best.absorb(tokens, alert_id)
        return best


@dataclass
class ParserState:
    """All per-partition trees built during one parsing run."""

    config: ParserConfig = field(default_factory=ParserConfig)
    trees: dict[tuple[str, str], TemplateTree] = field(default_factory=dict)

    def tree_for(self, key: tuple[str, str]) -> TemplateTree:
        if key not in self.trees:
            self.trees[key] = TemplateTree(self.config)
        return self.trees[key]


def partition_alerts(alerts: list[Alert]) -> dict[tuple[str, str], list[Alert]]:
    """Group alerts by (monitor_id, owning_component); total, order-keeping."""
    partitions: dict[tuple[str, str], list[Alert]] = defaultdict(list)
    for alert in alerts:
        partitions[(alert.monitor_id, alert.owning_component)].append(alert)
    return dict(partitions)


def parse_partition(
    alerts: list[Alert], state: TemplateTree
) -> list[tuple[str, str]]:
    """Assign each alert of one partition its (final) rendered template.

    The assignment is deterministic given input order: groups are formed
    online, then every member receives the group's final template so
    that all alerts of a group agree even when wildcards appeared late.
    """
    membership: list[tuple[str, _Group]] = []
    for alert in alerts:
        group = state.add(alert.title, alert.alert_id)
        membership.append((alert.alert_id, group))
    return [
        (alert_id, render_template(group.tokens)) for alert_id, group in membership
    ]


def _canonical(alerts: list[Alert]) -> list[Alert]:
    # Canonical order makes parsing independent of input file order.
    return sorted(alerts, key=lambda a: (a.creation_time, a.alert_id))


def _validated(alerts: list[Alert]) -> None:
    problems: list[str] = []
    for alert in alerts:
        problems.extend(validate_record(alert))
    if problems:
        raise ValidationError(problems)


def _parse_groups(
    alerts: list[Alert], config: ParserConfig | None
) -> list[tuple[tuple[str, str], str, list[Alert]]]:
    """Parse and return (partition_key, template, member alerts) per group."""
    _validated(alerts)
    state = ParserState(config or ParserConfig())
    ordered = _canonical(alerts)
    by_id = {a.alert_id: a for a in ordered}
    partitions = partition_alerts(ordered)
    out = []
    for key in sorted(partitions):
        assignments = parse_partition(partitions[key], state.tree_for(key))
        per_template: dict[str, list[Alert]] = defaultdict(list)
        for alert_id, template in assignments:
            per_template[template].append(by_id[alert_id])
        for template in sorted(per_template):
            out.append((key, template, per_template[template]))
    return out


def _event_from_members(
    key: tuple[str, str], template: str, members: list[Alert]
) -> Event:
    monitor_id, component = key
    latest = max(members, key=lambda a: (a.creation_time, a.alert_id))
    return Event(
        event_id=make_event_id(template, monitor_id, component),
        template=template,
        monitor_id=monitor_id,
        owning_service=latest.owning_service,
        owning_component=component,
        severity=latest.severity,
        latest_time=latest.creation_time,
        member_alert_ids=tuple(sorted(a.alert_id for a in members)),
    )


def parse_alerts(alerts: list[Alert], config: ParserConfig | None = None) -> list[Event]:
    """Parse alerts into aggregated events, one per partition template."""
    events = [
        _event_from_members(key, template, members)
        for key, template, members in _parse_groups(alerts, config)
    ]
    events.sort(key=lambda e: (e.latest_time, e.event_id))
    return events


def parse_alert_occurrences(
    alerts: list[Alert], config: ParserConfig | None = None
) -> list[Event]:
    """Parse alerts into one event occurrence per alert.

    Occurrence-level events keep every firing time, which is what
    sliding-window co-occurrence counting needs; the aggregated form
    from parse_alerts would collapse a month of firings into a single
    timestamp.
    """
    occurrences = []
    for key, template, members in _parse_groups(alerts, config):
        monitor_id, component = key
        event_id = make_event_id(template, monitor_id, component)
        for alert in members:
            occurrences.append(
                Event(
                    event_id=event_id,
                    template=template,
                    monitor_id=monitor_id,
                    owning_service=alert.owning_service,
                    owning_component=component,
                    severity=alert.severity,
                    latest_time=alert.creation_time,
                    member_alert_ids=(alert.alert_id,),
                )
            )
    occurrences.sort(key=lambda e: (e.latest_time, e.event_id, e.member_alert_ids))
    return occurrences


def deduplicate_events(
    events: list[Event], window: tuple[int, int] | None = None
) -> list[Event]:
    """Keep one event per event_id: the latest, ties to the smallest
    lexicographic member alert id."""
    if window is not None:
        start, end = window
        events = [e for e in events if start <= e.latest_time < end]
    best: dict[str, Event] = {}
    for event in events:
        cur = best.get(event.event_id)
        if cur is None:
            best[event.event_id] = event
            continue
        if event.latest_time > cur.latest_time or (
            event.latest_time == cur.latest_time
            and min(event.member_alert_ids) < min(cur.member_alert_ids)
        ):
            best[event.event_id] = event
    out = list(best.values())
    out.sort(key=lambda e: (e.latest_time, e.event_id))
    return out
