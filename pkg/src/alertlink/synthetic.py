"""Labeled synthetic corpora: incidents, correlated alerts, tickets, noise.

The generator builds a small cloud: services own components, components
own monitors. One monitor per component is *indicative* (it fires only
when an incident hits the component); the rest are *regular* monitors
that fire during background activity episodes regardless of incidents.
On top of those, every component carries a couple of *sporadic*
monitors: rare one-off alerts at uniform random times, independent of
everything.

Regular alerts are load-driven, not independent: each activity episode
has a primary monitor group (A or B alternating at random) that fires
with high probability and a secondary group that fires at a lower rate.
Over a long history every regular event therefore co-occurs strongly
with all other regular events, which is the broad-co-occurrence
signature the graph pruning step keys on; the sporadic population
supplies the weakly-related neighbors that give each regular node's
sorted weight curve its low head, so the knee sits early. Incidents are
placed at uniform random times, so indicative events relate only to the
events of their own incidents.

Tickets reference the responsible indicative event of their incident;
summaries are produced from per-component phrase banks with synonym
substitution, so tickets of one incident spread over services carry
dissimilar text. Every record carries ground-truth labels.
"""

from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass, field
from typing import Sequence

from .models import NON_INCIDENT, Alert, Ticket
from .parsing import mask_tokens, render_template
from .models import make_event_id

BASE_TIME = 1_609_459_200  # 2021-01-01 00:00:00 UTC

# Activity-episode machinery for regular alerts.
EPISODE_PRIMARY_P = 0.92
EPISODE_SECONDARY_P = 0.5
EPISODE_MIN_S = 1200
EPISODE_MAX_S = 3000
_MEAN_PARTICIPATION = (EPISODE_PRIMARY_P + EPISODE_SECONDARY_P) / 2

SPORADIC_MONITORS_PER_COMPONENT = 2

SPORADIC_PATTERNS = (
    "Transient {thing} retry count {{n}} on node {{n}}",
    "One-off {thing} checksum mismatch in batch {{n}}",
    "Recovered {thing} timeout after {{n}} ms",
)

SPORADIC_THINGS = (
    "heartbeat",
    "handshake",
    "lease",
    "token",
    "probe",
    "watchdog",
    "manifest",
    "ledger",
)

SERVICE_NAMES = (
    "VMCompute",
    "ObjectStore",
    "WebApps",
    "SqlDb",
    "DataLake",
    "K8S",
    "Cdn",
    "MsgBus",
    "IoTHub",
    "FuncApps",
)

# (component kind, operation word, object word)
COMPONENT_KINDS = (
    ("resource-provider", "start", "instance"),
    ("control-plane", "create", "cluster"),
    ("scheduler", "schedule", "job"),
    ("gateway", "route", "request"),
    ("allocator", "allocate", "volume"),
    ("frontend", "render", "dashboard"),
    ("replicator", "replicate", "snapshot"),
    ("autoscaler", "scale", "nodepool"),
    ("provisioner", "provision", "workspace"),
    ("broker", "publish", "message"),
    ("indexer", "index", "document"),
    ("balancer", "balance", "traffic"),
)

OP_SYNONYMS = {
    "start": ("boot", "power on", "bring up", "restart"),
    "create": ("provision", "spin up", "deploy", "set up"),
    "schedule": ("queue", "run", "trigger"),
    "route": ("reach", "connect to", "call"),
    "allocate": ("attach", "mount", "expand"),
    "render": ("load", "open", "view"),
    "replicate": ("sync", "back up", "copy"),
    "scale": ("resize", "autoscale", "grow"),
    "provision": ("initialize", "prepare", "enable"),
    "publish": ("send", "push", "deliver"),
    "index": ("search", "query", "look up"),
    "balance": ("distribute", "spread", "shift"),
}

OBJ_SYNONYMS = {
    "instance": ("server", "virtual machine", "vm"),
    "cluster": ("environment", "workspace", "deployment"),
    "job": ("task", "pipeline run", "batch"),
    "request": ("call", "connection", "session"),
    "volume": ("disk", "storage", "drive"),
    "dashboard": ("portal page", "console", "view"),
    "snapshot": ("backup", "restore point", "copy"),
    "nodepool": ("node pool", "nodes", "capacity"),
    "workspace": ("notebook", "project", "sandbox"),
    "message": ("event", "notification", "payload"),
    "document": ("record", "item", "entry"),
    "traffic": ("load", "requests", "throughput"),
}

SUMMARY_PATTERNS = (
    "Unable to {op} {obj}",
    "Cannot {op} {obj} since this morning",
    "{obj} {op} keeps failing",
    "Error when trying to {op} {obj}",
    "{obj} stuck while trying to {op}",
    "Intermittent failures to {op} our {obj}",
)

REGULAR_METRICS = (
    "CPU",
    "Memory",
    "Disk IO",
    "Queue depth",
    "Thread pool",
    "Socket count",
    "Cache miss",
    "GC pause",
)

NOISE_CATEGORY_ROOTS = (
    "Billing/Invoice",
    "Billing/Refund",
    "Account/Access",
    "Account/Login",
    "Quota/Increase request",
    "Security/Certificate",
    "Support/How to",
)

NOISE_CATEGORY_LEAVES = (
    "General",
    "Enterprise agreement",
    "Pay as you go",
    "Free tier",
    "Partner",
    "Government",
    "Education",
    "Marketplace",
    "Trial",
    "Internal",
    "Reseller",
    "Sponsored",
)

NOISE_SUMMARIES = (
    "Question about last month invoice",
    "How do I download usage reports",
    "Requesting a quota increase for our subscription",
    "Cannot find the audit log export button",
    "Need help understanding reserved pricing",
    "Please merge our two billing accounts",
    "Certificate renewal question for custom domain",
)

_NUMBER_POOL = (70, 75, 80, 85, 90, 95, 99, 100, 150, 200, 250, 300, 400, 500)

_SEVERITY_SERVICE_COUNTS = {
    "high": ((1, 2, 3), (0.30, 0.45, 0.25)),
    "medium": ((1, 2, 3), (0.70, 0.25, 0.05)),
    "low": ((1, 2), (0.80, 0.20)),
}


@dataclass(frozen=True)
class TicketLagConfig:
    positive_fraction: float = 0.92
    mean_s: float = 600.0
    negative_mean_s: float = 240.0


@dataclass(frozen=True)
class ScenarioConfig:
    n_services: int = 6
    n_components_per_service: int = 3
    n_monitors_per_component: int = 3
    n_incidents: int = 20
    incident_severity_mix: tuple[tuple[str, float], ...] = (
        ("low", 0.3),
        ("medium", 0.4),
        ("high", 0.3),
    )
    max_alert_span_s: int = 14400
    ticket_lag: TicketLagConfig = field(default_factory=TicketLagConfig)
    regular_alert_rate_per_hour: float = 6.0
    sporadic_alert_rate_per_hour: float = 2.0
    tickets_per_incident: tuple[int, int] = (4, 10)
    noise_tickets_per_day: float = 6.0
    span_days: int = 45
    n_regions: int = 1
    semantic_similarity: float = 0.25
    rng_seed: int = 7

    def validate(self) -> None:
        problems = []
        if not 1 <= self.n_services <= len(SERVICE_NAMES):
            problems.append(f"n_services must be in 1..{len(SERVICE_NAMES)}")
        if not 1 <= self.n_components_per_service <= len(COMPONENT_KINDS):
            problems.append(
                f"n_components_per_service must be in 1..{len(COMPONENT_KINDS)}"
            )
        if self.n_monitors_per_component < 1:
            problems.append("n_monitors_per_component must be >= 1")
        if self.n_incidents < 0:
            problems.append("n_incidents must be >= 0")
        total = sum(p for _, p in self.incident_severity_mix)
        if abs(total - 1.0) > 1e-9:
            problems.append(f"incident_severity_mix sums to {total}, expected 1")
        if (
            self.regular_alert_rate_per_hour < 0
            or self.sporadic_alert_rate_per_hour < 0
            or self.noise_tickets_per_day < 0
        ):
            problems.append("rates must be non-negative")
        lo, hi = self.tickets_per_incident
        if lo < 1 or hi < lo:
            problems.append(f"bad tickets_per_incident range ({lo}, {hi})")
        if self.span_days < 1:
            problems.append("span_days must be >= 1")
        if not 0.0 <= self.ticket_lag.positive_fraction <= 1.0:
            problems.append("ticket_lag.positive_fraction out of [0,1]")
        if self.n_regions < 1:
            problems.append("n_regions must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class _Component:
    comp_id: str
    service: str
    kind: str
    op: str
    obj: str
    categories: tuple[str, ...]


@dataclass(frozen=True)
class _Monitor:
    monitor_id: str
    component: _Component
    role: str  # "indicative" | "regular"
    group: str  # "A" | "B" | "" for indicative
    title_pattern: str
    template: str
    event_id: str


@dataclass
class GeneratedCorpus:
    alerts: list[Alert]
    tickets: list[Ticket]
    truth: dict
    pairs: list[tuple[str, str, int]]


def _expected_template(pattern: str) -> str:
    return render_template(mask_tokens(pattern.format(n=0)))


def _build_world(config: ScenarioConfig) -> list[_Monitor]:
    monitors: list[_Monitor] = []
    monitor_seq = 0
    regular_seq = 0
    sporadic_seq = 0
    for svc_idx in range(config.n_services):
        service = SERVICE_NAMES[svc_idx]
        for comp_idx in range(config.n_components_per_service):
            kind, op, obj = COMPONENT_KINDS[comp_idx]
            comp_id = f"{service.lower()}-{kind}"
            categories = (
                f"{service}/{obj.title()} {op.title()}",
                f"{service}/{obj.title()} Lifecycle",
            )
            component = _Component(
                comp_id=comp_id,
                service=service,
                kind=kind,
                op=op,
                obj=obj,
                categories=categories,
            )
            slots = []
            for slot in range(config.n_monitors_per_component):
                if slot == 0:
                    # Engineers template alert titles with their service
                    # context, so indicative templates are component-unique.
                    pattern = (
                        f"{service} {obj.title()} {op.title()} "
                        f"failures exceed {{n}} times"
                    )
                    role, group = "indicative", ""
                else:
                    metric = REGULAR_METRICS[regular_seq % len(REGULAR_METRICS)]
                    pattern = f"{metric} utilization exceeds {{n}} percent"
                    role = "regular"
                    group = "A" if regular_seq % 2 == 0 else "B"
                    regular_seq += 1
                slots.append((pattern, role, group))
            for sp in range(SPORADIC_MONITORS_PER_COMPONENT):
                raw = SPORADIC_PATTERNS[sporadic_seq % len(SPORADIC_PATTERNS)]
                thing = SPORADIC_THINGS[sporadic_seq % len(SPORADIC_THINGS)]
                slots.append((raw.format(thing=thing), "sporadic", ""))
                sporadic_seq += 1
            for pattern, role, group in slots:
                monitor_id = f"mon-{monitor_seq:04d}"
                monitor_seq += 1
                template = _expected_template(pattern)
                monitors.append(
                    _Monitor(
                        monitor_id=monitor_id,
                        component=component,
                        role=role,
                        group=group,
                        title_pattern=pattern,
                        template=template,
                        event_id=make_event_id(template, monitor_id, comp_id),
                    )
                )
    return monitors


@dataclass
class _AlertProto:
    time: int
    monitor: _Monitor
    region: str
    severity: str
    seq: int


@dataclass
class _TicketProto:
    time: int
    region: str
    product: str
    category: str
    summary: str
    label_event_id: str | None
    label_cluster: str
    seq: int


def _alert_title(monitor: _Monitor, rng: random.Random) -> str:
    return monitor.title_pattern.format(n=rng.choice(_NUMBER_POOL))


def _summary_for(component: _Component, rng: random.Random, similarity: float) -> str:
    pattern = rng.choice(SUMMARY_PATTERNS)
    if rng.random() < similarity:
        op = component.op
    else:
        op = rng.choice(OP_SYNONYMS[component.op])
    if rng.random() < similarity:
        obj = component.obj
    else:
        obj = rng.choice(OBJ_SYNONYMS[component.obj])
    text = pattern.format(op=op, obj=obj)
    return text[0].upper() + text[1:]


def _weighted_choice(rng: random.Random, options: Sequence, weights: Sequence[float]):
    return rng.choices(list(options), weights=list(weights), k=1)[0]


def generate_scenario(config: ScenarioConfig) -> GeneratedCorpus:
    """Produce a fully labeled corpus; deterministic given config.rng_seed."""
    config.validate()
    rng = random.Random(config.rng_seed)
    monitors = _build_world(config)
    regulars = [m for m in monitors if m.role == "regular"]
    sporadics = [m for m in monitors if m.role == "sporadic"]
    indicatives = [m for m in monitors if m.role == "indicative"]
    regions = [f"region-{chr(ord('a') + i)}" for i in range(config.n_regions)]
    span_s = config.span_days * 86400
    end_time = BASE_TIME + span_s

    alert_protos: list[_AlertProto] = []
    ticket_protos: list[_TicketProto] = []
    seq = 0

    # Background activity episodes drive regular alerts, per region.
    if regulars and config.regular_alert_rate_per_hour > 0:
        per_episode = len(regulars) * _MEAN_PARTICIPATION
        episodes_per_day = config.regular_alert_rate_per_hour * 24.0 / per_episode
        n_episodes = max(1, round(episodes_per_day * config.span_days))
        for region in regions:
            for _ in range(n_episodes):
                ep_start = BASE_TIME + int(rng.random() * (span_s - EPISODE_MAX_S))
                ep_len = rng.randint(EPISODE_MIN_S, EPISODE_MAX_S)
                primary = rng.choice("AB")
                for monitor in regulars:
                    p = (
                        EPISODE_PRIMARY_P
                        if monitor.group == primary
                        else EPISODE_SECONDARY_P
                    )
                    if rng.random() >= p:
                        continue
                    alert_protos.append(
                        _AlertProto(
                            time=ep_start + rng.randint(0, ep_len),
                            monitor=monitor,
                            region=region,
                            severity=rng.choice(("low", "low", "medium")),
                            seq=seq,
                        )
                    )
                    seq += 1

    # Long-tail sporadic alerts at uniform times, independent of load.
    if sporadics and config.sporadic_alert_rate_per_hour > 0:
        n_sporadic = round(config.sporadic_alert_rate_per_hour * 24 * config.span_days)
        for region in regions:
            for _ in range(n_sporadic):
                alert_protos.append(
                    _AlertProto(
                        time=BASE_TIME + int(rng.random() * span_s),
                        monitor=sporadics[rng.randrange(len(sporadics))],
                        region=region,
                        severity=rng.choice(("low", "medium")),
                        seq=seq,
                    )
                )
                seq += 1

    # Incidents: pick services (severity-weighted), components, fire the
    # indicative monitors within the incident span, then emit tickets.
    indicative_by_comp = {m.component.comp_id: m for m in indicatives}
    components = sorted({m.component.comp_id: m.component for m in monitors}.values(),
                        key=lambda c: c.comp_id)
    services = sorted({c.service for c in components})
    incident_rows = []
    sev_names = [name for name, _ in config.incident_severity_mix]
    sev_weights = [w for _, w in config.incident_severity_mix]
    margin = int(config.max_alert_span_s * 1.5) + 7200
    incident_times = sorted(
        BASE_TIME + 3600 + int(rng.random() * (span_s - margin - 3600))
        for _ in range(config.n_incidents)
    )
    for idx, inc_start in enumerate(incident_times, start=1):
        label = f"incident-{idx}"
        severity = _weighted_choice(rng, sev_names, sev_weights)
        counts, weights = _SEVERITY_SERVICE_COUNTS[severity]
        n_svc = min(_weighted_choice(rng, counts, weights), len(services))
        picked_services = rng.sample(services, n_svc)
        affected: list[_Component] = []
        for service in picked_services:
            pool = [c for c in components if c.service == service]
            n_comp = 2 if len(pool) >= 2 and rng.random() < 0.4 else 1
            affected.extend(rng.sample(pool, n_comp))
        affected.sort(key=lambda c: c.comp_id)

        if rng.random() < 0.93:
            inc_span = rng.randint(300, int(config.max_alert_span_s * 0.9))
        else:
            inc_span = rng.randint(
                config.max_alert_span_s, int(config.max_alert_span_s * 1.5)
            )
        region = rng.choice(regions)
        first_fire: dict[str, int] = {}
        for pos, component in enumerate(affected):
            monitor = indicative_by_comp[component.comp_id]
            n_fires = rng.randint(2, 5)
            offsets = sorted(rng.randint(0, inc_span) for _ in range(n_fires))
            # Pin the global span: first component starts the incident,
            # last component closes it.
            if pos == 0:
                offsets[0] = 0
            if pos == len(affected) - 1:
                offsets[-1] = inc_span
            first_fire[component.comp_id] = inc_start + offsets[0]
            for off in offsets:
                alert_protos.append(
                    _AlertProto(
                        time=inc_start + off,
                        monitor=monitor,
                        region=region,
                        severity=severity,
                        seq=seq,
                    )
                )
                seq += 1

        n_tickets = rng.randint(*config.tickets_per_incident)
        ticket_seqs = []
        for _ in range(n_tickets):
            component = rng.choice(affected)
            monitor = indicative_by_comp[component.comp_id]
            if rng.random() < config.ticket_lag.positive_fraction:
                lag = 1 + int(rng.expovariate(1.0 / config.ticket_lag.mean_s))
            else:
                lag = -1 - int(rng.expovariate(1.0 / config.ticket_lag.negative_mean_s))
            ticket_protos.append(
                _TicketProto(
                    time=max(BASE_TIME, first_fire[component.comp_id] + lag),
                    region=region,
                    product=component.service,
                    category=rng.choice(component.categories),
                    summary=_summary_for(component, rng, config.semantic_similarity),
                    label_event_id=monitor.event_id,
                    label_cluster=label,
                    seq=seq,
                )
            )
            ticket_seqs.append(seq)
            seq += 1

        incident_rows.append(
            {
                "label": label,
                "region": region,
                "severity": severity,
                "start": inc_start,
                "end": inc_start + inc_span,
                "event_ids": sorted(
                    indicative_by_comp[c.comp_id].event_id for c in affected
                ),
                "monitor_ids": sorted(
                    indicative_by_comp[c.comp_id].monitor_id for c in affected
                ),
                "ticket_seqs": ticket_seqs,
            }
        )

    # Customer-side noise tickets, unrelated to any incident. Categories
    # come from a wide root x leaf catalog: in production the category
    # tree is fine-grained, so unrelated tickets rarely collide on it.
    n_noise = round(config.noise_tickets_per_day * config.span_days)
    noise_seqs = []
    for _ in range(n_noise):
        category = (
            f"{rng.choice(NOISE_CATEGORY_ROOTS)}/{rng.choice(NOISE_CATEGORY_LEAVES)}"
        )
        ticket_protos.append(
            _TicketProto(
                time=BASE_TIME + int(rng.random() * span_s),
                region=rng.choice(regions),
                product=SERVICE_NAMES[rng.randrange(config.n_services)],
                category=category,
                summary=rng.choice(NOISE_SUMMARIES),
                label_event_id=None,
                label_cluster=NON_INCIDENT,
                seq=seq,
            )
        )
        noise_seqs.append(seq)
        seq += 1

    # Freeze ids in chronological order.
    alert_protos.sort(key=lambda p: (p.time, p.seq))
    alerts = [
        Alert(
            alert_id=f"al-{i:07d}",
            title=_alert_title(proto.monitor, rng),
            creation_time=proto.time,
            region=proto.region,
            owning_service=proto.monitor.component.service,
            owning_component=proto.monitor.component.comp_id,
            severity=proto.severity,
            monitor_id=proto.monitor.monitor_id,
        )
        for i, proto in enumerate(alert_protos)
    ]
    ticket_protos.sort(key=lambda p: (p.time, p.seq))
    tickets = []
    ticket_id_by_seq: dict[int, str] = {}
    for i, proto in enumerate(ticket_protos):
        ticket_id = f"tk-{i:06d}"
        ticket_id_by_seq[proto.seq] = ticket_id
        tickets.append(
            Ticket(
                ticket_id=ticket_id,
                creation_time=proto.time,
                summary=proto.summary,
                region=proto.region,
                product_name=proto.product,
                category=proto.category,
                label_event_id=proto.label_event_id,
                label_cluster=proto.label_cluster,
            )
        )

    for row in incident_rows:
        row["ticket_ids"] = sorted(ticket_id_by_seq[s] for s in row.pop("ticket_seqs"))

    truth = {
        "monitor_roles": {m.monitor_id: m.role for m in monitors},
        "monitor_events": {
            m.monitor_id: {
                "event_id": m.event_id,
                "template": m.template,
                "component": m.component.comp_id,
                "service": m.component.service,
            }
            for m in monitors
        },
        "incidents": incident_rows,
    }

    # Labeled pairs. Positives for incident tickets; one hard negative
    # per incident ticket (an indicative event of a sibling component,
    # preferably in the same service), the shape of wrong-suggestion
    # feedback a support workflow accumulates; explicit negatives for a
    # slice of noise tickets so customer-side text sees label 0.
    pairs: list[tuple[str, str, int]] = []
    comp_of_event = {m.event_id: m.component for m in indicatives}
    indicative_event_ids = sorted(m.event_id for m in indicatives)
    for ticket in tickets:
        if ticket.label_event_id is None:
            continue
        pairs.append((ticket.ticket_id, ticket.label_event_id, 1))
        own = comp_of_event[ticket.label_event_id]
        siblings = [
            eid
            for eid in indicative_event_ids
            if eid != ticket.label_event_id
            and comp_of_event[eid].service == own.service
        ]
        pool = siblings or [
            eid for eid in indicative_event_ids if eid != ticket.label_event_id
        ]
        if pool:
            pairs.append((ticket.ticket_id, pool[rng.randrange(len(pool))], 0))
    for pos, seq_id in enumerate(sorted(noise_seqs)):
        if pos % 3 != 0 or not indicative_event_ids:
            continue
        for _ in range(2):
            pairs.append(
                (
                    ticket_id_by_seq[seq_id],
                    indicative_event_ids[rng.randrange(len(indicative_event_ids))],
                    0,
                )
            )

    return GeneratedCorpus(alerts=alerts, tickets=tickets, truth=truth, pairs=pairs)


def write_corpus(corpus: GeneratedCorpus, out_dir: str) -> dict[str, str]:
    """Write alerts.ndjson, tickets.ndjson, truth_graphs.json, pairs.csv."""
    from .models import write_records

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "alerts": os.path.join(out_dir, "alerts.ndjson"),
        "tickets": os.path.join(out_dir, "tickets.ndjson"),
        "truth": os.path.join(out_dir, "truth_graphs.json"),
        "pairs": os.path.join(out_dir, "pairs.csv"),
    }
    write_records(corpus.alerts, paths["alerts"])
    write_records(corpus.tickets, paths["tickets"])
    with open(paths["truth"], "w", encoding="utf-8") as out:
        json.dump(corpus.truth, out, sort_keys=True, indent=1)
        out.write("\n")
    with open(paths["pairs"], "w", encoding="utf-8") as out:
        out.write("ticket_id,event_id,label\n")
        for ticket_id, event_id, label in corpus.pairs:
            out.write(f"{ticket_id},{event_id},{label}\n")
    return paths
