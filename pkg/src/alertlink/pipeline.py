"""Pipeline orchestration: offline artifact building and online clustering.

Offline: parse historical alerts, learn the PMI relation store, train
the correlation model from labeled ticket-event pairs. Online: slice
records into per-region chunks, profile incidents in each chunk, link
every ticket to its best event, and give tickets linked into the same
event graph one cluster id. Tickets without a confident link, or linked
to an event that the pruning step rejected, are "non-incident".
"""

from __future__ import annotations

import logging
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import ain, relations
from .encoding import EncoderSpec, TextEncoder, build_encoder
from .models import (
    NON_INCIDENT,
    Alert,
    Event,
    EventGraph,
    PipelineConfig,
    Ticket,
    ValidationError,
    validate_all,
)
from .parsing import ParserConfig, parse_alert_occurrences, parse_alerts
from .profiling import profile_incidents

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Chunk:
    region: str
    start: int
    end: int
    events: tuple[Event, ...]
    tickets: tuple[Ticket, ...]


@dataclass(frozen=True)
class TicketLink:
    ticket_id: str
    event_id: str
    probability: float


@dataclass(frozen=True)
class ClusterAssignment:
    ticket_id: str
    cluster_id: str
    linked_event_id: str | None = None
    probability: float | None = None


@dataclass
class PipelineArtifacts:
    store: relations.RelationStore
    params: ain.AinParameters
    encoder: TextEncoder


def default_encoder(config: PipelineConfig) -> TextEncoder:
    return build_encoder(EncoderSpec(kind="feature_hash", dim=config.k, seed=config.rng_seed))


def build_chunks(
    alerts: Sequence[Alert],
    tickets: Sequence[Ticket],
    config: PipelineConfig,
    mode: str = "offline",
    now: int | None = None,
    parser_config: ParserConfig | None = None,
) -> list[Chunk]:
    """Group records into per-region chunks of one window length.

    offline mode tiles the time axis with disjoint windows (aligned to
    epoch multiples of the window length) so every ticket is scored
    exactly once; online mode emits a single chunk per region covering
    the latest window ending at ``now``. Alerts are parsed and
    deduplicated within their chunk.
    """
    if mode not in ("offline", "online"):
        raise ValueError(f"unknown chunk mode {mode!r}")
    length = config.window_length
    regions = sorted(
        {a.region for a in alerts} | {t.region for t in tickets}
    )
    chunks: list[Chunk] = []
    for region in regions:
        region_alerts = [a for a in alerts if a.region == region]
        region_tickets = [t for t in tickets if t.region == region]
        if mode == "online":
            times = [a.creation_time for a in region_alerts] + [
                t.creation_time for t in region_tickets
            ]
            horizon = now if now is not None else (max(times) + 1 if times else 0)
            bounds = [(horizon - length, horizon)]
        else:
            times = [a.creation_time for a in region_alerts] + [
                t.creation_time for t in region_tickets
            ]
            if not times:
                continue
            first = (min(times) // length) * length
            last = (max(times) // length) * length
            bounds = [(start, start + length) for start in range(first, last + 1, length)]
        for start, end in bounds:
            chunk_alerts = [
                a for a in region_alerts if start <= a.creation_time < end
            ]
            chunk_tickets = tuple(
                t for t in region_tickets if start <= t.creation_time < end
            )
            if not chunk_alerts and not chunk_tickets:
                continue
            events = tuple(parse_alerts(chunk_alerts, parser_config))
            chunks.append(
                Chunk(
                    region=region,
                    start=start,
                    end=end,
                    events=events,
                    tickets=chunk_tickets,
                )
            )
    return chunks


def correlate_tickets(
    chunk: Chunk,
    params: ain.AinParameters,
    encoder: TextEncoder,
    theta: float,
) -> list[TicketLink]:
    """Top-1 link per ticket when its probability clears theta."""
    links: list[TicketLink] = []
    if not chunk.events:
        return links
    for ticket in chunk.tickets:
        ranking = ain.rank_events(ticket, list(chunk.events), params, encoder)
        if not ranking.entries:
            continue
        event_id, probability = ranking.entries[0]
        if probability >= theta:
            links.append(
                TicketLink(
                    ticket_id=ticket.ticket_id,
                    event_id=event_id,
                    probability=probability,
                )
            )
    return links


def aggregate(
    links: Sequence[TicketLink],
    graphs: Sequence[EventGraph],
    tickets: Sequence[Ticket],
    first_incident_number: int = 1,
) -> list[ClusterAssignment]:
    """Tickets linked into the same event graph share one cluster id.

    Incident numbers follow ascending earliest event time, counted only
    for graphs that actually received tickets, so the ids stay dense.
    A link to an event outside every graph means the event was pruned
    as regular; the ticket is non-incident and the link is dropped.
    """
    graph_of_event: dict[str, int] = {}
    for idx, graph in enumerate(graphs):
        for node in graph.nodes:
            if node in graph_of_event:
                raise ValueError(f"event {node!r} appears in multiple graphs")
            graph_of_event[node] = idx

    link_by_ticket = {link.ticket_id: link for link in links}
    linked_graphs = sorted(
        {
            graph_of_event[link.event_id]
            for link in links
            if link.event_id in graph_of_event
        },
        key=lambda idx: (graphs[idx].earliest_time, min(graphs[idx].nodes)),
    )
    cluster_name = {
        idx: f"incident-{first_incident_number + pos}"
        for pos, idx in enumerate(linked_graphs)
    }

    assignments = []
    for ticket in tickets:
        link = link_by_ticket.get(ticket.ticket_id)
        if link is None or link.event_id not in graph_of_event:
            assignments.append(
                ClusterAssignment(ticket_id=ticket.ticket_id, cluster_id=NON_INCIDENT)
            )
            continue
        assignments.append(
            ClusterAssignment(
                ticket_id=ticket.ticket_id,
                cluster_id=cluster_name[graph_of_event[link.event_id]],
                linked_event_id=link.event_id,
                probability=link.probability,
            )
        )
    return assignments


def candidate_events_by_ticket(
    chunks: Sequence[Chunk],
) -> dict[str, list[Event]]:
    candidates: dict[str, list[Event]] = {}
    for chunk in chunks:
        for ticket in chunk.tickets:
            candidates[ticket.ticket_id] = list(chunk.events)
    return candidates


def resolve_labeled_pairs(
    raw_pairs: Iterable[tuple[str, str, int]],
    tickets: Mapping[str, Ticket],
    events: Mapping[str, Event],
    candidates: Mapping[str, Sequence[Event]] | None = None,
) -> list[tuple[Ticket, Event, int]]:
    """Match id pairs against parsed records; unknown ids are skipped.

    When per-ticket candidate events are given, the event instance from
    the ticket's own chunk is preferred over the global aggregate: that
    is the view the model sees at inference time (a chunk's severity and
    timing can differ from the all-history aggregate).
    """
    resolved = []
    skipped = 0
    for ticket_id, event_id, label in raw_pairs:
        ticket = tickets.get(ticket_id)
        event = None
        if candidates is not None and ticket_id in candidates:
            for candidate in candidates[ticket_id]:
                if candidate.event_id == event_id:
                    event = candidate
                    break
        if event is None:
            event = events.get(event_id)
        if ticket is None or event is None:
            skipped += 1
            continue
        resolved.append((ticket, event, label))
    if skipped:
        logger.warning("skipped %d labeled pairs with unknown ids", skipped)
    return resolved


def run_offline(
    historical_alerts: Sequence[Alert],
    historical_tickets: Sequence[Ticket],
    labeled_pairs: Sequence[tuple[str, str, int]],
    config: PipelineConfig,
    train_config: ain.TrainConfig | None = None,
    out_dir: str | None = None,
    encoder: TextEncoder | None = None,
    hash_buckets: int = ain.DEFAULT_HASH_BUCKETS,
) -> PipelineArtifacts:
    """Learn the relation store and train the correlation model.

    Writes pmi.tsv and model.bin into ``out_dir`` when given; the same
    seed always produces byte-identical artifacts.
    """
    config.validate()
    validate_all(historical_alerts)
    validate_all(historical_tickets)
    train_config = train_config or ain.TrainConfig(rng_seed=config.rng_seed)
    encoder = encoder or default_encoder(config)

    occurrences = parse_alert_occurrences(list(historical_alerts))
    store = relations.learn_relations(occurrences, config)

    events_by_id = {e.event_id: e for e in parse_alerts(list(historical_alerts))}
    tickets_by_id = {t.ticket_id: t for t in historical_tickets}
    chunks = build_chunks(historical_alerts, historical_tickets, config, "offline")
    candidates = candidate_events_by_ticket(chunks)
    dataset = resolve_labeled_pairs(
        labeled_pairs, tickets_by_id, events_by_id, candidates
    )
    if not any(label == 1 for _, _, label in dataset):
        raise ValidationError(["no usable positive ticket-event pairs"])
    params = ain.train(
        dataset, candidates, config, train_config, encoder, hash_buckets=hash_buckets
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        relations.save_store(store, os.path.join(out_dir, "pmi.tsv"))
        ain.save_params(params, os.path.join(out_dir, "model.bin"))
    return PipelineArtifacts(store=store, params=params, encoder=encoder)


def run_online(
    chunk: Chunk, artifacts: PipelineArtifacts, config: PipelineConfig
) -> list[ClusterAssignment]:
    """Profile, correlate and aggregate one chunk."""
    graphs = profile_incidents(list(chunk.events), artifacts.store, config)
    links = correlate_tickets(chunk, artifacts.params, artifacts.encoder, config.theta)
    return aggregate(links, graphs, chunk.tickets)


def run_batch(
    alerts: Sequence[Alert],
    tickets: Sequence[Ticket],
    artifacts: PipelineArtifacts,
    config: PipelineConfig,
    region: str | None = None,
    collect_rankings: bool = False,
) -> tuple[list[ClusterAssignment], dict[str, ain.RankedEvents]]:
    """Score a whole corpus chunk by chunk with globally unique ids.

    Chunks are processed in (region, start) order; incident numbers keep
    counting across chunks so every cluster id in one output is unique.
    """
    validate_all(alerts)
    validate_all(tickets)
    if region is not None:
        alerts = [a for a in alerts if a.region == region]
        tickets = [t for t in tickets if t.region == region]
    chunks = build_chunks(alerts, tickets, config, "offline")
    chunks.sort(key=lambda c: (c.region, c.start))
    assignments: list[ClusterAssignment] = []
    rankings: dict[str, ain.RankedEvents] = {}
    next_number = 1
    for chunk in chunks:
        graphs = profile_incidents(list(chunk.events), artifacts.store, config)
        links = correlate_tickets(
            chunk, artifacts.params, artifacts.encoder, config.theta
        )
        chunk_assignments = aggregate(
            links, graphs, chunk.tickets, first_incident_number=next_number
        )
        next_number += len(
            {a.cluster_id for a in chunk_assignments if a.cluster_id != NON_INCIDENT}
        )
        assignments.extend(chunk_assignments)
        if collect_rankings:
            for ticket in chunk.tickets:
                rankings[ticket.ticket_id] = ain.rank_events(
                    ticket, list(chunk.events), artifacts.params, artifacts.encoder
                )
    assignments.sort(key=lambda a: a.ticket_id)
    return assignments, rankings


# --- assignment / ranking file formats --------------------------------

ASSIGNMENTS_HEADER = "ticket_id,cluster_id,linked_event_id,probability"


def write_assignments(assignments: Sequence[ClusterAssignment], path: str) -> None:
    with open(path, "w", encoding="utf-8") as out:
        out.write(ASSIGNMENTS_HEADER + "\n")
        for a in assignments:
            event = a.linked_event_id or ""
            prob = f"{a.probability:.6f}" if a.probability is not None else ""
            out.write(f"{a.ticket_id},{a.cluster_id},{event},{prob}\n")


def read_assignments(path: str) -> list[ClusterAssignment]:
    with open(path, encoding="utf-8") as stream:
        lines = stream.read().splitlines()
    if not lines or lines[0] != ASSIGNMENTS_HEADER:
        raise ValidationError([f"{path}: not an assignments file"])
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValidationError([f"{path}:{lineno}: expected 4 columns"])
        ticket_id, cluster_id, event, prob = parts
        out.append(
            ClusterAssignment(
                ticket_id=ticket_id,
                cluster_id=cluster_id,
                linked_event_id=event or None,
                probability=float(prob) if prob else None,
            )
        )
    return out


def write_rankings(
    rankings: Mapping[str, ain.RankedEvents], path: str, top: int = 10
) -> None:
    with open(path, "w", encoding="utf-8") as out:
        out.write("ticket_id,event_id,probability\n")
        for ticket_id in sorted(rankings):
            for event_id, prob in rankings[ticket_id].entries[:top]:
                out.write(f"{ticket_id},{event_id},{prob:.6f}\n")


def read_rankings(path: str) -> dict[str, ain.RankedEvents]:
    with open(path, encoding="utf-8") as stream:
        lines = stream.read().splitlines()
    if not lines or lines[0] != "ticket_id,event_id,probability":
        raise ValidationError([f"{path}: not a rankings file"])
    grouped: dict[str, list[tuple[str, float]]] = defaultdict(list)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValidationError([f"{path}:{lineno}: expected 3 columns"])
        grouped[parts[0]].append((parts[1], float(parts[2])))
    return {
        ticket_id: ain.RankedEvents(ticket_id=ticket_id, entries=tuple(entries))
        for ticket_id, entries in grouped.items()
    }
