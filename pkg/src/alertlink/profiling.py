"""Online incident profiling over the current window's events.

Builds the positive-PMI event graph, removes regular events via a
per-node knee-point test, and extracts connected components, each of
which profiles one incident.

The per-node test sorts the node's incident edge weights ascending and
runs the Kneedle construction: rank positions normalized to [0,1] on
the x axis, min-max-normalized weights on the y axis, difference curve
y_d(x) = y_norm(x) - x. The knee is the x of the maximum of y_d when
that maximum clears the sensitivity-scaled acceptance threshold; gamma
is that x. A regular event co-occurs strongly with most of its many
neighbors, so its sorted curve jumps early and gamma is small; the node
is removed when gamma < mu. Curves with fewer than three points, flat
curves and curves without a qualifying maximum yield no knee and the
node is kept.

The acceptance threshold is S * max(mean x-spacing, 0.2). The mean
spacing term is the classic Kneedle scale; the 0.2 floor demands a
material bulge (a fifth of the normalized height above the chord)
because these short curves are never smoothed, and sampling noise on
rarely-seen event pairs otherwise fakes early knees on what is really
a gradual ramp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .models import Event, EventGraph, PipelineConfig
from .relations import RelationStore
from .parsing import deduplicate_events

DEFAULT_SENSITIVITY = 1.0
MIN_PRUNE_DEGREE = 3
MIN_KNEE_PROMINENCE = 0.2


@dataclass(frozen=True)
class KneeResult:
    gamma: float | None
    curve_size: int

    @property
    def has_knee(self) -> bool:
        return self.gamma is not None


class WeightedGraph:
    """Minimal undirected weighted graph with deterministic iteration."""

    def __init__(self):
        self._adj: dict[str, dict[str, float]] = {}

    def add_node(self, node: str) -> None:
        self._adj.setdefault(node, {})

    def add_edge(self, a: str, b: str, weight: float) -> None:
        if a == b:
            raise ValueError(f"self loop on {a!r}")
        self.add_node(a)
        self.add_node(b)
        self._adj[a][b] = weight
        self._adj[b][a] = weight

    def remove_node(self, node: str) -> None:
        for neighbor in self._adj.pop(node, {}):
            del self._adj[neighbor][node]

    def nodes(self) -> list[str]:
        return sorted(self._adj)

    def degree(self, node: str) -> int:
        return len(self._adj[node])

    def neighbors(self, node: str) -> list[str]:
        return sorted(self._adj[node])

    def incident_weights(self, node: str) -> list[float]:
        return list(self._adj[node].values())

    def edges(self) -> list[tuple[str, str, float]]:
        out = []
        for a in sorted(self._adj):
            for b, w in self._adj[a].items():
                if a < b:
                    out.append((a, b, w))
        return out

    def copy(self) -> "WeightedGraph":
        dup = WeightedGraph()
        for node, nbrs in self._adj.items():
            dup._adj[node] = dict(nbrs)
        return dup

    def __contains__(self, node: str) -> bool:
        return node in self._adj

    def __len__(self) -> int:
        return len(self._adj)


def build_initial_graph(events: Iterable[Event], store: RelationStore) -> WeightedGraph:
    """Nodes for every event; an edge wherever the stored PMI is positive."""
    graph = WeightedGraph()
    ordered = sorted({e.event_id for e in events})
    for event_id in ordered:
        graph.add_node(event_id)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            weight = store.lookup(a, b)
            if weight is not None and weight > 0:
                graph.add_edge(a, b, weight)
    return graph


def kneedle_knee(
    weights: list[float], sensitivity: float = DEFAULT_SENSITIVITY
) -> KneeResult:
    n = len(weights)
    if n < 3:
        return KneeResult(None, n)
    curve = sorted(weights)
    lo, hi = curve[0], curve[-1]
    if hi == lo:
        return KneeResult(None, n)
    span = n - 1
    best_idx = 0
    best_diff = 0.0
    for i, w in enumerate(curve):
        diff = (w - lo) / (hi - lo) - i / span
        if diff > best_diff:
            best_idx, best_diff = i, diff
    threshold = sensitivity * max(1.0 / span, MIN_KNEE_PROMINENCE)
    if best_diff <= threshold:
        return KneeResult(None, n)
    return KneeResult(best_idx / span, n)


def prune_regular_events(
    graph: WeightedGraph, mu: float, sensitivity: float = DEFAULT_SENSITIVITY
) -> WeightedGraph:
    """Drop nodes whose knee position falls below mu.

    Gammas are computed from the original graph for every node in one
    pass; removals never cascade, so the outcome does not depend on
    node order. Nodes with degree <= 2 or without a knee are kept:
    sparse or flat neighborhoods lack the regular-event signature.
    """
    doomed = []
    for node in graph.nodes():
        if graph.degree(node) < MIN_PRUNE_DEGREE:
            continue
        knee = kneedle_knee(graph.incident_weights(node), sensitivity)
        if knee.has_knee and knee.gamma < mu:
            doomed.append(node)
    pruned = graph.copy()
    for node in doomed:
        pruned.remove_node(node)
    return pruned


def connected_components(
    graph: WeightedGraph, event_times: Mapping[str, int] | None = None
) -> list[EventGraph]:
    """Maximal connected components, earliest-event-time order.

    Isolated nodes become singleton graphs. Ties on time break on the
    smallest node id.
    """
    times = event_times or {}
    seen: set[str] = set()
    components: list[EventGraph] = []
    for start in graph.nodes():
        if start in seen:
            continue
        stack = [start]
        members: set[str] = set()
        while stack:
            node = stack.pop()
            if node in members:
                continue
            members.add(node)
            stack.extend(n for n in graph.neighbors(node) if n not in members)
        seen |= members
        edges = tuple(
            (a, b, w) for a, b, w in graph.edges() if a in members and b in members
        )
        earliest = min(times.get(node, 0) for node in sorted(members))
        components.append(
            EventGraph(
                nodes=frozenset(members),
                weighted_edges=edges,
                incident_label="",
                earliest_time=earliest,
            )
        )
    components.sort(key=lambda g: (g.earliest_time, min(g.nodes)))
    return components


def profile_incidents(
    events: list[Event], store: RelationStore, config: PipelineConfig
) -> list[EventGraph]:
    """Full profiling pass for one chunk of events."""
    deduped = deduplicate_events(list(events))
    graph = build_initial_graph(deduped, store)
    pruned = prune_regular_events(graph, config.mu)
    times = {e.event_id: e.latest_time for e in deduped}
    return connected_components(pruned, times)
