import math
import random

import pytest

from alertlink.models import Event, PipelineConfig
from alertlink.profiling import (
    WeightedGraph,
    build_initial_graph,
    connected_components,
    kneedle_knee,
    profile_incidents,
    prune_regular_events,
)
from alertlink.relations import RelationStore


def store_of(pairs):
    return RelationStore(
        pmi={tuple(sorted(k)): v for k, v in pairs.items()},
        window_length=14400,
        window_step=3600,
    )


def event(eid, t=0):
    return Event(
        event_id=eid,
        template=f"T {eid}",
        monitor_id=f"m-{eid}",
        owning_service="svc",
        owning_component="c",
        severity="low",
        latest_time=t,
        member_alert_ids=(f"al-{eid}",),
    )


def chord_knee_oracle(weights):
    """Max perpendicular distance to the chord on the same sorted curve."""
    curve = sorted(weights)
    n = len(curve)
    lo, hi = curve[0], curve[-1]
    if hi == lo or n < 3:
        return None
    best_idx, best_dist = 0, -1.0
    for i, w in enumerate(curve):
        x = i / (n - 1)
        y = (w - lo) / (hi - lo)
        dist = abs(y - x) / math.sqrt(2)
        if dist > best_dist:
            best_idx, best_dist = i, dist
    return best_idx / (n - 1)


class TestBuildInitialGraph:
    def test_positive_pmi_filter(self):
        events = [event("a"), event("b"), event("c")]
        graph = build_initial_graph(
            events, store_of({("a", "b"): 0.7, ("b", "c"): -0.2})
        )
        assert graph.edges() == [("a", "b", 0.7)]
        assert graph.nodes() == ["a", "b", "c"]

    def test_no_positive_pairs(self):
        graph = build_initial_graph([event("a"), event("b")], store_of({}))
        assert graph.edges() == []

    def test_full_clique(self):
        ids = "abcd"
        pmi = {(x, y): 1.0 for i, x in enumerate(ids) for y in ids[i + 1 :]}
        graph = build_initial_graph([event(e) for e in ids], store_of(pmi))
        assert len(graph.edges()) == 6


class TestKneedle:
    def test_flat_curve_has_no_knee(self):
        assert not kneedle_knee([0.5, 0.5, 0.5, 0.5]).has_knee

    def test_too_short_curve(self):
        assert not kneedle_knee([0.1, 0.9]).has_knee
        assert not kneedle_knee([]).has_knee

    def test_early_jump(self):
        result = kneedle_knee([0.1, 0.9, 0.92, 0.95, 0.96])
        assert result.has_knee
        assert result.gamma == pytest.approx(0.25)
        assert result.gamma == pytest.approx(chord_knee_oracle([0.1, 0.9, 0.92, 0.95, 0.96]))

    def test_late_jump_reads_as_no_knee(self):
        # Convex curve: the concave difference construction never exceeds
        # the threshold, so the node would be retained (gamma treated as 1),
        # consistent with the chord oracle placing the bend at rank >= 0.7.
        weights = [0.05, 0.06, 0.07, 0.08, 0.9]
        result = kneedle_knee(weights)
        oracle = chord_knee_oracle(weights)
        assert oracle >= 0.7
        effective = result.gamma if result.has_knee else 1.0
        assert effective >= 0.7
        assert abs(effective - oracle) <= 1.0 / (len(weights) - 1)

    def test_agrees_with_chord_oracle_on_strong_early_knees(self):
        rng = random.Random(11)
        for _ in range(100):
            n_low = rng.randint(1, 3)
            n_high = rng.randint(8, 20)
            low = [rng.uniform(0.01, 0.1) for _ in range(n_low)]
            high = [rng.uniform(0.9, 1.0) for _ in range(n_high)]
            weights = low + high
            result = kneedle_knee(weights)
            oracle = chord_knee_oracle(weights)
            assert result.has_knee
            assert abs(result.gamma - oracle) <= 1.0 / (len(weights) - 1)

    def test_scale_invariance(self):
        rng = random.Random(3)
        for _ in range(50):
            weights = [rng.uniform(0.01, 0.2) for _ in range(3)] + [
                rng.uniform(0.8, 1.2) for _ in range(10)
            ]
            base = kneedle_knee(weights)
            for c in (0.1, 7.3, 1000.0):
                scaled = kneedle_knee([w * c for w in weights])
                assert scaled.has_knee == base.has_knee
                if base.has_knee:
                    assert scaled.gamma == pytest.approx(base.gamma)


class TestPrune:
    def _star(self, center_weights):
        graph = WeightedGraph()
        for i, w in enumerate(center_weights):
            graph.add_edge("hub", f"n{i}", w)
        return graph

    def test_early_knee_hub_removed(self):
        # Ten incident weights inside [0.8, 1.0] with an early jump.
        weights = [0.8, 0.97, 0.975, 0.98, 0.982, 0.985, 0.99, 0.992, 0.995, 1.0]
        knee = kneedle_knee(weights)
        assert knee.has_knee and knee.gamma < 0.8
        pruned = prune_regular_events(self._star(weights), mu=0.8)
        assert "hub" not in pruned

    def test_degree_guard_keeps_sparse_nodes(self):
        graph = WeightedGraph()
        graph.add_edge("a", "b", 0.9)
        pruned = prune_regular_events(graph, mu=0.8)
        assert "a" in pruned and "b" in pruned

    def test_late_knee_hub_retained(self):
        weights = [0.01] * 8 + [0.9, 0.95]
        knee = kneedle_knee(weights)
        effective = knee.gamma if knee.has_knee else 1.0
        assert effective >= 0.8
        pruned = prune_regular_events(self._star(weights), mu=0.8)
        assert "hub" in pruned

    def test_single_pass_uses_original_weights(self):
        # hub1 and hub2 both qualify for removal against the original
        # graph; removing one must not rescue the other.
        graph = WeightedGraph()
        anchor_w = [0.01, 0.02]
        for hub in ("hub1", "hub2"):
            for i, w in enumerate(anchor_w):
                graph.add_edge(hub, f"{hub}-a{i}", w)
        for i in range(10):
            graph.add_edge("hub1", f"s{i}", 0.95)
            graph.add_edge("hub2", f"s{i}", 0.95)
        pruned = prune_regular_events(graph, mu=0.8)
        assert "hub1" not in pruned and "hub2" not in pruned

    def test_prune_only_removes(self):
        rng = random.Random(5)
        graph = WeightedGraph()
        names = [f"n{i}" for i in range(12)]
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                if rng.random() < 0.4:
                    graph.add_edge(a, b, rng.uniform(0.01, 1.0))
        pruned = prune_regular_events(graph, mu=0.8)
        original_edges = set((a, b) for a, b, _ in graph.edges())
        for a, b, w in pruned.edges():
            assert (a, b) in original_edges
        assert set(pruned.nodes()) <= set(graph.nodes())


class TestComponents:
    def _closure_oracle(self, nodes, edges):
        reach = {n: {n} for n in nodes}
        changed = True
        while changed:
            changed = False
            for a, b, _ in edges:
                union = reach[a] | reach[b]
                if union != reach[a] or union != reach[b]:
                    for n in union:
                        if reach[n] != union:
                            reach[n] = reach[n] | union
                            changed = True
        seen = set()
        components = []
        for n in sorted(nodes):
            frozen = frozenset(reach[n])
            if frozen not in seen:
                seen.add(frozen)
                components.append(frozen)
        # expand to fixpoint (pairwise unions above may need repetition)
        merged = True
        while merged:
            merged = False
            for i in range(len(components)):
                for j in range(i + 1, len(components)):
                    if components[i] & components[j]:
                        components[i] = components[i] | components[j]
                        components.pop(j)
                        merged = True
                        break
                if merged:
                    break
        return {frozenset(c) for c in components}

    def test_two_components(self):
        graph = WeightedGraph()
        graph.add_edge("a", "b", 1.0)
        graph.add_edge("b", "c", 1.0)
        graph.add_edge("d", "e", 1.0)
        comps = connected_components(graph, {"a": 5, "b": 6, "c": 7, "d": 1, "e": 2})
        assert [sorted(c.nodes) for c in comps] == [["d", "e"], ["a", "b", "c"]]
        assert comps[0].earliest_time == 1

    def test_edgeless_graph_gives_singletons(self):
        graph = WeightedGraph()
        for n in "abc":
            graph.add_node(n)
        comps = connected_components(graph)
        assert [sorted(c.nodes) for c in comps] == [["a"], ["b"], ["c"]]

    def test_chain_of_three(self):
        graph = WeightedGraph()
        graph.add_edge("a1", "a2", 2.0)
        graph.add_edge("a2", "a3", 2.5)
        [comp] = connected_components(graph)
        assert sorted(comp.nodes) == ["a1", "a2", "a3"]
        assert len(comp.weighted_edges) == 2

    def test_matches_transitive_closure_on_random_graphs(self):
        rng = random.Random(21)
        for _ in range(100):
            n = rng.randint(1, 8)
            nodes = [f"n{i}" for i in range(n)]
            graph = WeightedGraph()
            for node in nodes:
                graph.add_node(node)
            edges = []
            for i, a in enumerate(nodes):
                for b in nodes[i + 1 :]:
                    if rng.random() < 0.3:
                        w = rng.uniform(0.1, 2.0)
                        graph.add_edge(a, b, w)
                        edges.append((a, b, w))
            got = {c.nodes for c in connected_components(graph)}
            assert got == self._closure_oracle(nodes, edges)

    def test_every_node_in_exactly_one_component(self):
        rng = random.Random(2)
        graph = WeightedGraph()
        for i in range(30):
            graph.add_node(f"n{i}")
        for _ in range(40):
            a, b = rng.sample(range(30), 2)
            graph.add_edge(f"n{a}", f"n{b}", rng.uniform(0.1, 1.0))
        comps = connected_components(graph)
        counted = sorted(n for c in comps for n in c.nodes)
        assert counted == sorted(graph.nodes())


class TestProfileIncidents:
    def test_empty_chunk(self):
        assert profile_incidents([], store_of({}), PipelineConfig()) == []

    def test_linked_incident_survives_noise_hub(self):
        # Three correlated incident events plus one regular hub that
        # co-occurs broadly with mid-level weights and has weak anchors.
        events = [event(e, t) for t, e in enumerate(["a1", "a2", "a3", "hub"])]
        events += [event(f"x{i}", 10 + i) for i in range(10)]
        pmi = {("a1", "a2"): 4.0, ("a2", "a3"): 3.5, ("a1", "a3"): 3.8}
        pmi[("a1", "hub")] = 0.05
        pmi[("a2", "hub")] = 0.04
        for i in range(10):
            pmi[tuple(sorted((f"x{i}", "hub")))] = 0.9 + i * 0.001
        graphs = profile_incidents(events, store_of(pmi), PipelineConfig())
        multi = [g for g in graphs if len(g.nodes) > 1]
        assert len(multi) == 1
        assert multi[0].nodes == {"a1", "a2", "a3"}
        assert not any("hub" in g.nodes for g in graphs)
