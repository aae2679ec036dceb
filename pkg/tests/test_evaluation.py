import itertools
import random

import pytest

from alertlink.ain import RankedEvents
from alertlink.evaluation import (
    acc_at_k,
    build_report,
    categorization_baseline,
    pairwise_prf,
)
from alertlink.models import NON_INCIDENT, Ticket


def brute_force_counts(predicted, truth):
    """All-pairs oracle applying the same-cluster rule literally."""
    tickets = sorted(predicted)
    tp = tn = fp = fn = 0
    for a, b in itertools.combinations(tickets, 2):
        same_pred = (
            predicted[a] == predicted[b] and predicted[a] != NON_INCIDENT
        )
        same_true = truth[a] == truth[b] and truth[a] != NON_INCIDENT
        if same_pred and same_true:
            tp += 1
        elif same_pred and not same_true:
            fp += 1
        elif not same_pred and same_true:
            fn += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def set_partitions(items):
    """All set partitions (restricted growth strings)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in set_partitions(rest):
        for i, block in enumerate(smaller):
            yield smaller[:i] + [[first] + block] + smaller[i + 1 :]
        yield [[first]] + smaller


def partition_to_map(partition, non_incident_block=None):
    out = {}
    for i, block in enumerate(partition):
        label = NON_INCIDENT if i == non_incident_block else f"c{i}"
        for item in block:
            out[item] = label
    return out


class TestPairwisePrf:
    def test_worked_example(self):
        truth = {"t1": "A", "t2": "A", "t3": NON_INCIDENT}
        predicted = {"t1": "X", "t2": "X", "t3": "X"}
        result = pairwise_prf(predicted, truth)
        assert (result.counts.tp, result.counts.fp, result.counts.fn) == (1, 2, 0)
        assert result.precision == pytest.approx(1 / 3)
        assert result.recall == pytest.approx(1.0)
        assert result.f1 == pytest.approx(0.5)

    def test_identity_is_perfect(self):
        clusters = {"t1": "A", "t2": "A", "t3": "B", "t4": NON_INCIDENT}
        result = pairwise_prf(clusters, clusters)
        assert (result.precision, result.recall, result.f1) == (1.0, 1.0, 1.0)

    def test_empty_prediction_flagged(self):
        truth = {"t1": "A", "t2": "A"}
        predicted = {"t1": NON_INCIDENT, "t2": NON_INCIDENT}
        result = pairwise_prf(predicted, truth)
        assert result.precision == 0.0
        assert result.recall == 0.0
        assert result.f1 == 0.0
        assert "precision" in result.undefined

    def test_ticket_set_mismatch(self):
        with pytest.raises(ValueError, match="ticket sets"):
            pairwise_prf({"t1": "A"}, {"t2": "A"})

    def test_counts_sum_to_all_pairs(self):
        rng = random.Random(8)
        for _ in range(50):
            n = rng.randint(1, 12)
            tickets = [f"t{i}" for i in range(n)]
            predicted = {t: rng.choice(["a", "b", "c", NON_INCIDENT]) for t in tickets}
            truth = {t: rng.choice(["x", "y", NON_INCIDENT]) for t in tickets}
            result = pairwise_prf(predicted, truth)
            assert result.counts.total == n * (n - 1) // 2

    def test_matches_oracle_on_all_small_partitions(self):
        """Exhaustive: every partition of up to 5 tickets on both sides,
        with and without a non-incident block."""
        for n in range(1, 6):
            tickets = [f"t{i}" for i in range(n)]
            all_parts = list(set_partitions(tickets))
            for pred_part in all_parts:
                for true_part in all_parts:
                    for ni_pred in (None, 0):
                        for ni_true in (None, 0):
                            predicted = partition_to_map(pred_part, ni_pred)
                            truth = partition_to_map(true_part, ni_true)
                            result = pairwise_prf(predicted, truth)
                            tp, tn, fp, fn = brute_force_counts(predicted, truth)
                            assert (
                                result.counts.tp,
                                result.counts.tn,
                                result.counts.fp,
                                result.counts.fn,
                            ) == (tp, tn, fp, fn)

    def test_matches_oracle_on_partitions_up_to_eight(self):
        """All partitions of 6..8 tickets exercised in both roles against
        seeded counterpart partitions (the full cross product is too big)."""
        rng = random.Random(99)
        for n in range(6, 9):
            tickets = [f"t{i}" for i in range(n)]
            all_parts = list(set_partitions(tickets))
            shuffled = list(all_parts)
            rng.shuffle(shuffled)
            for part, other in zip(all_parts, shuffled):
                ni = rng.choice((None, 0))
                predicted = partition_to_map(part, ni)
                truth = partition_to_map(other, rng.choice((None, 0)))
                result = pairwise_prf(predicted, truth)
                assert (
                    result.counts.tp,
                    result.counts.tn,
                    result.counts.fp,
                    result.counts.fn,
                ) == brute_force_counts(predicted, truth)


def ranking(ticket_id, *event_ids):
    entries = tuple((e, 1.0 - 0.1 * i) for i, e in enumerate(event_ids))
    return RankedEvents(ticket_id=ticket_id, entries=entries)


class TestAccAtK:
    def test_manual_enumeration(self):
        rankings = {
            "t1": ranking("t1", "e1", "e2", "e3", "e4"),
            "t2": ranking("t2", "e9", "e2", "e3", "e4"),
            "t3": ranking("t3", "e9", "e8", "e7", "e3"),
        }
        truth = {"t1": "e1", "t2": "e2", "t3": "e3"}
        assert acc_at_k(rankings, truth, 1) == pytest.approx(1 / 3)
        assert acc_at_k(rankings, truth, 2) == pytest.approx(2 / 3)
        assert acc_at_k(rankings, truth, 3) == pytest.approx(2 / 3)
        assert acc_at_k(rankings, truth, 4) == pytest.approx(1.0)

    def test_k_larger_than_lists(self):
        rankings = {"t1": ranking("t1", "e1")}
        assert acc_at_k(rankings, {"t1": "e1"}, 10) == 1.0

    def test_never_hits(self):
        rankings = {"t1": ranking("t1", "e1"), "t2": RankedEvents("t2", ())}
        assert acc_at_k(rankings, {"t1": "xx", "t2": "e1"}, 3) == 0.0

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            acc_at_k({}, {}, 0)

    def test_missing_ranking_is_an_error(self):
        with pytest.raises(ValueError, match="no ranking"):
            acc_at_k({}, {"t1": "e1"}, 1)

    def test_monotone_in_k(self):
        rng = random.Random(17)
        for _ in range(50):
            events = [f"e{i}" for i in range(10)]
            rankings = {}
            truth = {}
            for i in range(rng.randint(1, 8)):
                rng.shuffle(events)
                depth = rng.randint(0, 10)
                rankings[f"t{i}"] = ranking(f"t{i}", *events[:depth])
                truth[f"t{i}"] = rng.choice(events)
            values = [acc_at_k(rankings, truth, k) for k in range(1, 12)]
            assert all(a <= b for a, b in zip(values, values[1:]))


class TestCategorizationBaseline:
    def _ticket(self, tid, category):
        return Ticket(
            ticket_id=tid,
            creation_time=0,
            summary="s",
            region="r",
            product_name="p",
            category=category,
        )

    def test_groups_by_exact_category(self):
        tickets = [
            self._ticket("t1", "VM/VM Start"),
            self._ticket("t2", "VM/VM Start"),
            self._ticket("t3", "VM/Scale Update"),
        ]
        clusters = categorization_baseline(tickets)
        assert clusters["t1"] == clusters["t2"] != clusters["t3"]

    def test_distinct_categories_are_singletons(self):
        tickets = [self._ticket(f"t{i}", f"cat-{i}") for i in range(4)]
        clusters = categorization_baseline(tickets)
        assert len(set(clusters.values())) == 4

    def test_empty(self):
        assert categorization_baseline([]) == {}


class TestReport:
    def test_three_decimal_rounding(self):
        truth = {"t1": "A", "t2": "A", "t3": NON_INCIDENT}
        predicted = {"t1": "X", "t2": "X", "t3": "X"}
        report = build_report(pairwise_prf(predicted, truth), {1: 1 / 3, 2: 2 / 3, 3: 1.0})
        assert report["precision"] == 0.333
        assert report["acc"]["acc@2"] == 0.667
        assert report["acc"]["average"] == 0.667
        assert report["counts"]["tp"] == 1

    def test_acc_optional(self):
        truth = {"t1": "A", "t2": "A"}
        report = build_report(pairwise_prf(truth, truth))
        assert report["acc"] is None
