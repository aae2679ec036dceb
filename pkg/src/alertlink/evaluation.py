"""Clustering and correlation metrics.

Aggregation quality is scored with pairwise Rand-index precision,
recall and F1 over all unordered ticket pairs: a pair counts as "same"
only when both tickets share a cluster id other than "non-incident",
so non-incident tickets act as mutual non-duplicates. Correlation
quality is Acc@K: the fraction of tickets whose true responsible event
appears in the top K of the ranked candidates.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .ain import RankedEvents
from .models import NON_INCIDENT, Ticket


@dataclass(frozen=True)
class PairwiseCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class PrfResult:
    precision: float
    recall: float
    f1: float
    counts: PairwiseCounts
    undefined: tuple[str, ...] = ()


def _effective(assignment: Mapping[str, str]) -> dict[str, tuple[str, str]]:
    # Non-incident tickets become singletons so they never pair up.
    return {
        ticket: (("cluster", cluster) if cluster != NON_INCIDENT else ("single", ticket))
        for ticket, cluster in assignment.items()
    }


def pairwise_prf(
    predicted: Mapping[str, str], truth: Mapping[str, str]
) -> PrfResult:
    """Pairwise precision/recall/F1 via contingency-table combinatorics."""
    if set(predicted) != set(truth):
        missing = set(truth) ^ set(predicted)
        raise ValueError(f"ticket sets differ ({len(missing)} mismatched ids)")
    pred = _effective(predicted)
    true = _effective(truth)
    tickets = sorted(pred)
    n = len(tickets)

    def pair_count(sizes: Counter) -> int:
        return sum(s * (s - 1) // 2 for s in sizes.values())

    joint = Counter((pred[t], true[t]) for t in tickets)
    same_pred = pair_count(Counter(pred[t] for t in tickets))
    same_true = pair_count(Counter(true[t] for t in tickets))
    tp = pair_count(joint)
    fp = same_pred - tp
    fn = same_true - tp
    total = n * (n - 1) // 2
    tn = total - tp - fp - fn
    counts = PairwiseCounts(tp=tp, tn=tn, fp=fp, fn=fn)

    undefined = []
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        undefined.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        undefined.append("f1")
    return PrfResult(
        precision=precision,
        recall=recall,
        f1=f1,
        counts=counts,
        undefined=tuple(undefined),
    )


def acc_at_k(
    rankings: Mapping[str, RankedEvents], truth: Mapping[str, str], k: int
) -> float:
    """Fraction of tickets whose true event is within the top k entries."""
    if k < 1:
        raise ValueError(f"k must be >= 1: {k}")
    if not truth:
        return 0.0
    hits = 0
    for ticket_id in sorted(truth):
        if ticket_id not in rankings:
            raise ValueError(f"no ranking for ticket {ticket_id!r}")
        top = rankings[ticket_id].entries[:k]
        if any(event_id == truth[ticket_id] for event_id, _ in top):
            hits += 1
    return hits / len(truth)


def categorization_baseline(tickets: list[Ticket]) -> dict[str, str]:
    """Cluster purely by the exact category string."""
    return {t.ticket_id: t.category for t in tickets}


def build_report(
    prf: PrfResult,
    acc: Mapping[int, float] | None = None,
) -> dict:
    """Report dict with metrics at the 3-decimal precision used in tables."""
    report = {
        "precision": round(prf.precision, 3),
        "recall": round(prf.recall, 3),
        "f1": round(prf.f1, 3),
        "undefined": list(prf.undefined),
        "counts": {
            "tp": prf.counts.tp,
            "tn": prf.counts.tn,
            "fp": prf.counts.fp,
            "fn": prf.counts.fn,
        },
    }
    if acc is not None:
        report["acc"] = {f"acc@{k}": round(acc[k], 3) for k in sorted(acc)}
        report["acc"]["average"] = round(sum(acc.values()) / len(acc), 3)
    else:
        report["acc"] = None
    return report
