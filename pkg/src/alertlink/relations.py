"""Static event relation learning: sliding windows and pairwise PMI.

The learner slides a window (default four hours, one-hour step) over
historical event occurrences, counts per-window presence with set
semantics, and scores every co-occurring pair with pointwise mutual
information:

    d(a, b) = ln( (C(a,b) * M) / (C(a) * C(b)) )

where M is the total window count, C(x) the number of windows holding
x and C(a,b) the number holding both. Pairs that never co-occur are
simply absent from the store; downstream graph construction only uses
positive values. Natural log; sign and ordering are base-invariant.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .models import Event, PipelineConfig, Window

logger = logging.getLogger(__name__)

STORE_MAGIC = "#pmi v1"


class RelationStoreError(ValueError):
    pass


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass
class CooccurrenceCounts:
    total_windows: int
    single: dict[str, int] = field(default_factory=dict)
    pair: dict[tuple[str, str], int] = field(default_factory=dict)


@dataclass
class RelationStore:
    """Precomputed PMI per unordered event pair, plus window metadata."""

    pmi: dict[tuple[str, str], float]
    window_length: int
    window_step: int
    span: tuple[int, int] | None = None

    def lookup(self, a: str, b: str) -> float | None:
        if a == b:
            return None
        return self.pmi.get(_pair_key(a, b))

    def __len__(self) -> int:
        return len(self.pmi)


def build_windows(events: list[Event], length: int, step: int) -> list[Window]:
    """Sliding windows anchored at the epoch-floor of the earliest event.

    Starts advance by ``step`` while they do not exceed the last event
    time; an event belongs to a window iff start <= latest_time < end.
    Windows that happen to contain no events are kept: the probability
    space of the PMI estimate is the full window population.
    """
    if length <= 0 or step <= 0 or step > length:
        raise ValueError(f"bad window parameters length={length} step={step}")
    if not events:
        return []
    times = sorted(e.latest_time for e in events)
    ids_by_time = sorted((e.latest_time, e.event_id) for e in events)
    start = (times[0] // step) * step
    last_time = times[-1]
    windows = []
    while start <= last_time:
        lo = bisect_left(ids_by_time, (start,))
        hi = bisect_left(ids_by_time, (start + length,))
        members = frozenset(event_id for _, event_id in ids_by_time[lo:hi])
        windows.append(Window(start=start, end=start + length, event_ids=members))
        start += step
    return windows


def count_cooccurrences(windows: list[Window]) -> CooccurrenceCounts:
    counts = CooccurrenceCounts(total_windows=len(windows))
    for window in windows:
        members = sorted(window.event_ids)
        for event_id in members:
            counts.single[event_id] = counts.single.get(event_id, 0) + 1
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                key = (a, b)
                counts.pair[key] = counts.pair.get(key, 0) + 1
    return counts


def compute_pmi(
    counts: CooccurrenceCounts, window_length: int = 0, window_step: int = 0
) -> RelationStore:
    if counts.total_windows == 0:
        raise RelationStoreError("no windows")
    m = counts.total_windows
    pmi = {}
    for (a, b), joint in counts.pair.items():
        if joint <= 0:
            continue
        pmi[(a, b)] = math.log(joint * m / (counts.single[a] * counts.single[b]))
    return RelationStore(pmi=pmi, window_length=window_length, window_step=window_step)


def pmi_lookup(store: RelationStore, a: str, b: str) -> float | None:
    return store.lookup(a, b)


def learn_relations(events: list[Event], config: PipelineConfig) -> RelationStore:
    """build_windows -> count_cooccurrences -> compute_pmi in one call."""
    windows = build_windows(events, config.window_length, config.window_step)
    store = compute_pmi(
        count_cooccurrences(windows), config.window_length, config.window_step
    )
    if events:
        times = [e.latest_time for e in events]
        store.span = (min(times), max(times))
    return store


def save_store(store: RelationStore, path: str) -> None:
    with open(path, "w", encoding="utf-8") as out:
        out.write(
            f"{STORE_MAGIC} window_length={store.window_length} "
            f"window_step={store.window_step}\n"
        )
        for (a, b) in sorted(store.pmi):
            out.write(f"{a}\t{b}\t{store.pmi[(a, b)]:.9g}\n")


def load_store(path: str, config: PipelineConfig | None = None) -> RelationStore:
    try:
        with open(path, encoding="utf-8") as stream:
            lines = stream.read().splitlines()
    except OSError as exc:
        raise RelationStoreError(f"cannot read store: {exc}") from exc
    if not lines or not lines[0].startswith(STORE_MAGIC):
        raise RelationStoreError(f"corrupt store {path}: missing header")
    try:
        meta = dict(part.split("=", 1) for part in lines[0].split()[2:])
        window_length = int(meta["window_length"])
        window_step = int(meta["window_step"])
    except (KeyError, ValueError) as exc:
        raise RelationStoreError(f"corrupt store {path}: bad header") from exc
    pmi: dict[tuple[str, str], float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RelationStoreError(f"corrupt store {path}:{lineno}")
        a, b, value = parts
        if not a or not b or a >= b:
            raise RelationStoreError(f"corrupt store {path}:{lineno}: bad pair")
        try:
            pmi[(a, b)] = float(value)
        except ValueError as exc:
            raise RelationStoreError(f"corrupt store {path}:{lineno}") from exc
    if config is not None and (
        window_length != config.window_length or window_step != config.window_step
    ):
        logger.warning(
            "relation store %s was built with window_length=%s window_step=%s, "
            "config has window_length=%s window_step=%s",
            path,
            window_length,
            window_step,
            config.window_length,
            config.window_step,
        )
    return RelationStore(pmi=pmi, window_length=window_length, window_step=window_step)
