import random

import pytest

from alertlink.models import Alert, ValidationError
from alertlink.parsing import (
    ParserConfig,
    TemplateTree,
    deduplicate_events,
    mask_tokens,
    parse_alert_occurrences,
    parse_alerts,
    parse_partition,
    partition_alerts,
    render_template,
)


def alert(i, title, monitor="m1", component="c1", t=1000, severity="high"):
    return Alert(
        alert_id=f"al-{i:04d}",
        title=title,
        creation_time=t,
        region="region-a",
        owning_service="svc",
        owning_component=component,
        severity=severity,
        monitor_id=monitor,
    )


class TestMasking:
    def test_digit_tokens_masked(self):
        assert mask_tokens("VMStart Failures exceed 300 times") == [
            "VMStart",
            "Failures",
            "exceed",
            "*",
            "times",
        ]

    def test_mixed_alnum_token_masked(self):
        assert mask_tokens("rate <80% now") == ["rate", "*", "now"]

    def test_render_collapses_wildcard_runs(self):
        assert render_template(["a", "*", "*", "b", "*"]) == "a * b *"


class TestPartitionAlerts:
    def test_groups_by_monitor_and_component(self):
        alerts = [
            alert(1, "x", monitor="m1"),
            alert(2, "y", monitor="m1"),
            alert(3, "z", monitor="m2"),
        ]
        parts = partition_alerts(alerts)
        assert sorted(len(v) for v in parts.values()) == [1, 2]

    def test_empty_input(self):
        assert partition_alerts([]) == {}

    def test_identical_titles_distinct_monitors_never_share(self):
        alerts = [alert(1, "Disk full", monitor="m1"), alert(2, "Disk full", monitor="m2")]
        events = parse_alerts(alerts)
        assert len(events) == 2
        assert len({e.event_id for e in events}) == 2


class TestParsePartition:
    def test_numeric_variants_share_template(self):
        alerts = [
            alert(1, "VMStart Failures exceed 100 times"),
            alert(2, "VMStart Failures exceed 300 times"),
        ]
        templates = {t for _, t in parse_partition(alerts, TemplateTree())}
        assert templates == {"VMStart Failures exceed * times"}

    def test_singleton_keeps_title_verbatim(self):
        alerts = [alert(1, "Databricks cluster creation fails")]
        [(_, template)] = parse_partition(alerts, TemplateTree())
        assert template == "Databricks cluster creation fails"

    def test_low_overlap_titles_stay_apart(self):
        # 3 of 5 tokens shared (after digit masking) is below the 0.7 bar.
        alerts = [
            alert(1, "PUT operation success rate <80%"),
            alert(2, "GET request success rate <90%"),
        ]
        templates = {t for _, t in parse_partition(alerts, TemplateTree())}
        assert len(templates) == 2

    def test_high_overlap_titles_merge(self):
        # First two tokens agree (same tree leaf); 4 of 5 shared is above
        # the bar, and the differing token becomes a wildcard.
        alerts = [
            alert(1, "Storage api PUT failing now"),
            alert(2, "Storage api GET failing now"),
        ]
        templates = {t for _, t in parse_partition(alerts, TemplateTree())}
        assert templates == {"Storage api * failing now"}


class TestParseAlerts:
    def test_member_counts(self):
        alerts = [
            alert(1, "VMStart Failures exceed 100 times", t=10),
            alert(2, "VMStart Failures exceed 200 times", t=20),
            alert(3, "VMStart Failures exceed 300 times", t=30),
            alert(4, "Queue stuck in region eastus", t=40),
        ]
        events = parse_alerts(alerts)
        assert sorted(len(e.member_alert_ids) for e in events) == [1, 3]
        big = max(events, key=lambda e: len(e.member_alert_ids))
        assert big.latest_time == 30
        assert big.member_alert_ids == ("al-0001", "al-0002", "al-0003")

    def test_empty_input(self):
        assert parse_alerts([]) == []

    def test_order_insensitive(self):
        alerts = [
            alert(1, "VMStart Failures exceed 100 times", t=10),
            alert(2, "VMStart Failures exceed 200 times", t=20),
            alert(3, "Queue stuck in region eastus", t=15),
        ]
        shuffled = list(alerts)
        random.Random(5).shuffle(shuffled)
        assert parse_alerts(alerts) == parse_alerts(shuffled)

    def test_invalid_alert_rejected(self):
        with pytest.raises(ValidationError):
            parse_alerts([alert(1, "x", severity="urgent")])

    def test_occurrences_one_per_alert(self):
        alerts = [
            alert(1, "VMStart Failures exceed 100 times", t=10),
            alert(2, "VMStart Failures exceed 200 times", t=20),
        ]
        occurrences = parse_alert_occurrences(alerts)
        assert len(occurrences) == 2
        assert {o.event_id for o in occurrences} == {
            e.event_id for e in parse_alerts(alerts)
        }
        assert [o.latest_time for o in occurrences] == [10, 20]

    def test_idempotent_on_rendered_templates(self):
        alerts = [
            alert(1, "VMStart Failures exceed 100 times"),
            alert(2, "VMStart Failures exceed 300 times"),
            alert(3, "Databricks cluster creation fails", monitor="m2"),
        ]
        first = parse_alerts(alerts)
        rerendered = [
            alert(10 + i, e.template, monitor=e.monitor_id, component=e.owning_component)
            for i, e in enumerate(first)
        ]
        second = parse_alerts(rerendered)
        assert {e.template for e in second} == {e.template for e in first}


class TestDrainProperties:
    """Randomized checks over generated titles."""

    WORDS = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]

    def _random_alerts(self, rng, n):
        alerts = []
        for i in range(n):
            monitor = f"m{rng.randrange(4)}"
            component = f"c{rng.randrange(3)}"
            tokens = [rng.choice(self.WORDS) for _ in range(rng.randint(3, 6))]
            if rng.random() < 0.5:
                tokens.append(str(rng.randrange(1000)))
            alerts.append(
                alert(i, " ".join(tokens), monitor=monitor, component=component, t=i)
            )
        return alerts

    def test_partition_safety_and_numeric_collapse(self):
        rng = random.Random(42)
        made = 0
        while made < 1000:
            alerts = self._random_alerts(rng, rng.randint(5, 40))
            made += len(alerts)
            events = parse_alerts(alerts)
            by_id = {}
            for e in events:
                assert e.event_id not in by_id
                by_id[e.event_id] = e
            # same template but different event ids implies different partition
            for a in events:
                for b in events:
                    if a.event_id != b.event_id and a.template == b.template:
                        assert (a.monitor_id, a.owning_component) != (
                            b.monitor_id,
                            b.owning_component,
                        )
            # titles differing only in numeric tokens parse to one event
            if alerts:
                base = alerts[0]
                twin_titles = [
                    " ".join(
                        tok if not any(ch.isdigit() for ch in tok) else str(k * 17)
                        for tok in base.title.split()
                    )
                    for k in (1, 2, 3)
                ]
                twins = [
                    alert(900 + k, title, monitor=base.monitor_id,
                          component=base.owning_component, t=50 + k)
                    for k, title in enumerate(twin_titles)
                ]
                twin_events = parse_alerts(twins)
                assert len(twin_events) == 1

    def test_wildcard_monotonicity(self):
        rng = random.Random(7)
        for _ in range(50):
            tree = TemplateTree(ParserConfig())
            length = rng.randint(3, 6)
            base = [rng.choice(self.WORDS) for _ in range(length)]
            wildcard_positions: set[int] = set()
            group0 = None
            for i in range(8):
                tokens = list(base)
                for pos in range(length):
                    if rng.random() < 0.3:
                        tokens[pos] = rng.choice(self.WORDS)
                group = tree.add(" ".join(tokens), f"al-{i}")
                if group0 is None:
                    group0 = group
                if group is not group0:
                    continue
                current = {p for p, tok in enumerate(group.tokens) if tok == "*"}
                assert wildcard_positions <= current
                wildcard_positions = current


class TestDeduplicate:
    def _event(self, eid, t, members):
        from alertlink.models import Event

        return Event(
            event_id=eid,
            template="T *",
            monitor_id="m1",
            owning_service="svc",
            owning_component="c1",
            severity="high",
            latest_time=t,
            member_alert_ids=members,
        )

    def test_keeps_latest(self):
        events = [self._event("e", t, (f"al-{t}",)) for t in (1, 2, 3)]
        [kept] = deduplicate_events(events)
        assert kept.latest_time == 3

    def test_all_distinct_passthrough(self):
        events = [self._event(f"e{i}", i, (f"al-{i}",)) for i in range(3)]
        assert len(deduplicate_events(events)) == 3

    def test_tie_breaks_on_smaller_alert_id(self):
        events = [
            self._event("e", 5, ("al-b",)),
            self._event("e", 5, ("al-a",)),
        ]
        [kept] = deduplicate_events(events)
        assert kept.member_alert_ids == ("al-a",)

    def test_window_filter(self):
        events = [self._event("e", t, (f"al-{t}",)) for t in (1, 5, 9)]
        [kept] = deduplicate_events(events, window=(0, 6))
        assert kept.latest_time == 5
