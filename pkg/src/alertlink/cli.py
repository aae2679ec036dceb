"""Command line entry point.

Subcommands: generate, parse, learn-relations, profile, train-ain,
aggregate, run-offline, eval. Exit codes: 0 success, 1 internal error,
2 input/validation error. Diagnostics go to stderr; data goes to files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import ain, relations
from .encoding import EncoderError, EncoderSpec, build_encoder
from .evaluation import acc_at_k, build_report, pairwise_prf
from .models import (
    NON_INCIDENT,
    PipelineConfig,
    ValidationError,
    read_alerts,
    read_events,
    read_tickets,
    write_records,
)
from .parsing import ParserConfig, parse_alert_occurrences, parse_alerts
from .pipeline import (
    PipelineArtifacts,
    read_assignments,
    read_rankings,
    run_batch,
    run_offline,
    write_assignments,
    write_rankings,
)
from .profiling import profile_incidents
from .relations import RelationStoreError
from .synthetic import ScenarioConfig, generate_scenario, write_corpus

logger = logging.getLogger(__name__)

_CONFIG_KEYS = {f.name for f in dataclasses.fields(PipelineConfig)}


def load_config(path: str | None) -> PipelineConfig:
    """Flat key=value file; absent path means all defaults."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as stream:
                lines = stream.read().splitlines()
        except OSError as exc:
            raise ValidationError([f"cannot read config: {exc}"]) from exc
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError([f"{path}:{lineno}: expected key=value"])
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ValidationError([f"{path}:{lineno}: unknown key {key!r}"])
            try:
                values[key] = float(raw) if key in ("mu", "theta") else int(raw)
            except ValueError as exc:
                raise ValidationError(
                    [f"{path}:{lineno}: bad value for {key}: {raw!r}"]
                ) from exc
    config = PipelineConfig(**values)
    config.validate()
    return config


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, f"opt_{key}", None)
        if flag is not None:
            overrides[key] = flag
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if overrides:
        config = dataclasses.replace(config, **overrides)
    config.validate()
    return config


def _encoder_from_flag(flag: str, config: PipelineConfig):
    if flag == "feature_hash":
        spec = EncoderSpec(kind="feature_hash", dim=config.k, seed=config.rng_seed)
    elif flag.startswith("external:"):
        spec = EncoderSpec(
            kind="external_file",
            dim=config.k,
            seed=config.rng_seed,
            path=flag.split(":", 1)[1],
        )
    else:
        raise ValidationError([f"bad --encoder value {flag!r}"])
    return build_encoder(spec)


def _read_pairs_csv(path: str) -> list[tuple[str, str, int]]:
    with open(path, encoding="utf-8") as stream:
        lines = stream.read().splitlines()
    if not lines:
        raise ValidationError([f"{path}: empty pairs file"])
    header = lines[0].split(",")
    if header[:2] != ["ticket_id", "event_id"] or len(header) > 3:
        raise ValidationError([f"{path}: expected ticket_id,event_id[,label] header"])
    has_label = len(header) == 3
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValidationError([f"{path}:{lineno}: column count mismatch"])
        label = int(parts[2]) if has_label else 1
        if label not in (0, 1):
            raise ValidationError([f"{path}:{lineno}: label must be 0 or 1"])
        pairs.append((parts[0], parts[1], label))
    return pairs


def _cmd_generate(args) -> int:
    scenario = ScenarioConfig()
    if args.scenario is not None:
        with open(args.scenario, encoding="utf-8") as stream:
            raw = json.load(stream)
        lag = raw.pop("ticket_lag", None)
        if lag is not None:
            from .synthetic import TicketLagConfig

            raw["ticket_lag"] = TicketLagConfig(**lag)
        if "incident_severity_mix" in raw:
            raw["incident_severity_mix"] = tuple(
                (str(name), float(p)) for name, p in raw["incident_severity_mix"]
            )
        if "tickets_per_incident" in raw:
            raw["tickets_per_incident"] = tuple(raw["tickets_per_incident"])
        scenario = ScenarioConfig(**raw)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, rng_seed=args.seed)
    corpus = generate_scenario(scenario)
    paths = write_corpus(corpus, args.out_dir)
    logger.info(
        "wrote %d alerts, %d tickets to %s",
        len(corpus.alerts),
        len(corpus.tickets),
        args.out_dir,
    )
    print(paths["alerts"])
    return 0


def _cmd_parse(args, config: PipelineConfig) -> int:
    alerts = read_alerts(args.alerts)
    parser_config = ParserConfig(
        similarity_threshold=args.sim_threshold, max_depth=args.depth
    )
    if args.granularity == "occurrence":
        events = parse_alert_occurrences(alerts, parser_config)
    else:
        events = parse_alerts(alerts, parser_config)
    write_records(events, args.out)
    logger.info("parsed %d alerts into %d events", len(alerts), len(events))
    return 0


def _cmd_learn_relations(args, config: PipelineConfig) -> int:
    events = read_events(args.events)
    store = relations.learn_relations(events, config)
    relations.save_store(store, args.out)
    logger.info("stored %d event pair relations", len(store))
    return 0


def _cmd_profile(args, config: PipelineConfig) -> int:
    events = read_events(args.events)
    store = relations.load_store(args.pmi, config)
    graphs = profile_incidents(events, store, config)
    payload = [
        {
            "nodes": sorted(g.nodes),
            "weighted_edges": [[a, b, w] for a, b, w in g.weighted_edges],
            "incident_label": g.incident_label,
            "earliest_time": g.earliest_time,
        }
        for g in graphs
    ]
    with open(args.out, "w", encoding="utf-8") as out:
        json.dump(payload, out, indent=1)
        out.write("\n")
    logger.info("profiled %d event graphs", len(graphs))
    return 0


def _cmd_train_ain(args, config: PipelineConfig) -> int:
    tickets = {t.ticket_id: t for t in read_tickets(args.tickets)}
    events_list = read_events(args.events)
    events = {e.event_id: e for e in events_list}
    from .pipeline import resolve_labeled_pairs

    pairs = resolve_labeled_pairs(_read_pairs_csv(args.pairs), tickets, events)
    if not any(label == 1 for _, _, label in pairs):
        raise ValidationError(["no usable positive pairs"])
    encoder = _encoder_from_flag(args.encoder, config)
    train_config = ain.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        rng_seed=config.rng_seed,
    )
    params = ain.train(
        pairs, events_list, config, train_config, encoder, hash_buckets=args.hash_buckets
    )
    ain.save_params(params, args.out)
    logger.info("saved model to %s", args.out)
    return 0


def _cmd_aggregate(args, config: PipelineConfig) -> int:
    alerts = read_alerts(args.alerts)
    tickets = read_tickets(args.tickets)
    store = relations.load_store(args.pmi, config)
    params = ain.load_params(args.model)
    if params.k != config.k:
        config = dataclasses.replace(config, k=params.k)
        config.validate()
    encoder = _encoder_from_flag(args.encoder, config)
    artifacts = PipelineArtifacts(store=store, params=params, encoder=encoder)
    assignments, rankings = run_batch(
        alerts,
        tickets,
        artifacts,
        config,
        region=args.region,
        collect_rankings=args.rankings is not None,
    )
    write_assignments(assignments, args.out)
    if args.rankings is not None:
        write_rankings(rankings, args.rankings)
    clustered = sum(1 for a in assignments if a.cluster_id != NON_INCIDENT)
    logger.info(
        "assigned %d tickets (%d clustered) to %s", len(assignments), clustered, args.out
    )
    return 0


def _cmd_run_offline(args, config: PipelineConfig) -> int:
    alerts = read_alerts(args.alerts)
    tickets = read_tickets(args.tickets)
    pairs = _read_pairs_csv(args.pairs)
    encoder = _encoder_from_flag(args.encoder, config)
    train_config = ain.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        rng_seed=config.rng_seed,
    )
    run_offline(
        alerts,
        tickets,
        pairs,
        config,
        train_config=train_config,
        out_dir=args.out_dir,
        encoder=encoder,
        hash_buckets=args.hash_buckets,
    )
    logger.info("artifacts written to %s", args.out_dir)
    return 0


def _cmd_eval(args, config: PipelineConfig) -> int:
    assignments = read_assignments(args.assignments)
    tickets = read_tickets(args.truth)
    predicted = {a.ticket_id: a.cluster_id for a in assignments}
    truth = {t.ticket_id: t.label_cluster or NON_INCIDENT for t in tickets}
    if set(predicted) != set(truth):
        raise ValidationError(
            ["assignments and truth tickets do not cover the same ticket set"]
        )
    prf = pairwise_prf(predicted, truth)
    acc = None
    if args.rankings is not None:
        rankings = read_rankings(args.rankings)
        event_truth = {
            t.ticket_id: t.label_event_id for t in tickets if t.label_event_id
        }
        for ticket_id in event_truth:
            rankings.setdefault(
                ticket_id, ain.RankedEvents(ticket_id=ticket_id, entries=())
            )
        acc = {k: acc_at_k(rankings, event_truth, k) for k in (1, 2, 3)}
    report = build_report(prf, acc)
    with open(args.report, "w", encoding="utf-8") as out:
        json.dump(report, out, indent=1)
        out.write("\n")
    print(
        f"precision={report['precision']:.3f} recall={report['recall']:.3f} "
        f"f1={report['f1']:.3f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alertlink",
        description="Incident-aware duplicate ticket aggregation pipeline.",
    )
    parser.add_argument("--config", help="flat key=value pipeline config file")
    parser.add_argument("--seed", type=int, help="override rng_seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="upper bound on worker threads (processing is order-independent)",
    )
    for key in ("mu", "theta"):
        parser.add_argument(f"--{key}", dest=f"opt_{key}", type=float)
    for key in ("window-length", "window-step", "k", "r"):
        parser.add_argument(
            f"--{key}", dest=f"opt_{key.replace('-', '_')}", type=int
        )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a labeled synthetic corpus")
    p.add_argument("--scenario", help="ScenarioConfig overrides as JSON")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("parse", help="parse alerts into events")
    p.add_argument("--alerts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sim-threshold", type=float, default=ParserConfig().similarity_threshold)
    p.add_argument("--depth", type=int, default=ParserConfig().max_depth)
    p.add_argument(
        "--granularity",
        choices=("aggregate", "occurrence"),
        default="aggregate",
        help="occurrence keeps one event per alert (needed for learn-relations)",
    )

    p = sub.add_parser("learn-relations", help="compute the PMI relation store")
    p.add_argument("--events", required=True, help="occurrence-level events file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("profile", help="build pruned incident graphs for one window")
    p.add_argument("--events", required=True)
    p.add_argument("--pmi", required=True)
    p.add_argument("--out", required=True)

    def add_train_flags(p):
        p.add_argument("--encoder", default="feature_hash",
                       help="feature_hash or external:<path>")
        p.add_argument("--hash-buckets", type=int, default=ain.DEFAULT_HASH_BUCKETS)
        p.add_argument("--lr", type=float, default=ain.TrainConfig().learning_rate)
        p.add_argument("--batch-size", type=int, default=ain.TrainConfig().batch_size)
        p.add_argument("--max-epochs", type=int, default=ain.TrainConfig().max_epochs)
        p.add_argument("--patience", type=int, default=ain.TrainConfig().patience)

    p = sub.add_parser("train-ain", help="train the ticket-event correlation model")
    p.add_argument("--pairs", required=True)
    p.add_argument("--tickets", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True)
    add_train_flags(p)

    p = sub.add_parser("aggregate", help="cluster tickets using trained artifacts")
    p.add_argument("--alerts", required=True)
    p.add_argument("--tickets", required=True)
    p.add_argument("--pmi", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--region", help="restrict to one region")
    p.add_argument("--out", required=True)
    p.add_argument("--rankings", help="also write top-ranked events per ticket")
    p.add_argument("--encoder", default="feature_hash")

    p = sub.add_parser("run-offline", help="learn relations and train the model")
    p.add_argument("--alerts", required=True)
    p.add_argument("--tickets", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out-dir", required=True)
    add_train_flags(p)

    p = sub.add_parser("eval", help="score assignments against ground truth")
    p.add_argument("--assignments", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--rankings")
    p.add_argument("--report", required=True)

    return parser


_COMMANDS = {
    "parse": _cmd_parse,
    "learn-relations": _cmd_learn_relations,
    "profile": _cmd_profile,
    "train-ain": _cmd_train_ain,
    "aggregate": _cmd_aggregate,
    "run-offline": _cmd_run_offline,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        config = _apply_overrides(load_config(args.config), args)
        return _COMMANDS[args.command](args, config)
    except (
        ValidationError,
        RelationStoreError,
        EncoderError,
        ain.CheckpointError,
        ain.TrainingError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
