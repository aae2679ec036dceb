"""Attentive interaction network for ticket-event correlation.

Scores how likely a ticket was caused by an event. Every feature of the
pair is embedded in R^k; each cross pair (ticket feature i, event
feature j) interacts through the Hadamard product u_ij = v_i * v_j; a
small ReLU network turns u_ij into an attention logit

    a_hat_ij = h . relu(W u_ij + b)

which is softmax-normalized over all n*m cross pairs, and the attended
sum z = sum a_ij u_ij feeds a sigmoid output unit. Only cross pairs
interact: no ticket-ticket or event-event terms. Training minimizes the
summed binary cross entropy with Adam; gradients are exact analytic
backprop (ReLU subgradient at 0 taken as 0).

High-cardinality categorical features use hashed embedding tables so
unseen values are always representable. Text features go through the
frozen text encoder followed by a trainable k x k projection.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .encoding import TextEncoder
from .hashing import fnv1a64_str
from .models import Event, PipelineConfig, Ticket

TICKET_FEATURES = ("summary", "product_name", "category")
EVENT_FEATURES = (
    "template",
    "event_id",
    "severity",
    "monitor_id",
    "owning_service",
    "owning_component",
)
TEXT_FEATURES = frozenset({"summary", "template"})
N_TICKET = len(TICKET_FEATURES)
M_EVENT = len(EVENT_FEATURES)
N_PAIRS = N_TICKET * M_EVENT

DEFAULT_HASH_BUCKETS = 1 << 16
_INIT_SCALE = 0.05
_PROB_FLOOR = 1e-15
_BCE_CLAMP = 1e-12


class TrainingError(ValueError):
    pass


class NumericalError(FloatingPointError):
    """Raised when a forward/backward pass produces non-finite values."""

    def __init__(self, tensor_name: str):
        super().__init__(f"numerical blow-up in tensor {tensor_name!r}")
        self.tensor_name = tensor_name


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    rng_seed: int = 0


@dataclass(frozen=True)
class RankedEvents:
    ticket_id: str
    entries: tuple[tuple[str, float], ...]


def schema_hash() -> str:
    payload = "|".join(TICKET_FEATURES) + "||" + "|".join(EVENT_FEATURES)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _categorical_features() -> list[str]:
    return [
        f for f in TICKET_FEATURES + EVENT_FEATURES if f not in TEXT_FEATURES
    ]


def _text_features() -> list[str]:
    return [f for f in TICKET_FEATURES + EVENT_FEATURES if f in TEXT_FEATURES]


def _tensor_names() -> set[str]:
    names = {f"emb:{f}" for f in _categorical_features()}
    names |= {f"proj:{f}" for f in _text_features()}
    names |= {"att:W", "att:b", "att:h", "out:w", "out:b"}
    return names


@dataclass
class AinParameters:
    """All trainable tensors, keyed by canonical names.

    emb:<feature>   hashed embedding table, (hash_buckets, k)
    proj:<feature>  text projection, (k, k)
    att:W att:b att:h   attention network, (r,k) (r,) (r,)
    out:w out:b     prediction layer, (k,) (1,)
    """

    k: int
    r: int
    hash_buckets: int
    seed: int
    tensors: dict[str, np.ndarray]

    @classmethod
    def initialize(
        cls,
        k: int,
        r: int,
        hash_buckets: int = DEFAULT_HASH_BUCKETS,
        seed: int = 0,
    ) -> "AinParameters":
        rng = np.random.default_rng(seed)

        def uniform(*shape):
            return rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=shape)

        tensors: dict[str, np.ndarray] = {}
        for name in _categorical_features():
            tensors[f"emb:{name}"] = uniform(hash_buckets, k)
        for name in _text_features():
            tensors[f"proj:{name}"] = uniform(k, k)
        tensors["att:W"] = uniform(r, k)
        tensors["att:b"] = uniform(r)
        tensors["att:h"] = uniform(r)
        tensors["out:w"] = uniform(k)
        tensors["out:b"] = uniform(1)
        return cls(k=k, r=r, hash_buckets=hash_buckets, seed=seed, tensors=tensors)

    def copy(self) -> "AinParameters":
        return AinParameters(
            k=self.k,
            r=self.r,
            hash_buckets=self.hash_buckets,
            seed=self.seed,
            tensors={name: t.copy() for name, t in self.tensors.items()},
        )


def bucket_for(value: str, hash_buckets: int) -> int:
    return fnv1a64_str(value) % hash_buckets


def _feature_value(record, name: str) -> str:
    return str(getattr(record, name))


@dataclass
class _BatchEmbedding:
    """Embedded batch plus the indices needed to scatter gradients back."""

    ticket_vecs: np.ndarray  # (B, n, k)
    event_vecs: np.ndarray  # (B, m, k)
    cat_rows: dict[str, np.ndarray]  # feature -> (B,) table rows
    text_inputs: dict[str, np.ndarray]  # feature -> (B, k) frozen encodings


def _embed_batch(
    tickets: Sequence[Ticket],
    events: Sequence[Event],
    params: AinParameters,
    encoder: TextEncoder,
) -> _BatchEmbedding:
    batch = len(tickets)
    k = params.k
    ticket_vecs = np.empty((batch, N_TICKET, k))
    event_vecs = np.empty((batch, M_EVENT, k))
    cat_rows: dict[str, np.ndarray] = {}
    text_inputs: dict[str, np.ndarray] = {}
    for side, names, records, out in (
        ("ticket", TICKET_FEATURES, tickets, ticket_vecs),
        ("event", EVENT_FEATURES, events, event_vecs),
    ):
        for pos, name in enumerate(names):
            if name in TEXT_FEATURES:
                raw = np.stack(
                    [encoder.encode(_feature_value(rec, name)) for rec in records]
                )
                text_inputs[name] = raw
                out[:, pos, :] = raw @ params.tensors[f"proj:{name}"].T
            else:
                rows = np.array(
                    [
                        bucket_for(_feature_value(rec, name), params.hash_buckets)
                        for rec in records
                    ],
                    dtype=np.int64,
                )
                cat_rows[name] = rows
                out[:, pos, :] = params.tensors[f"emb:{name}"][rows]
    return _BatchEmbedding(ticket_vecs, event_vecs, cat_rows, text_inputs)


def embed_features(
    ticket: Ticket, event: Event, params: AinParameters, encoder: TextEncoder
) -> list[np.ndarray]:
    """Embedding vectors in schema order: ticket features, then event."""
    emb = _embed_batch([ticket], [event], params, encoder)
    vecs = [emb.ticket_vecs[0, i] for i in range(N_TICKET)]
    vecs += [emb.event_vecs[0, j] for j in range(M_EVENT)]
    return vecs


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class _Forward:
    interactions: np.ndarray  # U (B, P, k)
    pre_act: np.ndarray  # S (B, P, r)
    hidden: np.ndarray  # Q = relu(S)
    attention: np.ndarray  # A (B, P)
    summary: np.ndarray  # Z (B, k)
    prob: np.ndarray  # (B,)


def _forward(emb: _BatchEmbedding, params: AinParameters) -> _Forward:
    t = params.tensors
    batch = emb.ticket_vecs.shape[0]
    # (B, n, 1, k) * (B, 1, m, k) -> (B, P, k)
    U = (emb.ticket_vecs[:, :, None, :] * emb.event_vecs[:, None, :, :]).reshape(
        batch, N_PAIRS, params.k
    )
    S = U @ t["att:W"].T + t["att:b"]  # (B, P, r)
    Q = np.maximum(S, 0.0)
    ahat = Q @ t["att:h"]  # (B, P)
    shifted = ahat - ahat.max(axis=1, keepdims=True)
    expa = np.exp(shifted)
    A = expa / expa.sum(axis=1, keepdims=True)
    Z = np.einsum("bp,bpk->bk", A, U)
    logit = Z @ t["out:w"] + t["out:b"][0]
    prob = np.clip(_sigmoid(logit), _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    return _Forward(U, S, Q, A, Z, prob)


def attentive_interaction(
    ticket_vectors: Sequence[np.ndarray],
    event_vectors: Sequence[np.ndarray],
    params: AinParameters,
) -> tuple[np.ndarray, np.ndarray]:
    """Attended sum of cross-pair interactions for one example.

    Returns (z, a) with a shaped (len(ticket_vectors), len(event_vectors)).
    Exposed with explicit sides so small hand-built cases are testable.
    """
    t = params.tensors
    vt = np.stack(ticket_vectors)  # (n, k)
    ve = np.stack(event_vectors)  # (m, k)
    n, m = vt.shape[0], ve.shape[0]
    U = (vt[:, None, :] * ve[None, :, :]).reshape(n * m, -1)
    Q = np.maximum(U @ t["att:W"].T + t["att:b"], 0.0)
    ahat = Q @ t["att:h"]
    expa = np.exp(ahat - ahat.max())
    a = expa / expa.sum()
    z = a @ U
    return z, a.reshape(n, m)


def predict_batch(
    tickets: Sequence[Ticket],
    events: Sequence[Event],
    params: AinParameters,
    encoder: TextEncoder,
) -> np.ndarray:
    if not tickets:
        return np.zeros(0)
    emb = _embed_batch(tickets, events, params, encoder)
    return _forward(emb, params).prob


def predict(
    ticket: Ticket, event: Event, params: AinParameters, encoder: TextEncoder
) -> float:
    return float(predict_batch([ticket], [event], params, encoder)[0])


def bce_loss(probabilities: Sequence[float], labels: Sequence[int]) -> float:
    """Summed binary cross entropy; probabilities are clamped for the log."""
    if len(probabilities) != len(labels):
        raise ValueError(
            f"length mismatch: {len(probabilities)} probabilities, {len(labels)} labels"
        )
    p = np.clip(np.asarray(probabilities, dtype=np.float64), _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())


def _zero_grads(params: AinParameters) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors.items()}


def compute_gradients(
    batch: Sequence[tuple[Ticket, Event, int]],
    params: AinParameters,
    encoder: TextEncoder,
) -> tuple[float, dict[str, np.ndarray]]:
    """Summed BCE loss and its exact gradients over one batch."""
    tickets = [t for t, _, _ in batch]
    events = [e for _, e, _ in batch]
    y = np.array([label for _, _, label in batch], dtype=np.float64)
    emb = _embed_batch(tickets, events, params, encoder)
    fwd = _forward(emb, params)
    loss = bce_loss(fwd.prob, y)

    t = params.tensors
    grads = _zero_grads(params)
    U, S, Q, A, Z = fwd.interactions, fwd.pre_act, fwd.hidden, fwd.attention, fwd.summary
    batch_size = len(batch)

    g = fwd.prob - y  # (B,) dL/dlogit through sigmoid+BCE
    grads["out:w"] = Z.T @ g
    grads["out:b"] = np.array([g.sum()])
    dZ = g[:, None] * t["out:w"][None, :]  # (B, k)
    c = np.einsum("bpk,bk->bp", U, dZ)  # dL/dA
    dahat = A * (c - (A * c).sum(axis=1, keepdims=True))  # softmax backward
    dQ = dahat[:, :, None] * t["att:h"][None, None, :]  # (B, P, r)
    dS = np.where(S > 0, dQ, 0.0)
    grads["att:W"] = np.einsum("bpr,bpk->rk", dS, U)
    grads["att:b"] = dS.sum(axis=(0, 1))
    grads["att:h"] = np.einsum("bp,bpr->r", dahat, Q)
    dU = A[:, :, None] * dZ[:, None, :] + np.einsum("bpr,rk->bpk", dS, t["att:W"])
    dU4 = dU.reshape(batch_size, N_TICKET, M_EVENT, params.k)
    dVt = np.einsum("bnmk,bmk->bnk", dU4, emb.event_vecs)
    dVe = np.einsum("bnmk,bnk->bmk", dU4, emb.ticket_vecs)
    for side_names, dV in ((TICKET_FEATURES, dVt), (EVENT_FEATURES, dVe)):
        for pos, name in enumerate(side_names):
            if name in TEXT_FEATURES:
                grads[f"proj:{name}"] += np.einsum(
                    "bk,bd->kd", dV[:, pos, :], emb.text_inputs[name]
                )
            else:
                np.add.at(grads[f"emb:{name}"], emb.cat_rows[name], dV[:, pos, :])

    if not math.isfinite(loss):
        raise NumericalError("loss")
    for name in grads:
        if not np.isfinite(grads[name]).all():
            raise NumericalError(name)
    return loss, grads


@dataclass
class AdamState:
    step: int
    first: dict[str, np.ndarray]
    second: dict[str, np.ndarray]

    @classmethod
    def initialize(cls, tensors: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            first={name: np.zeros_like(t) for name, t in tensors.items()},
            second={name: np.zeros_like(t) for name, t in tensors.items()},
        )


def adam_step(
    tensors: dict[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> AdamState:
    """Standard bias-corrected Adam update, applied in place."""
    state.step += 1
    step = state.step
    for name, tensor in tensors.items():
        g = grads[name]
        m = state.first[name]
        v = state.second[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1**step)
        v_hat = v / (1.0 - cfg.beta2**step)
        tensor -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return state


def _global_pool(
    candidate_events: Mapping[str, Sequence[Event]] | Sequence[Event],
) -> list[Event]:
    if isinstance(candidate_events, Mapping):
        merged: dict[str, Event] = {}
        for key in sorted(candidate_events):
            for event in candidate_events[key]:
                merged.setdefault(event.event_id, event)
        return [merged[eid] for eid in sorted(merged)]
    unique: dict[str, Event] = {}
    for event in candidate_events:
        unique.setdefault(event.event_id, event)
    return [unique[eid] for eid in sorted(unique)]


def sample_negatives(
    positives: Sequence[tuple[Ticket, Event]],
    candidate_events: Mapping[str, Sequence[Event]] | Sequence[Event],
    seed: int,
) -> list[tuple[Ticket, Event, int]]:
    """One negative per positive: a chunk-local event other than the label.

    Tickets whose chunk offers nothing but the labeled event fall back
    to the global candidate pool.
    """
    pool = _global_pool(candidate_events)
    if not pool:
        raise TrainingError("candidate_events is empty")
    rng = random.Random(seed)
    negatives: list[tuple[Ticket, Event, int]] = []
    for ticket, label_event in positives:
        if isinstance(candidate_events, Mapping):
            local = candidate_events.get(ticket.ticket_id, ())
        else:
            local = candidate_events
        choices = sorted(
            {e.event_id: e for e in local if e.event_id != label_event.event_id}.values(),
            key=lambda e: e.event_id,
        )
        if not choices:
            choices = [e for e in pool if e.event_id != label_event.event_id]
        if not choices:
            raise TrainingError(
                f"no negative candidates available for ticket {ticket.ticket_id!r}"
            )
        negatives.append((ticket, choices[rng.randrange(len(choices))], 0))
    return negatives


@dataclass
class _Dataset:
    tickets: list[Ticket]
    events: list[Event]
    labels: np.ndarray


def _fit(
    tensors: dict[str, np.ndarray],
    loss_and_grads,
    dataset: _Dataset,
    train_config: TrainConfig,
) -> tuple[dict[str, np.ndarray], list[float]]:
    """Shared mini-batch loop with best-epoch tracking and early stop."""
    rng = np.random.default_rng(train_config.rng_seed)
    state = AdamState.initialize(tensors)
    size = len(dataset.tickets)
    best_loss = math.inf
    best_tensors = {name: t.copy() for name, t in tensors.items()}
    stale = 0
    history: list[float] = []
    for _ in range(train_config.max_epochs):
        order = rng.permutation(size)
        epoch_loss = 0.0
        for lo in range(0, size, train_config.batch_size):
            idx = order[lo : lo + train_config.batch_size]
            loss, grads = loss_and_grads(idx)
            adam_step(tensors, grads, state, train_config)
            epoch_loss += loss
        history.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_tensors = {name: t.copy() for name, t in tensors.items()}
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                break
    return best_tensors, history


def _prepare_dataset(
    labeled_pairs: Sequence[tuple[Ticket, Event, int]],
    candidate_events: Mapping[str, Sequence[Event]] | Sequence[Event] | None,
    train_config: TrainConfig,
) -> _Dataset:
    positives = [(t, e) for t, e, label in labeled_pairs if label == 1]
    negatives = [(t, e, 0) for t, e, label in labeled_pairs if label == 0]
    if not positives:
        raise TrainingError("training needs at least one positive pair")
    if not negatives:
        if candidate_events is None:
            raise TrainingError(
                "no negative pairs given and no candidate events to sample from"
            )
        negatives = sample_negatives(positives, candidate_events, train_config.rng_seed)
    rows = [(t, e, 1) for t, e in positives] + negatives
    return _Dataset(
        tickets=[t for t, _, _ in rows],
        events=[e for _, e, _ in rows],
        labels=np.array([label for _, _, label in rows], dtype=np.float64),
    )


def train(
    labeled_pairs: Sequence[tuple[Ticket, Event, int]],
    events: Mapping[str, Sequence[Event]] | Sequence[Event] | None,
    config: PipelineConfig,
    train_config: TrainConfig,
    encoder: TextEncoder,
    hash_buckets: int = DEFAULT_HASH_BUCKETS,
) -> AinParameters:
    """Train from labeled ticket-event pairs.

    ``events`` supplies negative-sampling candidates (per-ticket mapping
    or a flat pool) and is only consulted when the pairs are all
    positive. Deterministic given the train_config seed.
    """
    dataset = _prepare_dataset(labeled_pairs, events, train_config)
    params = AinParameters.initialize(
        k=config.k, r=config.r, hash_buckets=hash_buckets, seed=train_config.rng_seed
    )

    def loss_and_grads(idx: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        batch = [
            (dataset.tickets[i], dataset.events[i], int(dataset.labels[i])) for i in idx
        ]
        return compute_gradients(batch, params, encoder)

    best_tensors, _ = _fit(params.tensors, loss_and_grads, dataset, train_config)
    params.tensors = best_tensors
    return params


def rank_events(
    ticket: Ticket,
    candidate_events: Sequence[Event],
    params: AinParameters,
    encoder: TextEncoder,
) -> RankedEvents:
    """All candidates scored, sorted by probability desc then event_id."""
    unique: dict[str, Event] = {}
    for event in candidate_events:
        cur = unique.get(event.event_id)
        if cur is None or event.latest_time > cur.latest_time:
            unique[event.event_id] = event
    ordered = [unique[eid] for eid in sorted(unique)]
    if not ordered:
        return RankedEvents(ticket_id=ticket.ticket_id, entries=())
    probs = predict_batch([ticket] * len(ordered), ordered, params, encoder)
    entries = sorted(
        zip((e.event_id for e in ordered), probs.tolist()),
        key=lambda item: (-item[1], item[0]),
    )
    return RankedEvents(ticket_id=ticket.ticket_id, entries=tuple(entries))


# --- checkpoint io ----------------------------------------------------
# Text header, then per tensor a "!name dims..." line followed by raw
# little-endian float32 bytes. Saving is byte-stable, so identical
# parameters always produce identical files.

_CKPT_MAGIC = "#ain v1"


def save_params(params: AinParameters, path: str) -> None:
    with open(path, "wb") as out:
        header = (
            f"{_CKPT_MAGIC} schema={schema_hash()} k={params.k} r={params.r} "
            f"hash_buckets={params.hash_buckets} seed={params.seed}\n"
        )
        out.write(header.encode("ascii"))
        for name in sorted(params.tensors):
            tensor = params.tensors[name]
            dims = " ".join(str(d) for d in tensor.shape)
            out.write(f"!{name} {dims}\n".encode("ascii"))
            out.write(tensor.astype("<f4").tobytes())


def load_params(path: str) -> AinParameters:
    try:
        stream = open(path, "rb")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc
    with stream:
        header = stream.readline().decode("ascii", errors="replace").rstrip("\n")
        if not header.startswith(_CKPT_MAGIC):
            raise CheckpointError(f"{path}: not a model checkpoint")
        try:
            meta = dict(part.split("=", 1) for part in header.split()[2:])
            if meta["schema"] != schema_hash():
                raise CheckpointError(
                    f"{path}: feature schema mismatch ({meta['schema']})"
                )
            k = int(meta["k"])
            r = int(meta["r"])
            hash_buckets = int(meta["hash_buckets"])
            seed = int(meta["seed"])
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"{path}: bad checkpoint header") from exc
        tensors: dict[str, np.ndarray] = {}
        while True:
            line = stream.readline()
            if not line:
                break
            text = line.decode("ascii", errors="replace").rstrip("\n")
            if not text.startswith("!"):
                raise CheckpointError(f"{path}: corrupt tensor record {text!r}")
            parts = text[1:].split()
            name, dims = parts[0], tuple(int(d) for d in parts[1:])
            count = int(np.prod(dims)) if dims else 1
            raw = stream.read(count * 4)
            if len(raw) != count * 4:
                raise CheckpointError(f"{path}: truncated tensor {name!r}")
            tensors[name] = (
                np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(dims)
            )
    if set(tensors) != _tensor_names():
        raise CheckpointError(f"{path}: tensor set mismatch")
    return AinParameters(k=k, r=r, hash_buckets=hash_buckets, seed=seed, tensors=tensors)


# --- no-attention ablation --------------------------------------------
# Benchmark baseline: the same embeddings, but feature vectors are
# concatenated and fed straight to the prediction layer. No pairwise
# interactions, so cross-feature matches are not representable.


@dataclass
class ConcatParameters:
    k: int
    hash_buckets: int
    seed: int
    tensors: dict[str, np.ndarray]

    @classmethod
    def initialize(
        cls, k: int, hash_buckets: int = DEFAULT_HASH_BUCKETS, seed: int = 0
    ) -> "ConcatParameters":
        rng = np.random.default_rng(seed)

        def uniform(*shape):
            return rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=shape)

        tensors: dict[str, np.ndarray] = {}
        for name in _categorical_features():
            tensors[f"emb:{name}"] = uniform(hash_buckets, k)
        for name in _text_features():
            tensors[f"proj:{name}"] = uniform(k, k)
        tensors["out:w"] = uniform((N_TICKET + M_EVENT) * k)
        tensors["out:b"] = uniform(1)
        return cls(k=k, hash_buckets=hash_buckets, seed=seed, tensors=tensors)


def _concat_prob(
    emb: _BatchEmbedding, params: ConcatParameters
) -> tuple[np.ndarray, np.ndarray]:
    batch = emb.ticket_vecs.shape[0]
    X = np.concatenate(
        (emb.ticket_vecs.reshape(batch, -1), emb.event_vecs.reshape(batch, -1)), axis=1
    )
    logit = X @ params.tensors["out:w"] + params.tensors["out:b"][0]
    return X, np.clip(_sigmoid(logit), _PROB_FLOOR, 1.0 - _PROB_FLOOR)


def _concat_gradients(
    batch: Sequence[tuple[Ticket, Event, int]],
    params: ConcatParameters,
    encoder: TextEncoder,
) -> tuple[float, dict[str, np.ndarray]]:
    tickets = [t for t, _, _ in batch]
    events = [e for _, e, _ in batch]
    y = np.array([label for _, _, label in batch], dtype=np.float64)
    fake = AinParameters(
        k=params.k,
        r=1,
        hash_buckets=params.hash_buckets,
        seed=params.seed,
        tensors=params.tensors,
    )
    emb = _embed_batch(tickets, events, fake, encoder)
    X, prob = _concat_prob(emb, params)
    loss = bce_loss(prob, y)
    grads = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    g = prob - y
    grads["out:w"] = X.T @ g
    grads["out:b"] = np.array([g.sum()])
    dX = g[:, None] * params.tensors["out:w"][None, :]
    k = params.k
    dVt = dX[:, : N_TICKET * k].reshape(len(batch), N_TICKET, k)
    dVe = dX[:, N_TICKET * k :].reshape(len(batch), M_EVENT, k)
    for side_names, dV in ((TICKET_FEATURES, dVt), (EVENT_FEATURES, dVe)):
        for pos, name in enumerate(side_names):
            if name in TEXT_FEATURES:
                grads[f"proj:{name}"] += np.einsum(
                    "bk,bd->kd", dV[:, pos, :], emb.text_inputs[name]
                )
            else:
                np.add.at(grads[f"emb:{name}"], emb.cat_rows[name], dV[:, pos, :])
    return loss, grads


def train_concat_baseline(
    labeled_pairs: Sequence[tuple[Ticket, Event, int]],
    events: Mapping[str, Sequence[Event]] | Sequence[Event] | None,
    config: PipelineConfig,
    train_config: TrainConfig,
    encoder: TextEncoder,
    hash_buckets: int = DEFAULT_HASH_BUCKETS,
) -> ConcatParameters:
    """The ablation trained with the exact same loop and schedule."""
    dataset = _prepare_dataset(labeled_pairs, events, train_config)
    params = ConcatParameters.initialize(
        k=config.k, hash_buckets=hash_buckets, seed=train_config.rng_seed
    )

    def loss_and_grads(idx: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        batch = [
            (dataset.tickets[i], dataset.events[i], int(dataset.labels[i])) for i in idx
        ]
        return _concat_gradients(batch, params, encoder)

    best_tensors, _ = _fit(params.tensors, loss_and_grads, dataset, train_config)
    params.tensors = best_tensors
    return params


def rank_events_concat(
    ticket: Ticket,
    candidate_events: Sequence[Event],
    params: ConcatParameters,
    encoder: TextEncoder,
) -> RankedEvents:
    unique: dict[str, Event] = {}
    for event in candidate_events:
        cur = unique.get(event.event_id)
        if cur is None or event.latest_time > cur.latest_time:
            unique[event.event_id] = event
    ordered = [unique[eid] for eid in sorted(unique)]
    if not ordered:
        return RankedEvents(ticket_id=ticket.ticket_id, entries=())
    fake = AinParameters(
        k=params.k, r=1, hash_buckets=params.hash_buckets, seed=params.seed,
        tensors=params.tensors,
    )
    emb = _embed_batch([ticket] * len(ordered), ordered, fake, encoder)
    _, probs = _concat_prob(emb, params)
    entries = sorted(
        zip((e.event_id for e in ordered), probs.tolist()),
        key=lambda item: (-item[1], item[0]),
    )
    return RankedEvents(ticket_id=ticket.ticket_id, entries=tuple(entries))
