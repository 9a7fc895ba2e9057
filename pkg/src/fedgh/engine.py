"""FedGH: heterogeneous extractors, one server-trained global prediction header.

Each round the selected clients splice in the current global header, train
their whole model locally, and upload one averaged representation per local
class (a LAR). The server takes one gradient step on the header per LAR, in
ascending client id, then ascending class id.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import accounting
from .accounting import CostLedger
from .config import ExperimentConfig, stream
from .data import ClientPartition, Dataset, generate_blobs, partition_noniid
from .errors import InputError, ProtocolError
from .nn import (
    FeatureExtractor,
    PredictionHeader,
    SplitModel,
    forward_extractor,
    param_count,
    predict_logits,
    sgd_header_step,
    sgd_step,
)


@dataclass
class LARRecord:
    client_id: int
    class_id: int
    vector: np.ndarray


@dataclass
class GlobalHeader:
    header: PredictionHeader
    round: int = 0


@dataclass
class ClientState:
    client_id: int
    partition: ClientPartition
    model: SplitModel
    rng: np.random.Generator = field(repr=False, default=None)

    @property
    def n_train(self) -> int:
        return len(self.partition.train)


@dataclass
class RoundMetrics:
    round: int
    client_acc: list[float]
    avg_test_acc: float
    mean_train_loss: float
    uplink_bits: int
    downlink_bits: int
    cum_bits: int
    selected: tuple[int, ...] = ()
    client_uplink: dict[int, int] = field(default_factory=dict)


@dataclass
class RunResult:
    metrics: list[RoundMetrics]
    clients: list[ClientState]
    ledger: CostLedger
    global_header: GlobalHeader | None = None
    global_model: SplitModel | None = None


Observer = Callable[..., None]


# --------------------------------------------------------------------------
# client side


def local_train(client: ClientState, epochs: int, batch: int, lr: float,
                rng: np.random.Generator | None = None) -> float | None:
    """Mini-batch SGD over the client's train split; returns the mean final-epoch loss.

    The loss of each batch is taken before its update and averaged weighting by
    batch size. Returns ``None`` (with a warning) if the client has no data.
    """
    data = client.partition.train
    n = len(data)
    if n == 0:
        warnings.warn(f"client {client.client_id} has no training data; skipped", RuntimeWarning)
        return None
    rng = rng if rng is not None else client.rng
    last = 0.0
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            total += sgd_step(client.model, data.features[idx], data.labels[idx], lr) * len(idx)
        last = total / n
    return last


def compute_lars(client: ClientState) -> list[LARRecord]:
    """Per-class mean representation of the client's training samples, by ascending class."""
    data = client.partition.train
    if len(data) == 0:
        return []
    reps = forward_extractor(client.model.extractor, data.features)
    return [
        LARRecord(client.client_id, c, reps[data.labels == c].mean(axis=0))
        for c in data.classes()
    ]


def splice_global_header(client: ClientState, global_header: GlobalHeader) -> None:
    if client.model.header.shapes() != global_header.header.shapes():
        raise ProtocolError(
            f"client {client.client_id} header shapes {client.model.header.shapes()} "
            f"do not match global header {global_header.header.shapes()}",
            client.client_id,
        )
    client.model.header = global_header.header.copy()


# --------------------------------------------------------------------------
# server side


def server_train_header(global_header: GlobalHeader, uploads, eta_theta: float,
                        batch_per_client: bool = False) -> GlobalHeader:
    """Train a copy of the global header on the uploaded LARs.

    ``uploads`` is an iterable of ``(client_id, [LARRecord, ...])``. Clients
    are processed in ascending id; with ``batch_per_client`` each client's
    LARs form one mini-batch instead of one step per LAR.
    """
    header = global_header.header.copy()
    d_r = header.input_dim
    ordered = sorted(uploads, key=lambda u: u[0])
    for client_id, records in ordered:
        for rec in records:
            if np.shape(rec.vector) != (d_r,):
                raise ProtocolError(
                    f"client {client_id} sent a LAR of shape {np.shape(rec.vector)}, expected ({d_r},)",
                    client_id,
                )
    for client_id, records in ordered:
        records = sorted(records, key=lambda r: r.class_id)
        if not records:
            continue
        if batch_per_client:
            sgd_header_step(header, np.stack([r.vector for r in records]),
                            [r.class_id for r in records], eta_theta)
        else:
            for rec in records:
                sgd_header_step(header, rec.vector, rec.class_id, eta_theta)
    return GlobalHeader(header, global_header.round + 1)


# --------------------------------------------------------------------------
# evaluation


def evaluate(model: SplitModel, test: Dataset) -> float:
    """Fraction of test samples whose argmax logit (lowest index on ties) is the label."""
    if len(test) == 0:
        raise InputError("empty test set")
    pred = np.argmax(predict_logits(model, test.features), axis=1)
    return float(np.mean(pred == test.labels))


# --------------------------------------------------------------------------
# run setup shared with the baselines


def build_partitions(config: ExperimentConfig) -> list[ClientPartition]:
    dataset = generate_blobs(
        config.num_classes, config.input_dim, config.per_class_samples,
        config.blob_spread, stream(config.seed, "data"), center_scale=config.center_scale,
    )
    return partition_noniid(
        dataset, config.n_clients, config.classes_per_client,
        stream(config.seed, "partition"), split_seed=stream(config.seed, "split"),
    )


def build_model(config: ExperimentConfig, hidden, rng: np.random.Generator) -> SplitModel:
    extractor = FeatureExtractor.build(config.input_dim, hidden, config.rep_dim, rng)
    header = PredictionHeader.build(config.rep_dim, config.num_classes, rng, config.header_hidden)
    return SplitModel(extractor, header)


def build_clients(config: ExperimentConfig, partitions=None) -> list[ClientState]:
    partitions = partitions if partitions is not None else build_partitions(config)
    return [
        ClientState(
            k, partitions[k],
            build_model(config, config.client_hidden(k), stream(config.seed, "init", k)),
            stream(config.seed, "shuffle", k),
        )
        for k in range(config.n_clients)
    ]


def initial_global_header(config: ExperimentConfig) -> GlobalHeader:
    rng = stream(config.seed, "init-server")
    return GlobalHeader(PredictionHeader.build(config.rep_dim, config.num_classes, rng,
                                               config.header_hidden))


def select_clients(rng: np.random.Generator, n: int, k: int) -> list[int]:
    """Uniform selection of ``k`` of ``n`` client ids without replacement, ascending."""
    return sorted(int(i) for i in rng.choice(n, size=k, replace=False))


def local_steps(n_train: int, epochs: int, batch: int) -> int:
    return epochs * math.ceil(n_train / batch)


def round_metrics(t: int, models: list[SplitModel], clients: list[ClientState], losses,
                  cost: accounting.RoundCost, ledger: CostLedger, selected) -> RoundMetrics:
    accs = [evaluate(m, c.partition.test) for m, c in zip(models, clients)]
    losses = [l for l in losses if l is not None]
    return RoundMetrics(
        round=t,
        client_acc=accs,
        avg_test_acc=float(np.mean(accs)),
        mean_train_loss=float(np.mean(losses)) if losses else float("nan"),
        uplink_bits=cost.uplink_bits,
        downlink_bits=cost.downlink_bits,
        cum_bits=ledger.cum_bits,
        selected=tuple(selected),
        client_uplink=dict(cost.uplink),
    )


def _notify(observer, event, **info):
    if observer is not None:
        observer(event, **info)


# --------------------------------------------------------------------------
# the round loop


def run_fedgh(config: ExperimentConfig, observer: Observer | None = None,
              communicate: bool = True) -> RunResult:
    """Run ``config.rounds`` rounds of FedGH.

    Round 0 clients train with their own initial headers; from round 1 on the
    selected clients first splice in the server's header. ``communicate=False``
    drops the splice, upload and server steps, which is exactly Standalone.

    ``observer(event, **info)`` is called at each protocol step with events
    ``round_start``, ``spliced``, ``trained``, ``uploaded`` and ``server_done``.
    """
    config.validate()
    clients = build_clients(config)
    global_header = initial_global_header(config)
    header_params = param_count(global_header.header)
    select_rng = stream(config.seed, "selection")
    ledger = CostLedger()
    metrics = []

    for t in range(config.rounds):
        selected = select_clients(select_rng, config.n_clients, config.k_selected)
        cost = ledger.open_round()
        _notify(observer, "round_start", round=t, selected=selected, clients=clients)
        losses, uploads = [], []
        for k in selected:
            client = clients[k]
            if communicate and t > 0:
                splice_global_header(client, global_header)
                cost.downlink[k] = accounting.fedgh_downlink_bits(header_params)
                _notify(observer, "spliced", round=t, client=client, global_header=global_header)
            losses.append(local_train(client, config.epochs, config.batch, config.eta_omega))
            cost.client_sgd_steps += local_steps(client.n_train, config.epochs, config.batch)
            _notify(observer, "trained", round=t, client=client)
            if communicate:
                lars = compute_lars(client)
                uploads.append((k, lars))
                cost.uplink[k] = accounting.fedgh_uplink_bits(len(lars), config.rep_dim)
                _notify(observer, "uploaded", round=t, client=client, lars=lars,
                        bits=cost.uplink[k])
        if communicate:
            global_header = server_train_header(global_header, uploads, config.eta_theta,
                                                config.server_batch)
            cost.server_header_steps += (
                sum(1 for _, lars in uploads if lars) if config.server_batch
                else sum(len(lars) for _, lars in uploads)
            )
            _notify(observer, "server_done", round=t, global_header=global_header,
                    uploads=uploads)
        ledger.close_round()
        metrics.append(round_metrics(t, [c.model for c in clients], clients, losses, cost,
                                     ledger, selected))

    return RunResult(metrics, clients, ledger,
                     global_header=global_header if communicate else None)
