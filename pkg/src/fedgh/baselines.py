"""Reference algorithms: Standalone, FedAvg and LG-FedAvg (header averaging)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import accounting
from .accounting import CostLedger
from .config import ExperimentConfig, stream
from .engine import (
    GlobalHeader,
    RunResult,
    build_clients,
    build_model,
    local_steps,
    local_train,
    round_metrics,
    run_fedgh,
    select_clients,
    splice_global_header,
)
from .errors import ConfigError, InputError
from .nn import PredictionHeader, SplitModel, param_count


class PreconditionError(ConfigError):
    """The algorithm cannot run on these models (e.g. FedAvg on heterogeneous ones)."""


@dataclass(frozen=True)
class AggregationWeight:
    client_id: int
    weight: float


def aggregation_weights(clients) -> list[AggregationWeight]:
    """n_k / n over the given clients, n_k being the train-split size."""
    sizes = [c.n_train for c in clients]
    total = sum(sizes)
    if total == 0:
        raise InputError("no training samples among participants")
    return [AggregationWeight(c.client_id, n / total) for c, n in zip(clients, sizes)]


def _check_weights(weights, count):
    if len(weights) != count:
        raise InputError(f"{len(weights)} weights for {count} models")
    if any(w.weight <= 0 for w in weights):
        raise InputError("aggregation weights must be positive")
    if abs(sum(w.weight for w in weights) - 1.0) > 1e-12:
        raise InputError("aggregation weights must sum to 1")


def _weighted_params(param_lists, weights) -> list[np.ndarray]:
    shapes = [tuple(p.shape for p in ps) for ps in param_lists]
    if len(set(shapes)) != 1:
        raise PreconditionError("models are structurally different; averaging needs homogeneous models")
    out = [np.zeros_like(p) for p in param_lists[0]]
    for ps, w in zip(param_lists, weights):
        for acc, p in zip(out, ps):
            acc += w.weight * p
    return out


def _load(component, values):
    for p, v in zip(component.parameters(), values):
        p[...] = v


def fedavg_aggregate(models: list[SplitModel], weights: list[AggregationWeight]) -> SplitModel:
    _check_weights(weights, len(models))
    result = models[0].copy()
    _load(result, _weighted_params([m.parameters() for m in models], weights))
    return result


def aggregate_headers(headers: list[PredictionHeader],
                      weights: list[AggregationWeight]) -> PredictionHeader:
    _check_weights(weights, len(headers))
    result = headers[0].copy()
    _load(result, _weighted_params([h.parameters() for h in headers], weights))
    return result


def run_standalone(config: ExperimentConfig, observer=None) -> RunResult:
    """Local training only; one "round" is E local epochs on the selected clients."""
    return run_fedgh(config, observer=observer, communicate=False)


def run_fedavg(config: ExperimentConfig, observer=None) -> RunResult:
    """Broadcast global model, train locally, average by n_k / n.

    Accuracy each round is the global model's accuracy on every client's test split.
    """
    config.validate()
    if not config.homogeneous():
        raise PreconditionError("fedavg requires homogeneous models (the same hidden_sizes for every client)")
    clients = build_clients(config)
    global_model = build_model(config, config.client_hidden(0), stream(config.seed, "init-server"))
    bits = accounting.fedavg_roundtrip_bits(param_count(global_model))
    select_rng = stream(config.seed, "selection")
    ledger = CostLedger()
    metrics = []

    for t in range(config.rounds):
        selected = select_clients(select_rng, config.n_clients, config.k_selected)
        cost = ledger.open_round()
        losses = []
        for k in selected:
            client = clients[k]
            client.model = global_model.copy()
            losses.append(local_train(client, config.epochs, config.batch, config.eta_omega))
            cost.client_sgd_steps += local_steps(client.n_train, config.epochs, config.batch)
            cost.downlink[k] = bits // 2
            cost.uplink[k] = bits // 2
        participants = [clients[k] for k in selected]
        global_model = fedavg_aggregate([c.model for c in participants],
                                        aggregation_weights(participants))
        if observer is not None:
            observer("server_done", round=t, global_model=global_model, clients=clients)
        ledger.close_round()
        metrics.append(round_metrics(t, [global_model] * len(clients), clients, losses, cost,
                                     ledger, selected))
    return RunResult(metrics, clients, ledger, global_model=global_model)


def run_lgfedavg(config: ExperimentConfig, observer=None) -> RunResult:
    """Share only the header: average uploaded headers by n_k / n, splice next round."""
    config.validate()
    clients = build_clients(config)
    header_bits = accounting.fedgh_downlink_bits(param_count(clients[0].model.header))
    select_rng = stream(config.seed, "selection")
    global_header = None
    ledger = CostLedger()
    metrics = []

    for t in range(config.rounds):
        selected = select_clients(select_rng, config.n_clients, config.k_selected)
        cost = ledger.open_round()
        losses = []
        for k in selected:
            client = clients[k]
            if global_header is not None:
                splice_global_header(client, global_header)
                cost.downlink[k] = header_bits
            losses.append(local_train(client, config.epochs, config.batch, config.eta_omega))
            cost.client_sgd_steps += local_steps(client.n_train, config.epochs, config.batch)
            cost.uplink[k] = header_bits
        participants = [clients[k] for k in selected]
        header = aggregate_headers([c.model.header for c in participants],
                                   aggregation_weights(participants))
        global_header = GlobalHeader(header, t + 1)
        if observer is not None:
            observer("server_done", round=t, global_header=global_header, clients=clients)
        ledger.close_round()
        metrics.append(round_metrics(t, [c.model for c in clients], clients, losses, cost,
                                     ledger, selected))
    return RunResult(metrics, clients, ledger, global_header=global_header)
