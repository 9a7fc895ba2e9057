"""Experiment configuration, its flat YAML file format, and seeded RNG streams."""

from __future__ import annotations

import dataclasses
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError


@dataclass
class ExperimentConfig:
    """All knobs of one run.

    Defaults: ``eta_omega = eta_theta = 0.01`` and plain SGD; ``epochs=10`` and
    ``batch=32`` are points of the usual E in {1, 10, 30, 50, 100} and
    B in {32, ..., 512} tuning grids. ``hidden_sizes`` is either one list of
    hidden widths shared by every client or a list of such lists assigned to
    clients cyclically (client k gets entry ``k % len``).
    """

    n_clients: int = 10
    participation: float = 1.0
    rounds: int = 50
    epochs: int = 10
    batch: int = 32
    eta_omega: float = 0.01
    eta_theta: float = 0.01
    input_dim: int = 16
    rep_dim: int = 16
    num_classes: int = 10
    classes_per_client: int = 2
    per_class_samples: int = 200
    blob_spread: float = 1.0
    center_scale: float = 2.0
    hidden_sizes: list = field(default_factory=lambda: [[32], [64, 32], [16], [48], [24, 24]])
    header_hidden: list = field(default_factory=list)
    server_batch: bool = False
    seed: int = 0

    @property
    def k_selected(self) -> int:
        # round half up, so C*N = 2.5 selects 3 clients
        return int(math.floor(self.participation * self.n_clients + 0.5))

    def client_hidden(self, client_id: int) -> list[int]:
        hs = self.hidden_sizes
        if not hs or isinstance(hs[0], int):
            return list(hs)
        return list(hs[client_id % len(hs)])

    def homogeneous(self) -> bool:
        return len({tuple(self.client_hidden(k)) for k in range(self.n_clients)}) == 1

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> ExperimentConfig:
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        for name in ("n_clients", "rounds", "epochs", "batch", "input_dim", "rep_dim",
                     "num_classes", "classes_per_client", "per_class_samples", "seed"):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool), name, f"must be an integer, got {v!r}")
        for name in ("participation", "eta_omega", "eta_theta", "blob_spread", "center_scale"):
            v = getattr(self, name)
            need(isinstance(v, (int, float)) and not isinstance(v, bool), name, f"must be a number, got {v!r}")
        need(self.n_clients >= 1, "n_clients", "must be >= 1")
        need(0 < self.participation <= 1, "participation", "must lie in (0, 1]")
        need(self.k_selected >= 1, "participation",
             f"round({self.participation} * {self.n_clients}) selects no clients")
        need(self.rounds >= 0, "rounds", "must be >= 0")
        need(self.epochs >= 1, "epochs", "must be >= 1")
        need(self.batch >= 1, "batch", "must be >= 1")
        need(self.eta_omega >= 0, "eta_omega", "must be >= 0")
        need(self.eta_theta >= 0, "eta_theta", "must be >= 0")
        need(self.input_dim >= 1, "input_dim", "must be >= 1")
        need(self.rep_dim >= 1, "rep_dim", "must be >= 1")
        need(self.num_classes >= 2, "num_classes", "must be >= 2")
        need(1 <= self.classes_per_client <= self.num_classes, "classes_per_client",
             f"must lie in [1, num_classes={self.num_classes}]")
        need(self.n_clients * self.classes_per_client >= self.num_classes, "classes_per_client",
             f"{self.n_clients} clients x {self.classes_per_client} classes cannot cover "
             f"{self.num_classes} classes")
        need(self.per_class_samples >= 10, "per_class_samples", "must be >= 10")
        need(self.blob_spread > 0, "blob_spread", "must be > 0")
        need(self.center_scale > 0, "center_scale", "must be > 0")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(isinstance(self.server_batch, bool), "server_batch", "must be true or false")
        need(isinstance(self.hidden_sizes, list), "hidden_sizes", "must be a list")
        hs = self.hidden_sizes
        groups = [hs] if not hs or isinstance(hs[0], int) else hs
        for g in groups:
            need(isinstance(g, list) and all(isinstance(h, int) and h >= 1 for h in g),
                 "hidden_sizes", f"entries must be lists of positive integers, got {g!r}")
        need(isinstance(self.header_hidden, list)
             and all(isinstance(h, int) and h >= 1 for h in self.header_hidden),
             "header_hidden", "must be a list of positive integers")
        return self


CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


def config_from_dict(raw: dict) -> ExperimentConfig:
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    raw = dict(raw)
    for name in ("participation", "eta_omega", "eta_theta", "blob_spread", "center_scale"):
        if isinstance(raw.get(name), int) and not isinstance(raw.get(name), bool):
            raw[name] = float(raw[name])
    return ExperimentConfig(**raw).validate()


def load_config(path) -> ExperimentConfig:
    """Read a flat ``key: value`` YAML file. Omitted keys take their defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a flat key/value mapping")
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ConfigError(f"{key}: nested mappings are not allowed")
    return config_from_dict(raw)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for a named consumer of the master seed.

    Streams are keyed by (seed, crc32(name), *keys), so adding a new consumer
    never shifts the draws of an existing one.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode()), *keys]))
