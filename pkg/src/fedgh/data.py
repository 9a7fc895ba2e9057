"""Synthetic labelled data and the class-restricted non-IID partitioner."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class Dataset:
    features: np.ndarray  # (n, d_x)
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ConfigError("features must be (n, d_x) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels))


@dataclass
class ClientPartition:
    client_id: int
    train: Dataset
    eval: Dataset
    test: Dataset
    classes_held: frozenset[int]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.eval), len(self.test)


def generate_blobs(
    num_classes: int,
    d_x: int,
    per_class: int,
    spread: float,
    seed: int | np.random.Generator,
    center_scale: float | None = None,
    max_tries: int = 1000,
) -> Dataset:
    """Isotropic Gaussian blobs, one per class.

    Centers are drawn from N(0, center_scale^2 I) and re-drawn until every pair
    is at least ``4 * spread`` apart. ``center_scale`` defaults to ``4 * spread``.
    Samples are ordered by class.
    """
    if num_classes < 2:
        raise ConfigError("num_classes must be >= 2")
    if per_class < 10:
        raise ConfigError("per_class must be >= 10")
    if spread <= 0:
        raise ConfigError("spread must be positive")
    rng = np.random.default_rng(seed)
    min_sep = 4.0 * spread
    if center_scale is None:
        center_scale = min_sep
    for _ in range(max_tries):
        centers = rng.normal(0.0, center_scale, size=(num_classes, d_x))
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        dist[np.diag_indices(num_classes)] = np.inf
        if dist.min() >= min_sep:
            break
    else:
        raise ConfigError(
            f"could not place {num_classes} centers {min_sep:g} apart in {max_tries} tries; "
            "lower blob_spread or raise center_scale"
        )
    noise = rng.normal(0.0, spread, size=(num_classes, per_class, d_x))
    features = (centers[:, None, :] + noise).reshape(-1, d_x)
    labels = np.repeat(np.arange(num_classes), per_class)
    return Dataset(features, labels, num_classes)


def assign_classes(
    num_clients: int,
    num_classes: int,
    classes_per_client: int,
    rng: np.random.Generator,
    max_tries: int = 1000,
) -> list[list[int]]:
    """Draw ``classes_per_client`` distinct classes per client until all classes are covered."""
    if not 1 <= classes_per_client <= num_classes:
        raise ConfigError(f"classes_per_client must be in [1, {num_classes}]")
    if num_clients * classes_per_client < num_classes:
        raise ConfigError(
            f"{num_clients} clients x {classes_per_client} classes cannot cover {num_classes} classes"
        )
    for _ in range(max_tries):
        held = [
            sorted(int(c) for c in rng.choice(num_classes, classes_per_client, replace=False))
            for _ in range(num_clients)
        ]
        if len({c for h in held for c in h}) == num_classes:
            return held
    raise ConfigError(f"class assignment failed to cover all classes after {max_tries} draws")


def split_811(data: Dataset, rng: np.random.Generator) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle then contiguous train/eval/test split; eval and test get floor(n/10)."""
    n = len(data)
    if n < 10:
        raise ConfigError(f"need at least 10 samples to split 8:1:1, got {n}")
    order = rng.permutation(n)
    n_small = n // 10
    n_train = n - 2 * n_small
    return (
        data.subset(order[:n_train]),
        data.subset(order[n_train : n_train + n_small]),
        data.subset(order[n_train + n_small :]),
    )


def partition_noniid(
    dataset: Dataset,
    num_clients: int,
    classes_per_client: int,
    seed: int | np.random.Generator,
    split_seed: int | np.random.Generator | None = None,
) -> list[ClientPartition]:
    """Give each client ``classes_per_client`` classes, then split each client 8:1:1.

    A class's samples are dealt evenly among the clients that hold it, with the
    remainder going to the lowest client ids. Sample order within a class is
    shuffled first.
    """
    rng = np.random.default_rng(seed)
    split_rng = rng if split_seed is None else np.random.default_rng(split_seed)
    held = assign_classes(num_clients, dataset.num_classes, classes_per_client, rng)

    owned: list[list[int]] = [[] for _ in range(num_clients)]
    for c in range(dataset.num_classes):
        holders = [k for k in range(num_clients) if c in held[k]]
        idx = rng.permutation(np.flatnonzero(dataset.labels == c))
        for k, chunk in zip(holders, np.array_split(idx, len(holders))):
            owned[k].extend(int(i) for i in chunk)

    parts = []
    for k in range(num_clients):
        local = dataset.subset(sorted(owned[k]))
        train, ev, test = split_811(local, split_rng)
        parts.append(ClientPartition(k, train, ev, test, frozenset(held[k])))
    return parts


def partition_manifest(parts: list[ClientPartition]) -> str:
    """One tab-separated line per client: id, held classes, train/eval/test sizes."""
    lines = ["client_id\tclasses_held\ttrain\teval\ttest"]
    for p in parts:
        classes = ",".join(str(c) for c in sorted(p.classes_held))
        lines.append(f"{p.client_id}\t{classes}\t" + "\t".join(str(s) for s in p.sizes()))
    return "\n".join(lines) + "\n"
