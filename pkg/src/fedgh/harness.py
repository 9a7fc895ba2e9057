"""Experiment runner and command-line entry point.

Usage::

    fedgh run   --config exp.yaml --algo fedgh --seed 3 --out runs/
    fedgh sweep --config exp.yaml --param eta_theta --values 0.001,0.01,0.1 --out sweeps/

Exit codes: 0 success, 2 validation error, 3 runtime or protocol error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .baselines import run_fedavg, run_lgfedavg, run_standalone
from .config import ExperimentConfig, load_config
from .data import partition_manifest
from .engine import RoundMetrics, build_partitions, run_fedgh
from .errors import ConfigError, FedGHError

log = logging.getLogger(__name__)

ALGORITHMS = {
    "fedgh": run_fedgh,
    "standalone": run_standalone,
    "fedavg": run_fedavg,
    "lg-fedavg": run_lgfedavg,
}

SWEEP_PARAMS = {"eta_theta": float, "classes_per_client": int, "participation": float}
SWEEP_ALIASES = {"C": "participation"}

BASE_COLUMNS = ["round", "avg_test_acc", "mean_train_loss", "uplink_bits", "downlink_bits", "cum_bits"]


def csv_columns(n_clients: int) -> list[str]:
    return BASE_COLUMNS + [f"acc_{k}" for k in range(n_clients)]


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_metrics_csv(path, metrics: list[RoundMetrics], n_clients: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_columns(n_clients))
        for m in metrics:
            writer.writerow([m.round, _fmt(m.avg_test_acc), _fmt(m.mean_train_loss),
                             m.uplink_bits, m.downlink_bits, m.cum_bits,
                             *(_fmt(a) for a in m.client_acc)])


def run_algorithm(config: ExperimentConfig, algo: str):
    try:
        runner = ALGORITHMS[algo]
    except KeyError:
        raise ConfigError(f"algo: unknown algorithm {algo!r}; choose from {sorted(ALGORITHMS)}") from None
    return runner(config)


def run_experiment(config: ExperimentConfig, algo: str, out_dir) -> Path:
    """Run one algorithm; write ``<algo>_metrics.csv`` and ``<algo>_manifest.json``."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_algorithm(config, algo)
    csv_path = out / f"{algo}_metrics.csv"
    write_metrics_csv(csv_path, result.metrics, config.n_clients)
    manifest = {
        "algo": algo,
        "seed": config.seed,
        "config": config.to_dict(),
        "partition": partition_manifest(build_partitions(config)).splitlines(),
        "columns": csv_columns(config.n_clients),
    }
    (out / f"{algo}_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("%s: %d rounds -> %s", algo, len(result.metrics), csv_path)
    return csv_path


def sweep(config: ExperimentConfig, parameter: str, values, out_dir, algo: str = "fedgh") -> Path:
    """One run per value of ``parameter``, same seed; returns the path of ``sweep_index.csv``."""
    name = SWEEP_ALIASES.get(parameter, parameter)
    if name not in SWEEP_PARAMS:
        raise ConfigError(f"parameter: cannot sweep {parameter!r}; choose from "
                          f"{sorted(SWEEP_PARAMS) + sorted(SWEEP_ALIASES)}")
    values = list(values)
    if not values:
        raise ConfigError("values: sweep needs at least one value")
    cast = SWEEP_PARAMS[name]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for v in values:
        v = cast(v)
        cfg = config.replace(**{name: v}).validate()
        path = run_experiment(cfg, algo, out / f"{name}={v}")
        rows.append((v, path.relative_to(out).as_posix()))
    index = out / "sweep_index.csv"
    with open(index, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name, "metrics_path"])
        writer.writerows(rows)
    return index


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedgh", description="Heterogeneous federated learning simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="flat YAML config file")
        sp.add_argument("--algo", default="fedgh", choices=sorted(ALGORITHMS))
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default="runs", help="output directory")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="run one experiment"))
    sw = sub.add_parser("sweep", help="run one experiment per parameter value")
    common(sw)
    sw.add_argument("--param", required=True, help="eta_theta, classes_per_client or C")
    sw.add_argument("--values", required=True, help="comma-separated values")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.replace(seed=args.seed).validate()
        if args.command == "run":
            path = run_experiment(config, args.algo, args.out)
        else:
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            path = sweep(config, args.param, values, args.out, algo=args.algo)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (FedGHError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
