"""Model-heterogeneous federated learning with a server-trained global header."""

from .accounting import co_to_target, fedavg_roundtrip_bits, fedgh_downlink_bits, fedgh_uplink_bits
from .baselines import run_fedavg, run_lgfedavg, run_standalone
from .config import ExperimentConfig, load_config
from .engine import RoundMetrics, run_fedgh
from .errors import ConfigError, InputError, ProtocolError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "InputError",
    "ProtocolError",
    "RoundMetrics",
    "co_to_target",
    "fedavg_roundtrip_bits",
    "fedgh_downlink_bits",
    "fedgh_uplink_bits",
    "load_config",
    "run_fedavg",
    "run_fedgh",
    "run_lgfedavg",
    "run_standalone",
]
