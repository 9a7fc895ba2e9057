"""Communication-bit accounting.

Every transmitted scalar (parameter, representation entry or class label) is
charged 32 bits. No compression or framing overhead is modelled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

BITS_PER_SCALAR = 32


def fedgh_uplink_bits(num_classes_uploaded: int, rep_dim: int) -> int:
    """Bits for S class labels plus S averaged representations of length r."""
    s, r = num_classes_uploaded, rep_dim
    if s < 0 or r < 1:
        raise ValueError("need S >= 0 and r >= 1")
    return (s + s * r) * BITS_PER_SCALAR


def fedgh_downlink_bits(header_params: int) -> int:
    if header_params < 0:
        raise ValueError("header_params must be non-negative")
    return header_params * BITS_PER_SCALAR


def fedavg_roundtrip_bits(model_params: int) -> int:
    """Full model down to the client and back up."""
    if model_params < 0:
        raise ValueError("model_params must be non-negative")
    return 2 * model_params * BITS_PER_SCALAR


@dataclass
class RoundCost:
    uplink: dict[int, int] = field(default_factory=dict)  # client_id -> bits
    downlink: dict[int, int] = field(default_factory=dict)
    server_header_steps: int = 0
    client_sgd_steps: int = 0

    @property
    def uplink_bits(self) -> int:
        return sum(self.uplink.values())

    @property
    def downlink_bits(self) -> int:
        return sum(self.downlink.values())

    @property
    def total_bits(self) -> int:
        return self.uplink_bits + self.downlink_bits


class CostLedger:
    """Per-round, per-client bit counters with exact integer running totals."""

    def __init__(self):
        self.rounds: list[RoundCost] = []
        self.cum_uplink = 0
        self.cum_downlink = 0
        self.cum_server_header_steps = 0
        self.cum_client_sgd_steps = 0

    def open_round(self) -> RoundCost:
        cost = RoundCost()
        self.rounds.append(cost)
        return cost

    def close_round(self):
        cost = self.rounds[-1]
        for v in (*cost.uplink.values(), *cost.downlink.values(),
                  cost.server_header_steps, cost.client_sgd_steps):
            if v < 0:
                raise ValueError("negative cost entry")
        self.cum_uplink += cost.uplink_bits
        self.cum_downlink += cost.downlink_bits
        self.cum_server_header_steps += cost.server_header_steps
        self.cum_client_sgd_steps += cost.client_sgd_steps

    @property
    def cum_bits(self) -> int:
        return self.cum_uplink + self.cum_downlink


def co_to_target(metrics, target_acc: float):
    """First round reaching ``target_acc`` and the bits spent through it.

    Returns ``(rounds_used, total_bits)`` where ``rounds_used`` counts rounds
    (1-based), or ``None`` if the target is never reached.
    """
    total = 0
    for i, m in enumerate(metrics):
        total += m.uplink_bits + m.downlink_bits
        if m.avg_test_acc >= target_acc:
            return i + 1, total
    return None
