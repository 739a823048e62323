"""
Link gains and achievable rates.

Three link families exist in the network:

    vehicle -> RSU          ground-to-ground NLoS, log-normal shadowing
    vehicle -> LUAV         air LoS
    vehicle -> HUAV -> x    two LoS hops, x an RSU (not the direct one) or the BS

Gains follow beta0 * xi / d^alpha and every rate is the Shannon rate
B * log2(1 + P * h / Pn).

Within a slot positions are static, so SlotChannel samples the shadowing of
every vehicle-RSU pair once per slot (block fading) and answers rate queries
for the scheduler and the cost evaluation. Bandwidth is shared equally by the
vehicles sending to the same node; callers pass the number of sharers.

Example:
    >>> from hivec.services.channel import los_gain, link_rate
    >>> h = los_gain(100.0, beta0=1e-5, alpha2=2.0)
    >>> link_rate(1e6, 0.1, h, 1e-14)
    13287856.641840...

See Also:
    - hivec.services.scheduler: Sizes allocations from estimated rates
    - hivec.services.cost: Turns rates into delay and energy
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from hivec.domain import Mode, NodeKind, NodeState

if TYPE_CHECKING:
    from hivec.config import SimConfig

logger = logging.getLogger("hivec.channel")


# =============================================================================
# Exceptions
# =============================================================================


class ChannelError(Exception):
    """Base exception for all channel-model errors."""

    pass


class DegenerateGeometryError(ChannelError):
    """Raised when a gain is requested for co-located nodes (d <= 0)."""

    pass


class InvalidNoiseError(ChannelError):
    """Raised when the noise power is not strictly positive."""

    pass


class InvalidRelayTargetError(ChannelError):
    """Raised when a relay targets the vehicle's own direct RSU."""

    pass


# =============================================================================
# Data Classes
# =============================================================================


@dataclass(frozen=True)
class LinkBudget:
    """
    One evaluated link.

    Attributes:
        gain: Linear channel gain h.
        bandwidth: B in Hz.
        tx_power: P in watts.
        noise: Pn in watts.
        rate: Achievable rate in bits/s.
    """

    gain: float
    bandwidth: float
    tx_power: float
    noise: float
    rate: float


# =============================================================================
# Gain and Rate Functions
# =============================================================================


def g2g_gain(d: float, beta0: float, alpha1: float, xi: float) -> float:
    """
    NLoS ground-to-ground gain h = beta0 * xi / d^alpha1.

    Raises:
        DegenerateGeometryError: If d <= 0.
        ChannelError: If the shadowing sample xi is not positive.
    """
    if d <= 0:
        raise DegenerateGeometryError(f"Ground link distance must be > 0, got {d}")
    if xi <= 0:
        raise ChannelError(f"Shadowing sample must be > 0, got {xi}")
    return beta0 * xi / d**alpha1


def sample_shadowing(mu_db: float, sigma_db: float, rng: np.random.Generator) -> float:
    """
    Draw one log-normal shadowing factor 10^(g/10), g ~ Normal(mu_db, sigma_db^2).

    A zero sigma returns exactly 10^(mu_db/10).
    """
    if sigma_db < 0:
        raise ChannelError(f"Shadowing sigma must be >= 0, got {sigma_db}")
    g = rng.normal(mu_db, sigma_db)
    return float(10.0 ** (g / 10.0))


def los_gain(d: float, beta0: float, alpha2: float) -> float:
    """
    LoS air gain h = beta0 / d^alpha2.

    Raises:
        DegenerateGeometryError: If d <= 0.
    """
    if d <= 0:
        raise DegenerateGeometryError(f"Air link distance must be > 0, got {d}")
    return beta0 / d**alpha2


def link_rate(bandwidth: float, tx_power: float, gain: float, noise: float) -> float:
    """
    Shannon rate R = B * log2(1 + P * h / Pn) in bits/s.

    Raises:
        InvalidNoiseError: If noise <= 0.
        ChannelError: If bandwidth, power or gain is negative.
    """
    if noise <= 0:
        raise InvalidNoiseError(f"Noise power must be > 0, got {noise}")
    if bandwidth < 0 or tx_power < 0 or gain < 0:
        raise ChannelError("Bandwidth, transmit power and gain must be >= 0")
    return bandwidth * math.log2(1.0 + tx_power * gain / noise)


def link_budget(
    bandwidth: float, tx_power: float, gain: float, noise: float
) -> LinkBudget:
    """Evaluate a link and keep every term of the budget."""
    return LinkBudget(
        gain=gain,
        bandwidth=bandwidth,
        tx_power=tx_power,
        noise=noise,
        rate=link_rate(bandwidth, tx_power, gain, noise),
    )


def distance(a: Sequence[float], b: Sequence[float], min_distance: float = 0.0) -> float:
    """3-D Euclidean distance, clamped from below to ``min_distance``."""
    d = float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    return max(d, min_distance)


def relay_pair_rates(
    p_vehicle: Sequence[float],
    p_huav: Sequence[float],
    p_target: Sequence[float],
    cfg: "SimConfig",
    *,
    target_id: Optional[str] = None,
    direct_rsu_id: Optional[str] = None,
    access_bandwidth: Optional[float] = None,
    backhaul_bandwidth: Optional[float] = None,
) -> tuple[float, float]:
    """
    Rates of the two relay hops vehicle -> HUAV and HUAV -> target.

    Hop 1 uses the vehicle's transmit power, hop 2 the HUAV's. Both hops are
    LoS. Bandwidths default to the configured HUAV totals.

    Raises:
        InvalidRelayTargetError: If the target is the vehicle's direct RSU.
    """
    if target_id is not None and target_id == direct_rsu_id:
        raise InvalidRelayTargetError(
            f"Relay target {target_id} is the vehicle's direct RSU"
        )
    ch = cfg.channel
    b1 = ch.bandwidth_huav_access if access_bandwidth is None else access_bandwidth
    b2 = ch.bandwidth_huav_backhaul if backhaul_bandwidth is None else backhaul_bandwidth

    h1 = los_gain(distance(p_vehicle, p_huav, ch.min_distance), ch.beta0, ch.alpha_los)
    h2 = los_gain(distance(p_huav, p_target, ch.min_distance), ch.beta0, ch.alpha_los)
    r1 = link_rate(b1, ch.vehicle_tx_power, h1, ch.noise_power)
    r2 = link_rate(b2, ch.huav_tx_power, h2, ch.noise_power)
    return r1, r2


# =============================================================================
# Per-slot Channel State
# =============================================================================


class SlotChannel:
    """
    Channel state of one slot: positions plus sampled shadowing.

    Attributes:
        cfg: Validated configuration.
        vehicle_positions: (I, 3) array of vehicle positions.
        nodes: Computing nodes by id (RSUs, LUAVs, BS).
        huav_position: HUAV position.
        shadowing: (I, R) linear shadowing factors of vehicle-RSU links.

    Example:
        >>> chan = SlotChannel(cfg, vehicle_positions, nodes, huav_pos, rng)
        >>> chan.direct_rate(0, "rsu-1", sharers=3)
        >>> chan.relay_rates(0, "bs", sharers=2)
    """

    def __init__(
        self,
        cfg: "SimConfig",
        vehicle_positions: np.ndarray,
        nodes: dict[str, NodeState],
        huav_position: np.ndarray,
        rng: np.random.Generator,
    ) -> None:
        self.cfg = cfg
        self.vehicle_positions = np.asarray(vehicle_positions, dtype=float)
        self.nodes = nodes
        self.huav_position = np.asarray(huav_position, dtype=float)
        self._rsu_ids = sorted(
            (n.node_id for n in nodes.values() if n.kind is NodeKind.RSU),
            key=_node_index,
        )
        ch = cfg.channel
        self.shadowing = np.array(
            [
                [
                    sample_shadowing(ch.shadow_mu_db, ch.shadow_sigma_db, rng)
                    for _ in self._rsu_ids
                ]
                for _ in range(len(self.vehicle_positions))
            ]
        ).reshape(len(self.vehicle_positions), len(self._rsu_ids))
        self._rsu_column = {rid: j for j, rid in enumerate(self._rsu_ids)}

    def distance_to(self, vehicle_id: int, node_id: str) -> float:
        """Clamped 3-D distance between a vehicle and a node."""
        return distance(
            self.vehicle_positions[vehicle_id],
            self.nodes[node_id].position,
            self.cfg.channel.min_distance,
        )

    def direct_rsu(self, vehicle_id: int) -> str:
        """Nearest RSU, the vehicle's direct RSU (ties go to the lower index)."""
        return min(self._rsu_ids, key=lambda rid: (self.distance_to(vehicle_id, rid),
                                                    _node_index(rid)))

    def direct_rate(self, vehicle_id: int, node_id: str, sharers: int = 1) -> float:
        """Uplink rate from a vehicle to an RSU or LUAV with ``sharers`` users."""
        ch = self.cfg.channel
        node = self.nodes[node_id]
        d = self.distance_to(vehicle_id, node_id)
        share = max(sharers, 1)
        if node.kind is NodeKind.RSU:
            xi = float(self.shadowing[vehicle_id, self._rsu_column[node_id]])
            h = g2g_gain(d, ch.beta0, ch.alpha_nlos, xi)
            bandwidth = ch.bandwidth_rsu / share
        elif node.kind is NodeKind.LUAV:
            h = los_gain(d, ch.beta0, ch.alpha_los)
            bandwidth = ch.bandwidth_luav / share
        else:
            raise ChannelError(f"No direct link from a vehicle to {node_id}")
        return link_rate(bandwidth, ch.vehicle_tx_power, h, ch.noise_power)

    def relay_rates(
        self, vehicle_id: int, node_id: str, sharers: int = 1
    ) -> tuple[float, float]:
        """Both relay hop rates towards ``node_id`` with ``sharers`` relay users."""
        ch = self.cfg.channel
        share = max(sharers, 1)
        return relay_pair_rates(
            self.vehicle_positions[vehicle_id],
            self.huav_position,
            self.nodes[node_id].position,
            self.cfg,
            target_id=node_id,
            direct_rsu_id=self.direct_rsu(vehicle_id),
            access_bandwidth=ch.bandwidth_huav_access / share,
            backhaul_bandwidth=ch.bandwidth_huav_backhaul / share,
        )

    def transmission_delay(
        self, mode: Mode, vehicle_id: int, node_id: str, bits: float, sharers: int = 1
    ) -> float:
        """Seconds needed to move ``bits`` to ``node_id`` under ``mode``."""
        if bits <= 0:
            return 0.0
        if mode in (Mode.HUAV_RSU, Mode.HUAV_BS):
            r1, r2 = self.relay_rates(vehicle_id, node_id, sharers)
            if r1 <= 0 or r2 <= 0:
                return math.inf
            return bits / r1 + bits / r2
        rate = self.direct_rate(vehicle_id, node_id, sharers)
        return bits / rate if rate > 0 else math.inf


def _node_index(node_id: str) -> int:
    """Numeric suffix of ids like "rsu-3"; 0 for ids without one."""
    _, _, suffix = node_id.rpartition("-")
    return int(suffix) if suffix.isdigit() else 0
