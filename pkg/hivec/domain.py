"""
Domain types, units and the random-generation substrate for hivec.

Every other module speaks in these types. They are plain dataclasses holding
SI scalars (metres, seconds, watts, joules, hertz, bits, cycles); there is no
unit library, units are documented on each field.

Offloading modes are indexed in a fixed order that every vector in the
package follows:

    0 LOCAL | 1 RSU | 2 LUAV | 3 HUAV_RSU | 4 HUAV_BS

Example:
    >>> from hivec.domain import Mode, Task, db_to_linear
    >>> task = Task(vehicle_id=0, size=2e6, cycles=2e8, deadline=0.5, priority=3)
    >>> db_to_linear(-50.0)
    1e-05
"""

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

import numpy as np


# =============================================================================
# Units
# =============================================================================


def db_to_linear(x_db: float) -> float:
    """Convert a power ratio in dB to a linear ratio: 10^(x/10)."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    """Convert a positive linear power ratio to dB."""
    return 10.0 * math.log10(x)


def dbm_to_watts(x_dbm: float) -> float:
    """Convert an absolute power in dBm to watts (-110 dBm -> 1e-14 W)."""
    return db_to_linear(x_dbm) / 1000.0


def make_rng(seed: int, instance: int = 0) -> np.random.Generator:
    """
    Create the random generator owned by one simulator instance.

    Instances running side by side (seed sweeps, parallel cells) each get
    their own generator seeded from ``seed + instance`` and never share one.
    """
    return np.random.default_rng(seed + instance)


# =============================================================================
# Enumerations
# =============================================================================


class Mode(IntEnum):
    """Offloading modes, valued by their index in every 5-vector."""

    LOCAL = 0
    RSU = 1
    LUAV = 2
    HUAV_RSU = 3
    HUAV_BS = 4


NUM_MODES = len(Mode)

REMOTE_MODES: tuple[Mode, ...] = (Mode.RSU, Mode.LUAV, Mode.HUAV_RSU, Mode.HUAV_BS)

# Each mode falls back to its successor; LOCAL absorbs everything.
FALLBACK_CHAIN: tuple[Mode, ...] = (
    Mode.LUAV,
    Mode.RSU,
    Mode.HUAV_RSU,
    Mode.HUAV_BS,
    Mode.LOCAL,
)

RELAY_MODES: frozenset[Mode] = frozenset({Mode.HUAV_RSU, Mode.HUAV_BS})


def fallback_of(mode: Mode) -> Mode:
    """Return the mode that receives ``mode``'s mass when it cannot be placed."""
    if mode is Mode.LOCAL:
        return Mode.LOCAL
    return FALLBACK_CHAIN[FALLBACK_CHAIN.index(mode) + 1]


class NodeKind(str, Enum):
    """Kinds of nodes in the network."""

    VEHICLE = "vehicle"
    RSU = "rsu"
    LUAV = "luav"
    HUAV = "huav"
    BS = "bs"


# Node class that serves each remote mode.
MODE_NODE_KIND: dict[Mode, NodeKind] = {
    Mode.RSU: NodeKind.RSU,
    Mode.LUAV: NodeKind.LUAV,
    Mode.HUAV_RSU: NodeKind.RSU,
    Mode.HUAV_BS: NodeKind.BS,
}


# =============================================================================
# Data Classes
# =============================================================================


@dataclass(frozen=True)
class Task:
    """
    One vehicle's computation job for one slot.

    Attributes:
        vehicle_id: Index of the generating vehicle.
        size: Input data size D in bits.
        cycles: Required CPU cycles C.
        deadline: Maximum tolerable delay T^max in seconds.
        priority: Ordinal level K; larger is more urgent.
        arrival: Arrival order inside the slot (FIFO key).
    """

    vehicle_id: int
    size: float
    cycles: float
    deadline: float
    priority: int
    arrival: int = 0

    def __post_init__(self) -> None:
        if self.size <= 0 or self.cycles <= 0 or self.deadline <= 0:
            raise ValueError(
                f"Task for vehicle {self.vehicle_id} must have positive size, "
                f"cycles and deadline"
            )


@dataclass
class NodeState:
    """
    Position and resources of any node in the network.

    Attributes:
        node_id: Stable identifier such as "rsu-0", "luav-1", "bs", "huav".
        kind: Node class.
        position: (x, y, z) in metres; ground nodes keep z = 0.
        cpu_total: F^max in cycles/s (0 for the HUAV, which only relays).
        cpu_remaining: f^remain in cycles/s for the current slot.
        kappa: Effective switched capacitance.
        energy_remaining: Joules left in the budget (UAVs only).
        velocity: Current speed in m/s (vehicles and LUAVs).
        heading: Radians; LUAV heading or vehicle road direction.
        depleted: LUAV has landed after exhausting its budget.
    """

    node_id: str
    kind: NodeKind
    position: np.ndarray
    cpu_total: float = 0.0
    cpu_remaining: float = 0.0
    kappa: float = 0.0
    energy_remaining: Optional[float] = None
    velocity: float = 0.0
    heading: float = 0.0
    depleted: bool = False

    @property
    def remain_fraction(self) -> float:
        """Fraction f^remain / F^max, or 0 for nodes without CPU."""
        if self.cpu_total <= 0:
            return 0.0
        return self.cpu_remaining / self.cpu_total

    @property
    def is_ground(self) -> bool:
        return self.kind in (NodeKind.VEHICLE, NodeKind.RSU, NodeKind.BS)


@dataclass
class OffloadDecision:
    """
    Per-vehicle partial offloading decision.

    Attributes:
        vehicle_id: Index of the vehicle.
        ratios: 5-vector lambda over modes, summing to 1.
        targets: Resolved node id per remote mode (absent after fallback).
        allocations: CPU cycles/s granted at the target per remote mode.
    """

    vehicle_id: int
    ratios: np.ndarray
    targets: dict[Mode, str] = field(default_factory=dict)
    allocations: dict[Mode, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.ratios = np.asarray(self.ratios, dtype=float)

    @property
    def ratio_sum(self) -> float:
        return float(self.ratios.sum())


@dataclass(frozen=True)
class LuavControl:
    """
    Heading/speed command for one LUAV in one slot.

    Attributes:
        luav_id: Index of the LUAV.
        heading: q in [0, 2*pi) radians.
        speed: v in [0, v_max] m/s.
    """

    luav_id: int
    heading: float
    speed: float


@dataclass
class ConstraintViolations:
    """Per-slot counters of broken constraints and flagged tasks."""

    ratio_sum: int = 0
    node_capacity: int = 0
    luav_displacement: int = 0
    luav_energy: int = 0
    huav_energy: int = 0
    infeasible_tasks: int = 0

    def total(self) -> int:
        """Total of hard violations (infeasible tasks are only flagged)."""
        return (
            self.ratio_sum
            + self.node_capacity
            + self.luav_displacement
            + self.luav_energy
            + self.huav_energy
        )

    def as_dict(self) -> dict[str, int]:
        return {
            "ratio_sum": self.ratio_sum,
            "node_capacity": self.node_capacity,
            "luav_displacement": self.luav_displacement,
            "luav_energy": self.luav_energy,
            "huav_energy": self.huav_energy,
            "infeasible_tasks": self.infeasible_tasks,
        }


@dataclass
class SlotMetrics:
    """
    Aggregate outcome of one slot.

    Attributes:
        completion_rate: R^succ in [0, 1].
        total_delay: Sum over vehicles of T^total in seconds.
        system_energy: E^sys in joules.
        compute_energy: Sum over tasks of E^comp in joules.
        uav_energy: LUAV flight plus HUAV hover energy in joules.
        reward: Weighted slot reward.
        mode_mass: 5-vector of offloaded mass per mode (summed over vehicles).
        violations: Constraint counters.
        node_energy: Energy attributed per node id (vehicles, edge nodes, UAVs).
    """

    completion_rate: float
    total_delay: float
    system_energy: float
    compute_energy: float
    uav_energy: float
    reward: float
    mode_mass: np.ndarray = field(default_factory=lambda: np.zeros(NUM_MODES))
    violations: ConstraintViolations = field(default_factory=ConstraintViolations)
    node_energy: dict[str, float] = field(default_factory=dict)

    def as_record(self) -> dict[str, object]:
        """Plain-JSON view used by traces."""
        return {
            "completion_rate": self.completion_rate,
            "total_delay": self.total_delay,
            "system_energy": self.system_energy,
            "compute_energy": self.compute_energy,
            "uav_energy": self.uav_energy,
            "reward": self.reward,
            "mode_mass": [float(m) for m in self.mode_mass],
            "violations": self.violations.as_dict(),
        }


@dataclass(frozen=True)
class Transition:
    """(s, a, r, s', done) record stored in the replay buffer."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
