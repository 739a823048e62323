"""
Delay and energy of every offloading mode, UAV flight energy, slot metrics.

Per mode k with workload share lambda of a task (D bits, C cycles):

    LOCAL     T = lC/f_i                       E = eta_i f_i^3 T
    RSU/LUAV  T = lD/R + lC/f                  E = P_i lD/R + eta_x f^2 lC
    relay     T = lD/R1 + lD/R2 + lC/f         E = P_i lD/R1 + P_H lD/R2 + eta_x f^2 lC

A task finishes when its slowest mode finishes (max over modes). The slot
reward weighs completion rate against normalised total delay and system
energy:

    reward = w1 * R_succ - w2 * beta_T * sum(T_total) - w3 * beta_E * E_sys

Energy is charged for all attempted work, whether or not the task met its
deadline.

Example:
    >>> from hivec.domain import Task
    >>> from hivec.services.cost import local_cost
    >>> task = Task(vehicle_id=0, size=1e6, cycles=1e8, deadline=1.0, priority=1)
    >>> local_cost(1.0, task, f_i=0.5e9, eta_i=1e-28)
    ModeCost(mode=<Mode.LOCAL: 0>, delay=0.2, energy=0.0025, ...)

See Also:
    - hivec.services.channel: Rates consumed here
    - hivec.services.environment: Calls evaluate_decisions() and slot_metrics()
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from hivec.config import RotorParams
from hivec.domain import (
    NUM_MODES,
    RELAY_MODES,
    REMOTE_MODES,
    ConstraintViolations,
    Mode,
    OffloadDecision,
    SlotMetrics,
    Task,
)

if TYPE_CHECKING:
    from hivec.config import SimConfig
    from hivec.services.channel import SlotChannel

logger = logging.getLogger("hivec.cost")

HUAV_ID = "huav"


# =============================================================================
# Exceptions
# =============================================================================


class CostError(Exception):
    """Base exception for cost-model errors."""

    pass


class InvalidFrequencyError(CostError):
    """Raised when a local CPU frequency is not strictly positive."""

    pass


class InvalidSpeedError(CostError):
    """Raised when a UAV speed is negative."""

    pass


class UnreachableLinkError(CostError):
    """Raised when mass is sent over a link with zero rate or no target."""

    pass


class NoAllocationError(CostError):
    """Raised when mass is offloaded to a node that granted no CPU."""

    pass


# =============================================================================
# Data Classes
# =============================================================================


@dataclass(frozen=True)
class ModeCost:
    """
    Delay and energy of one mode of one task.

    Attributes:
        mode: Offloading mode.
        delay: Seconds.
        energy: Joules, all components.
        tx_energy: Part of ``energy`` spent by the vehicle's radio.
        relay_energy: Part of ``energy`` spent by the HUAV's radio.
    """

    mode: Mode
    delay: float
    energy: float
    tx_energy: float = 0.0
    relay_energy: float = 0.0

    @property
    def compute_energy(self) -> float:
        return self.energy - self.tx_energy - self.relay_energy


@dataclass
class TaskOutcome:
    """
    Evaluated outcome of one vehicle's task in one slot.

    Attributes:
        vehicle_id: Index of the vehicle.
        total_delay: Max over the mode delays.
        deadline: T^max of the task.
        costs: One ModeCost per mode, in mode order.
        mode_mass: Final 5-vector of offloaded shares.
        node_energy: Joules attributed per node id.
        infeasible: No placement could meet the deadline even with every CPU.
    """

    vehicle_id: int
    total_delay: float
    deadline: float
    costs: list[ModeCost]
    mode_mass: np.ndarray = field(default_factory=lambda: np.zeros(NUM_MODES))
    node_energy: dict[str, float] = field(default_factory=dict)
    infeasible: bool = False

    @property
    def energy(self) -> float:
        return sum(c.energy for c in self.costs)

    @property
    def completed(self) -> bool:
        return self.total_delay <= self.deadline


# =============================================================================
# Per-mode Costs
# =============================================================================


def _zero(mode: Mode) -> ModeCost:
    return ModeCost(mode=mode, delay=0.0, energy=0.0)


def local_cost(lam: float, task: Task, f_i: float, eta_i: float) -> ModeCost:
    """
    Cost of executing a share of the task on the vehicle's own CPU.

    Raises:
        InvalidFrequencyError: If f_i <= 0.
    """
    if f_i <= 0:
        raise InvalidFrequencyError(f"Local CPU frequency must be > 0, got {f_i}")
    if lam <= 0:
        return _zero(Mode.LOCAL)
    delay = lam * task.cycles / f_i
    return ModeCost(mode=Mode.LOCAL, delay=delay, energy=eta_i * f_i**3 * delay)


def edge_cost(
    lam: float,
    task: Task,
    rate: float,
    f_alloc: float,
    eta_x: float,
    p_i: float,
    mode: Mode = Mode.RSU,
) -> ModeCost:
    """
    Cost of a direct offload to an RSU or LUAV.

    Raises:
        UnreachableLinkError: If lam > 0 and rate <= 0.
        NoAllocationError: If lam > 0 and f_alloc <= 0.
    """
    if lam <= 0:
        return _zero(mode)
    if rate <= 0:
        raise UnreachableLinkError(f"{mode.name} link has zero rate")
    if f_alloc <= 0:
        raise NoAllocationError(f"{mode.name} node granted no CPU")
    tx_time = lam * task.size / rate
    cycles = lam * task.cycles
    tx_energy = p_i * tx_time
    return ModeCost(
        mode=mode,
        delay=tx_time + cycles / f_alloc,
        energy=tx_energy + eta_x * f_alloc**2 * cycles,
        tx_energy=tx_energy,
    )


def relay_cost(
    lam: float,
    task: Task,
    rate1: float,
    rate2: float,
    f_alloc: float,
    eta_x: float,
    p_i: float,
    p_h: float,
    mode: Mode = Mode.HUAV_BS,
) -> ModeCost:
    """
    Cost of a two-hop offload through the HUAV.

    Raises:
        UnreachableLinkError: If lam > 0 and either hop rate is <= 0.
        NoAllocationError: If lam > 0 and f_alloc <= 0.
    """
    if lam <= 0:
        return _zero(mode)
    if rate1 <= 0 or rate2 <= 0:
        raise UnreachableLinkError(f"{mode.name} relay hop has zero rate")
    if f_alloc <= 0:
        raise NoAllocationError(f"{mode.name} node granted no CPU")
    bits = lam * task.size
    hop1, hop2 = bits / rate1, bits / rate2
    cycles = lam * task.cycles
    tx_energy = p_i * hop1
    relay_energy = p_h * hop2
    return ModeCost(
        mode=mode,
        delay=hop1 + hop2 + cycles / f_alloc,
        energy=tx_energy + relay_energy + eta_x * f_alloc**2 * cycles,
        tx_energy=tx_energy,
        relay_energy=relay_energy,
    )


# =============================================================================
# UAV Energy
# =============================================================================


def propulsion_power(v: float, rp: RotorParams) -> float:
    """
    Rotary-wing propulsion power at forward speed v (m/s).

    Blade profile, parasite and induced terms:
        P_o (1 + 3v^2/U^2) + 0.5 d0 rho s A v^3
        + P_i (sqrt(1 + v^4 / (4 nu0^4)) - v^2 / (2 nu0^2))^0.5

    Raises:
        InvalidSpeedError: If v < 0.
    """
    if v < 0:
        raise InvalidSpeedError(f"Speed must be >= 0, got {v}")
    blade = rp.profile_power * (1.0 + 3.0 * v**2 / rp.tip_speed**2)
    parasite = 0.5 * rp.fuselage_drag * rp.air_density * rp.solidity * rp.disc_area * v**3
    x = v**2 / (2.0 * rp.induced_velocity**2)
    # sqrt(1 + x^2) - x rewritten as 1 / (sqrt(1 + x^2) + x), no cancellation
    induced = rp.induced_power * math.sqrt(1.0 / (math.sqrt(1.0 + x * x) + x))
    return blade + parasite + induced


def luav_fly_energy(v: float, rp: RotorParams, slot_len: float) -> float:
    """Joules a LUAV spends flying at speed v for one slot."""
    return propulsion_power(v, rp) * slot_len


def huav_hover_energy(rp_h: RotorParams, slot_len: float) -> float:
    """Joules the HUAV spends hovering for one slot."""
    return (rp_h.profile_power + rp_h.induced_power) * slot_len


def task_total_delay(costs: Sequence[ModeCost]) -> float:
    """Completion time of a task: the slowest of its modes."""
    return max((c.delay for c in costs), default=0.0)


# =============================================================================
# Task and Slot Evaluation
# =============================================================================


def final_sharers(decisions: Sequence[OffloadDecision]) -> dict[tuple[str, str], int]:
    """
    Count the vehicles sharing each bandwidth pool after scheduling.

    Keys are ("direct", node_id) for RSU/LUAV uplinks and ("relay", "huav")
    for the HUAV hops, which every relay user shares.
    """
    counts: dict[tuple[str, str], int] = {}
    for d in decisions:
        seen: set[tuple[str, str]] = set()
        for mode in REMOTE_MODES:
            if d.ratios[mode] <= 0 or mode not in d.targets:
                continue
            key = ("relay", HUAV_ID) if mode in RELAY_MODES else ("direct", d.targets[mode])
            seen.add(key)
        for key in seen:
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_infeasible(task: Task, cfg: "SimConfig", node_cpu_total: float) -> bool:
    """True when even every CPU in the network cannot meet the deadline."""
    return task.cycles / (cfg.compute.vehicle_cpu + node_cpu_total) > task.deadline


def evaluate_decisions(
    decisions: Sequence[OffloadDecision],
    tasks: Sequence[Task],
    channel: "SlotChannel",
    cfg: "SimConfig",
) -> list[TaskOutcome]:
    """
    Cost every scheduled decision with the slot's final bandwidth shares.

    Raises:
        UnreachableLinkError: If a remote share has no resolved target.
        NoAllocationError: If a remote share has no CPU allocation.
    """
    comp, ch = cfg.compute, cfg.channel
    sharers = final_sharers(decisions)
    tasks_by_vehicle = {t.vehicle_id: t for t in tasks}
    node_cpu_total = sum(n.cpu_total for n in channel.nodes.values())
    outcomes: list[TaskOutcome] = []

    for d in decisions:
        task = tasks_by_vehicle[d.vehicle_id]
        vehicle_key = f"vehicle-{d.vehicle_id}"
        costs = [local_cost(float(d.ratios[Mode.LOCAL]), task, comp.vehicle_cpu,
                            comp.vehicle_kappa)]
        node_energy = {vehicle_key: costs[0].energy}

        for mode in REMOTE_MODES:
            lam = float(d.ratios[mode])
            if lam <= 0:
                costs.append(_zero(mode))
                continue
            target = d.targets.get(mode)
            if target is None:
                raise UnreachableLinkError(
                    f"Vehicle {d.vehicle_id} has {mode.name} mass {lam} without a target"
                )
            node = channel.nodes[target]
            f_alloc = d.allocations.get(mode, 0.0)
            if mode in RELAY_MODES:
                r1, r2 = channel.relay_rates(
                    d.vehicle_id, target, sharers.get(("relay", HUAV_ID), 1)
                )
                cost = relay_cost(lam, task, r1, r2, f_alloc, node.kappa,
                                  ch.vehicle_tx_power, ch.huav_tx_power, mode=mode)
                node_energy[HUAV_ID] = node_energy.get(HUAV_ID, 0.0) + cost.relay_energy
            else:
                rate = channel.direct_rate(
                    d.vehicle_id, target, sharers.get(("direct", target), 1)
                )
                cost = edge_cost(lam, task, rate, f_alloc, node.kappa,
                                 ch.vehicle_tx_power, mode=mode)
            costs.append(cost)
            node_energy[vehicle_key] += cost.tx_energy
            node_energy[target] = node_energy.get(target, 0.0) + cost.compute_energy

        costs.sort(key=lambda c: c.mode)
        outcomes.append(
            TaskOutcome(
                vehicle_id=d.vehicle_id,
                total_delay=task_total_delay(costs),
                deadline=task.deadline,
                costs=costs,
                mode_mass=d.ratios.copy(),
                node_energy=node_energy,
                infeasible=is_infeasible(task, cfg, node_cpu_total),
            )
        )
    return outcomes


def slot_reward(
    completion_rate: float, total_delay: float, system_energy: float, cfg: "SimConfig"
) -> float:
    """Weighted slot reward from its three components."""
    rw = cfg.reward
    return (
        rw.omega_completion * completion_rate
        - rw.omega_delay * rw.delay_scale * total_delay
        - rw.omega_energy * rw.energy_scale * system_energy
    )


def slot_metrics(
    per_task: Sequence[TaskOutcome],
    luav_speeds: Sequence[Optional[float]],
    cfg: "SimConfig",
    violations: Optional[ConstraintViolations] = None,
) -> SlotMetrics:
    """
    Aggregate one slot.

    Args:
        per_task: One outcome per vehicle.
        luav_speeds: Applied speed per LUAV; None for a landed (depleted) LUAV,
            which spends nothing.
        cfg: Validated configuration.
        violations: Counters collected by the caller; infeasible tasks are
            added here.

    Returns:
        SlotMetrics with the reward already computed.
    """
    violations = violations or ConstraintViolations()
    slot_len = cfg.slot_length
    n_tasks = len(per_task)

    completed = sum(1 for o in per_task if o.completed)
    completion_rate = completed / n_tasks if n_tasks else 0.0
    total_delay = sum(o.total_delay for o in per_task)
    compute_energy = sum(o.energy for o in per_task)

    node_energy: dict[str, float] = {}
    for o in per_task:
        for node_id, joules in o.node_energy.items():
            node_energy[node_id] = node_energy.get(node_id, 0.0) + joules
    violations.infeasible_tasks += sum(1 for o in per_task if o.infeasible)

    uav_energy = 0.0
    for j, v in enumerate(luav_speeds):
        if v is None:
            continue
        joules = luav_fly_energy(v, cfg.uav.luav_rotor, slot_len)
        node_energy[f"luav-{j}"] = node_energy.get(f"luav-{j}", 0.0) + joules
        uav_energy += joules
    hover = huav_hover_energy(cfg.uav.huav_rotor, slot_len)
    node_energy[HUAV_ID] = node_energy.get(HUAV_ID, 0.0) + hover
    uav_energy += hover

    system_energy = compute_energy + uav_energy
    mode_mass = np.zeros(NUM_MODES)
    for o in per_task:
        mode_mass += o.mode_mass

    return SlotMetrics(
        completion_rate=completion_rate,
        total_delay=total_delay,
        system_energy=system_energy,
        compute_energy=compute_energy,
        uav_energy=uav_energy,
        reward=slot_reward(completion_rate, total_delay, system_energy, cfg),
        mode_mass=mode_mass,
        violations=violations,
        node_energy=node_energy,
    )
