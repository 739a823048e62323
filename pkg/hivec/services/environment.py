"""
The time-slotted world the HUAV agent acts in.

One slot of HivecEnv.step():

    map_action        raw action in [-1, 1] -> offloading ratios + LUAV controls
    schedule          ratios -> targets and CPU grants (priority or FIFO order)
    evaluate          per-task delay and energy under the slot's channel
    move_luavs        apply controls, charge flight energy, land depleted LUAVs
    slot_metrics      completion rate, delay, energy, reward
    move_vehicles     advance vehicles along the road grid
    generate_tasks    one fresh task per vehicle

Geometry: a square area crossed by ``grid_roads`` evenly spaced roads per
axis. RSUs sit on the intersections nearest the centre, the BS on the corner
intersection at the origin, the HUAV hovers over the centre and LUAVs start
at random points on the roads. CPU grants are per slot: every node's free
CPU is restored when the slot ends.

Key Features:
    - gymnasium.Env interface with a Box observation and action space
    - Deterministic given the reset seed
    - Constraint counters on every slot (ratio sum, capacity, displacement,
      UAV energy, infeasible tasks)
    - Optional JSON-lines slot trace

Example:
    >>> env = HivecEnv(load_config(Path("configs/desk.json")))
    >>> obs, info = env.reset(seed=3)
    >>> obs, reward, terminated, truncated, info = env.step(env.action_space.sample())
    >>> 0.0 <= info["metrics"].completion_rate <= 1.0
    True

See Also:
    - hivec.services.scheduler: The lower decision layer
    - hivec.agents.training: Episode loop around this environment
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from hivec.config import SimConfig
from hivec.domain import (
    NUM_MODES,
    ConstraintViolations,
    LuavControl,
    Mode,
    NodeKind,
    NodeState,
    OffloadDecision,
    SlotMetrics,
    Task,
)
from hivec.services.channel import ChannelError, SlotChannel
from hivec.services.cost import (
    CostError,
    evaluate_decisions,
    huav_hover_energy,
    luav_fly_energy,
    slot_metrics,
)
from hivec.services.scheduler import SchedulingError, schedule

logger = logging.getLogger("hivec.environment")

RATIO_EPSILON = 1e-6
VEHICLE_FEATURES = 7
NODE_FEATURES = 4
LUAV_FEATURES = 2

# Road directions are indexed 0 east, 1 north, 2 west, 3 south.
_GRID_TOL = 1e-9


# =============================================================================
# World State
# =============================================================================


@dataclass
class WorldState:
    """
    Everything the simulator knows at the start of a slot.

    Attributes:
        slot: Index t of the current slot.
        vehicles: One NodeState per vehicle (kind VEHICLE).
        rsus: RSU nodes.
        luavs: LUAV nodes.
        bs: The base station.
        huav: The relay HUAV.
        tasks: Current task per vehicle.
        huav_energy_used: Joules the HUAV has spent this episode.
    """

    slot: int
    vehicles: list[NodeState]
    rsus: list[NodeState]
    luavs: list[NodeState]
    bs: NodeState
    huav: NodeState
    tasks: list[Task] = field(default_factory=list)
    huav_energy_used: float = 0.0

    def computing_nodes(self) -> dict[str, NodeState]:
        """RSUs, LUAVs and the BS keyed by id, in observation order."""
        return {n.node_id: n for n in [*self.rsus, *self.luavs, self.bs]}

    def vehicle_positions(self) -> np.ndarray:
        return np.array([v.position for v in self.vehicles])

    def restore_cpu(self) -> None:
        """Renew every per-slot CPU ledger; landed LUAVs offer nothing."""
        for node in self.computing_nodes().values():
            node.cpu_remaining = 0.0 if node.depleted else node.cpu_total

    def observation(self) -> np.ndarray:
        """
        Flat observation vector.

        Per vehicle (x, y, v, D, C, T^max, K), per computing node
        (f^remain, x, y, z), per LUAV (heading, speed).
        """
        parts: list[float] = []
        for vehicle, task in zip(self.vehicles, self.tasks):
            parts += [vehicle.position[0], vehicle.position[1], vehicle.velocity,
                      task.size, task.cycles, task.deadline, float(task.priority)]
        for node in self.computing_nodes().values():
            parts += [node.cpu_remaining, *node.position]
        for luav in self.luavs:
            parts += [luav.heading, luav.velocity]
        return np.asarray(parts, dtype=np.float64)


def observation_size(cfg: SimConfig) -> int:
    net = cfg.network
    return (
        VEHICLE_FEATURES * net.num_vehicles
        + NODE_FEATURES * (net.num_luavs + net.num_rsus + 1)
        + LUAV_FEATURES * net.num_luavs
    )


def action_size(cfg: SimConfig) -> int:
    return NUM_MODES * cfg.network.num_vehicles + 2 * cfg.network.num_luavs


def observation_bounds(cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature (low, high) arrays matching WorldState.observation()."""
    net, task, comp = cfg.network, cfg.task, cfg.compute
    side = net.area_side
    levels = task.priority_levels
    low: list[float] = []
    high: list[float] = []
    for _ in range(net.num_vehicles):
        low += [0.0, 0.0, net.vehicle_speed_min, task.size_min,
                task.cycles_per_bit * task.size_min, task.deadline_min, float(min(levels))]
        high += [side, side, net.vehicle_speed_max, task.size_max,
                 task.cycles_per_bit * task.size_max, task.deadline_max, float(max(levels))]
    node_specs = (
        [(comp.rsu_cpu, 0.0)] * net.num_rsus
        + [(comp.luav_cpu, net.luav_altitude)] * net.num_luavs
        + [(comp.bs_cpu, 0.0)]
    )
    for cpu, z in node_specs:
        low += [0.0, 0.0, 0.0, z]
        high += [cpu, side, side, z]
    for _ in range(net.num_luavs):
        low += [0.0, 0.0]
        high += [2.0 * math.pi, net.luav_vmax]
    return np.asarray(low), np.asarray(high)


# =============================================================================
# Layout and Task Generation
# =============================================================================


def road_lines(cfg: SimConfig) -> np.ndarray:
    """Coordinates of the roads along each axis."""
    return np.linspace(0.0, cfg.network.area_side, cfg.network.grid_roads)


def rsu_sites(cfg: SimConfig) -> list[tuple[float, float]]:
    """The R intersections closest to the centre, nearest first."""
    lines = road_lines(cfg)
    centre = cfg.network.area_side / 2.0
    crossings = [(float(x), float(y)) for x in lines for y in lines]
    crossings.sort(key=lambda p: (math.hypot(p[0] - centre, p[1] - centre), p[0], p[1]))
    if cfg.network.num_rsus > len(crossings):
        raise ChannelError(
            f"{cfg.network.num_rsus} RSUs do not fit on {len(crossings)} intersections"
        )
    return crossings[: cfg.network.num_rsus]


def _random_road_point(rng: np.random.Generator, cfg: SimConfig) -> tuple[np.ndarray, int]:
    lines = road_lines(cfg)
    horizontal = bool(rng.integers(2))
    line = float(lines[rng.integers(len(lines))])
    along = float(rng.uniform(0.0, cfg.network.area_side))
    if horizontal:
        return np.array([along, line]), int(rng.choice([0, 2]))
    return np.array([line, along]), int(rng.choice([1, 3]))


def generate_tasks(rng: np.random.Generator, cfg: SimConfig) -> list[Task]:
    """
    Draw one task per vehicle.

    D and T^max are uniform over their ranges, C = cycles_per_bit * D, K is
    uniform over the priority levels and arrival order is a random permutation.
    """
    task, n = cfg.task, cfg.network.num_vehicles
    sizes = rng.uniform(task.size_min, task.size_max, size=n)
    deadlines = rng.uniform(task.deadline_min, task.deadline_max, size=n)
    priorities = rng.choice(np.asarray(task.priority_levels), size=n)
    arrivals = rng.permutation(n)
    return [
        Task(
            vehicle_id=i,
            size=float(sizes[i]),
            cycles=task.cycles_per_bit * float(sizes[i]),
            deadline=float(deadlines[i]),
            priority=int(priorities[i]),
            arrival=int(arrivals[i]),
        )
        for i in range(n)
    ]


def reset_world(cfg: SimConfig, rng: np.random.Generator) -> WorldState:
    """Lay out a fresh world and draw the first tasks."""
    net, comp, uav = cfg.network, cfg.compute, cfg.uav
    vehicles = []
    for i in range(net.num_vehicles):
        xy, direction = _random_road_point(rng, cfg)
        vehicles.append(
            NodeState(
                node_id=f"vehicle-{i}",
                kind=NodeKind.VEHICLE,
                position=np.array([xy[0], xy[1], 0.0]),
                cpu_total=comp.vehicle_cpu,
                cpu_remaining=comp.vehicle_cpu,
                kappa=comp.vehicle_kappa,
                velocity=float(rng.uniform(net.vehicle_speed_min, net.vehicle_speed_max)),
                heading=direction * math.pi / 2.0,
            )
        )
    rsus = [
        NodeState(
            node_id=f"rsu-{j}",
            kind=NodeKind.RSU,
            position=np.array([x, y, 0.0]),
            cpu_total=comp.rsu_cpu,
            cpu_remaining=comp.rsu_cpu,
            kappa=comp.rsu_kappa,
        )
        for j, (x, y) in enumerate(rsu_sites(cfg))
    ]
    luavs = []
    for j in range(net.num_luavs):
        xy, _ = _random_road_point(rng, cfg)
        luavs.append(
            NodeState(
                node_id=f"luav-{j}",
                kind=NodeKind.LUAV,
                position=np.array([xy[0], xy[1], net.luav_altitude]),
                cpu_total=comp.luav_cpu,
                cpu_remaining=comp.luav_cpu,
                kappa=comp.luav_kappa,
                energy_remaining=uav.luav_energy_budget,
            )
        )
    bs = NodeState(
        node_id="bs",
        kind=NodeKind.BS,
        position=np.zeros(3),
        cpu_total=comp.bs_cpu,
        cpu_remaining=comp.bs_cpu,
        kappa=comp.bs_kappa,
    )
    centre = net.area_side / 2.0
    huav = NodeState(
        node_id="huav",
        kind=NodeKind.HUAV,
        position=np.array([centre, centre, net.huav_altitude]),
        energy_remaining=uav.huav_energy_budget,
    )
    state = WorldState(slot=0, vehicles=vehicles, rsus=rsus, luavs=luavs, bs=bs, huav=huav)
    state.tasks = generate_tasks(rng, cfg)
    return state


# =============================================================================
# Mobility
# =============================================================================


def _direction_index(heading: float) -> int:
    return int(round(heading / (math.pi / 2.0))) % 4


def _turn(
    xy: np.ndarray, direction: int, rng: np.random.Generator, side: float
) -> int:
    """Pick a new direction at an intersection, never leaving the area."""
    x, y = xy
    feasible = [
        d
        for d, ok in enumerate((x < side - _GRID_TOL, y < side - _GRID_TOL,
                                x > _GRID_TOL, y > _GRID_TOL))
        if ok
    ]
    forward = [d for d in feasible if d != (direction + 2) % 4]
    options = forward or feasible
    return int(options[rng.integers(len(options))])


def _advance(
    xy: np.ndarray, direction: int, distance: float, lines: np.ndarray,
    rng: np.random.Generator, side: float,
) -> tuple[np.ndarray, int]:
    xy = xy.copy()
    remaining = distance
    # A pass either covers a full block, turns at a dead end or stops.
    unique = np.unique(lines)
    block = float(np.min(np.diff(unique))) if unique.size > 1 else side
    max_passes = 2 * (int(math.ceil(distance / block)) + 2)
    for _ in range(max_passes):
        if remaining <= 0:
            break
        axis = 0 if direction in (0, 2) else 1
        sign = 1.0 if direction in (0, 1) else -1.0
        coord = xy[axis]
        ahead = lines[lines > coord + _GRID_TOL] if sign > 0 else lines[lines < coord - _GRID_TOL]
        if ahead.size == 0:
            direction = _turn(xy, direction, rng, side)
            continue
        nxt = ahead.min() if sign > 0 else ahead.max()
        gap = abs(nxt - coord)
        if remaining < gap:
            xy[axis] = coord + sign * remaining
            break
        xy[axis] = nxt
        remaining -= gap
        direction = _turn(xy, direction, rng, side)
    else:
        if remaining > 0:
            logger.warning(f"Vehicle movement stopped after {max_passes} road segments "
                           f"with {remaining:.1f} m left")
    return np.clip(xy, 0.0, side), direction


def move_vehicles(state: WorldState, rng: np.random.Generator, cfg: SimConfig) -> WorldState:
    """
    Advance every vehicle by v * slot_length along the road grid.

    Speeds are redrawn from the speed range with the configured probability
    before moving. At an intersection a vehicle turns uniformly among the
    directions that stay inside the area, U-turns only at dead ends.
    """
    net = cfg.network
    lines = road_lines(cfg)
    for vehicle in state.vehicles:
        if rng.random() < net.speed_resample_prob:
            vehicle.velocity = float(rng.uniform(net.vehicle_speed_min, net.vehicle_speed_max))
        if vehicle.velocity <= 0:
            continue
        xy, direction = _advance(
            vehicle.position[:2], _direction_index(vehicle.heading),
            vehicle.velocity * cfg.slot_length, lines, rng, net.area_side,
        )
        vehicle.position = np.array([xy[0], xy[1], 0.0])
        vehicle.heading = direction * math.pi / 2.0
    return state


def move_luavs(
    state: WorldState,
    controls: Sequence[LuavControl],
    cfg: SimConfig,
    violations: Optional[ConstraintViolations] = None,
) -> list[Optional[float]]:
    """
    Fly every LUAV for one slot and charge its flight energy.

    Speeds are clamped to [0, v_max]. A LUAV that cannot afford the commanded
    speed hovers; one that cannot afford hovering lands for good.

    Returns:
        Applied speed per LUAV, None for landed ones.
    """
    net, rotor = cfg.network, cfg.uav.luav_rotor
    slot_len = cfg.slot_length
    applied: list[Optional[float]] = []
    for luav, ctl in zip(state.luavs, controls):
        if luav.depleted:
            applied.append(None)
            continue
        speed = min(max(ctl.speed, 0.0), net.luav_vmax)
        cost = luav_fly_energy(speed, rotor, slot_len)
        if cost > luav.energy_remaining:
            speed = 0.0
            cost = luav_fly_energy(0.0, rotor, slot_len)
        if cost > luav.energy_remaining:
            luav.depleted = True
            luav.velocity = 0.0
            luav.cpu_remaining = 0.0
            logger.warning(f"{luav.node_id} exhausted its energy budget and landed")
            applied.append(None)
            continue

        before = luav.position.copy()
        step = speed * slot_len * np.array([math.cos(ctl.heading), math.sin(ctl.heading)])
        xy = np.clip(luav.position[:2] + step, 0.0, net.area_side)
        luav.position = np.array([xy[0], xy[1], net.luav_altitude])
        luav.energy_remaining -= cost
        luav.heading = ctl.heading
        luav.velocity = speed
        applied.append(speed)

        if violations is not None:
            if np.linalg.norm(luav.position - before) > net.luav_vmax * slot_len + 1e-9:
                violations.luav_displacement += 1
            if luav.energy_remaining < 0:
                violations.luav_energy += 1
    return applied


# =============================================================================
# Action Mapping
# =============================================================================


def map_ratios(raw: np.ndarray) -> np.ndarray:
    """
    Map 5 raw components in [-1, 1] to offloading ratios.

    lambda_k = (raw_k + 1 + eps) / sum_j (raw_j + 1 + eps). Components at
    exactly -1 map to an exact zero unless every component is at -1, instead
    of keeping the eps floor share, so a policy can switch a mode fully off.
    Just above -1 the eps floor applies as written.
    """
    shifted = np.clip(raw, -1.0, 1.0) + 1.0
    weights = shifted + RATIO_EPSILON
    if np.any(shifted > 0):
        weights[shifted <= 0] = 0.0
    return weights / weights.sum()


def map_action(
    raw: np.ndarray, cfg: SimConfig
) -> tuple[list[OffloadDecision], list[LuavControl]]:
    """
    Split a raw action into per-vehicle decisions and per-LUAV controls.

    Layout: 5 ratio components per vehicle, then (heading, speed) per LUAV.
    Heading = pi * (raw + 1) wrapped to [0, 2pi), speed = v_max * (raw + 1) / 2.
    """
    raw = np.asarray(raw, dtype=float)
    expected = action_size(cfg)
    if raw.shape != (expected,):
        raise ValueError(f"Action must have shape ({expected},), got {raw.shape}")
    n_vehicles = cfg.network.num_vehicles
    decisions = [
        OffloadDecision(
            vehicle_id=i,
            ratios=map_ratios(raw[NUM_MODES * i: NUM_MODES * (i + 1)]),
        )
        for i in range(n_vehicles)
    ]
    controls_raw = np.clip(raw[NUM_MODES * n_vehicles:], -1.0, 1.0).reshape(-1, 2)
    controls = [
        LuavControl(
            luav_id=j,
            heading=float(math.pi * (h + 1.0)) % (2.0 * math.pi),
            speed=float(cfg.network.luav_vmax * (v + 1.0) / 2.0),
        )
        for j, (h, v) in enumerate(controls_raw)
    ]
    return decisions, controls


# =============================================================================
# Slot Trace
# =============================================================================


class SlotTraceWriter:
    """
    JSON-lines trace, one record per slot.

    Example:
        >>> with SlotTraceWriter(Path("trace.jsonl")) as trace:
        ...     env = HivecEnv(cfg, trace=trace)
    """

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self._file = open(self.path, "w", encoding="utf-8")

    def write(
        self, slot: int, observation: np.ndarray, action: np.ndarray, metrics: SlotMetrics
    ) -> None:
        record = {
            "slot": slot,
            "observation_sha256": hashlib.sha256(
                np.ascontiguousarray(observation, dtype=np.float64).tobytes()
            ).hexdigest(),
            "action": [float(a) for a in action],
            "reward": metrics.reward,
            "metrics": metrics.as_record(),
        }
        self._file.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "SlotTraceWriter":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


# =============================================================================
# Environment
# =============================================================================


def _all_local(decisions: Sequence[OffloadDecision]) -> list[OffloadDecision]:
    out = []
    for d in decisions:
        ratios = np.zeros(NUM_MODES)
        ratios[Mode.LOCAL] = 1.0
        out.append(OffloadDecision(vehicle_id=d.vehicle_id, ratios=ratios))
    return out


class HivecEnv(gym.Env):
    """
    Dual-layer UAV-assisted vehicular edge computing network.

    The HUAV is the single agent. One episode is ``num_slots`` slots.

    Attributes:
        cfg: Validated configuration.
        state: Current WorldState (None before the first reset).
        fifo: Scheduler order override; None follows cfg.scheduler.priority.
    """

    metadata = {"render_modes": []}

    def __init__(
        self,
        cfg: SimConfig,
        trace: Optional[SlotTraceWriter] = None,
        fifo: Optional[bool] = None,
    ) -> None:
        self.cfg = cfg
        self.trace = trace
        self.fifo = fifo
        self.state: Optional[WorldState] = None
        low, high = observation_bounds(cfg)
        self.observation_space = spaces.Box(low=low, high=high, dtype=np.float64)
        self.action_space = spaces.Box(
            low=-1.0, high=1.0, shape=(action_size(cfg),), dtype=np.float64
        )
        self._seeded = False

    def reset(
        self, *, seed: Optional[int] = None, options: Optional[dict[str, Any]] = None
    ) -> tuple[np.ndarray, dict[str, Any]]:
        if seed is None and not self._seeded:
            seed = self.cfg.rng_seed
        super().reset(seed=seed)
        self._seeded = True
        self.state = reset_world(self.cfg, self.np_random)
        logger.debug(f"World reset: {len(self.state.vehicles)} vehicles, "
                     f"{len(self.state.luavs)} LUAVs")
        return self.state.observation(), {"state": self.state}

    def step(
        self, action: np.ndarray
    ) -> tuple[np.ndarray, float, bool, bool, dict[str, Any]]:
        if self.state is None:
            raise RuntimeError("Call reset() before step()")
        cfg, state, rng = self.cfg, self.state, self.np_random
        violations = ConstraintViolations()
        observation = state.observation()

        decisions, controls = map_action(action, cfg)
        nodes = state.computing_nodes()
        channel = SlotChannel(cfg, state.vehicle_positions(), nodes,
                              state.huav.position, rng)
        try:
            scheduled = schedule(decisions, state.tasks, channel, cfg, fifo=self.fifo)
            outcomes = evaluate_decisions(scheduled, state.tasks, channel, cfg)
        except (SchedulingError, ChannelError, CostError) as e:
            logger.warning(f"Slot {state.slot}: scheduling failed ({e}), running all tasks locally")
            state.restore_cpu()
            scheduled = _all_local(decisions)
            outcomes = evaluate_decisions(scheduled, state.tasks, channel, cfg)

        self._check_allocations(scheduled, nodes, violations)
        speeds = move_luavs(state, controls, cfg, violations)
        self._charge_huav(violations)
        metrics = slot_metrics(outcomes, speeds, cfg, violations)

        if self.trace is not None:
            self.trace.write(state.slot, observation, np.asarray(action, dtype=float), metrics)

        state.restore_cpu()
        move_vehicles(state, rng, cfg)
        state.tasks = generate_tasks(rng, cfg)
        state.slot += 1
        terminated = state.slot >= cfg.network.num_slots

        info = {"metrics": metrics, "state": state, "decisions": scheduled}
        return state.observation(), float(metrics.reward), terminated, False, info

    def close(self) -> None:
        if self.trace is not None:
            self.trace.close()

    def _check_allocations(
        self,
        decisions: Sequence[OffloadDecision],
        nodes: dict[str, NodeState],
        violations: ConstraintViolations,
    ) -> None:
        granted: dict[str, float] = {}
        for d in decisions:
            if abs(d.ratio_sum - 1.0) > 1e-9:
                violations.ratio_sum += 1
            for mode, f in d.allocations.items():
                node_id = d.targets[mode]
                granted[node_id] = granted.get(node_id, 0.0) + f
        for node_id, total in granted.items():
            if total > nodes[node_id].cpu_total * (1.0 + 1e-12):
                violations.node_capacity += 1

    def _charge_huav(self, violations: ConstraintViolations) -> None:
        state, uav = self.state, self.cfg.uav
        hover = huav_hover_energy(uav.huav_rotor, self.cfg.slot_length)
        state.huav_energy_used += hover
        state.huav.energy_remaining = max(uav.huav_energy_budget - state.huav_energy_used, 0.0)
        if state.huav_energy_used > uav.huav_energy_budget:
            violations.huav_energy += 1
            if state.huav_energy_used - hover <= uav.huav_energy_budget:
                logger.warning(f"Slot {state.slot}: HUAV over its energy budget "
                               f"({state.huav_energy_used:.0f} J)")
