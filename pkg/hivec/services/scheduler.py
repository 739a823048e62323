"""
Priority-based task scheduling, the lower decision layer.

The policy decides *how much* of each task goes to each mode; this module
decides *where* each share runs and how much CPU it gets:

    1. Order tasks: priority K descending, deadline ascending, vehicle id.
       With priority disabled tasks are served first-in first-out.
    2. For each remote share, collect eligible nodes (in coverage, more than
       the eligibility fraction of CPU left, not depleted) and pick the one
       with the highest score alpha_s / d + beta_s * remain_fraction.
    3. Allocate the CPU needed to finish the share within the deadline budget.
    4. If no node is eligible or the node cannot cover the demand, the share
       moves down the fallback chain LUAV -> RSU -> HUAV-RSU -> HUAV-BS ->
       LOCAL. LOCAL always absorbs, so mass is conserved.

brute_force_schedule() enumerates every placement of a small instance and
returns the reward-optimal one. It exists to check schedule() in tests.

Example:
    >>> decisions = schedule(decisions, tasks, channel, cfg)
    >>> decisions[0].targets
    {<Mode.RSU: 1>: 'rsu-2'}

See Also:
    - hivec.services.environment: Calls schedule() once per slot
    - hivec.services.cost: Evaluates the scheduled decisions
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from hivec.domain import (
    FALLBACK_CHAIN,
    MODE_NODE_KIND,
    NUM_MODES,
    RELAY_MODES,
    Mode,
    NodeKind,
    NodeState,
    OffloadDecision,
    Task,
    fallback_of,
)
from hivec.services.channel import ChannelError
from hivec.services.cost import (
    HUAV_ID,
    CostError,
    evaluate_decisions,
    final_sharers,
    slot_metrics,
)

if TYPE_CHECKING:
    from hivec.config import SimConfig
    from hivec.services.channel import SlotChannel

logger = logging.getLogger("hivec.scheduler")

# Remote modes in the order the fallback chain visits them.
_CHAIN_REMOTE: tuple[Mode, ...] = tuple(m for m in FALLBACK_CHAIN if m is not Mode.LOCAL)

BRUTE_FORCE_MAX_TASKS = 4
BRUTE_FORCE_MAX_NODES = 4
BRUTE_FORCE_MAX_PLACEMENTS = 200_000


# =============================================================================
# Exceptions
# =============================================================================


class SchedulingError(Exception):
    """Base exception for scheduler errors."""

    pass


class InstanceTooLargeError(SchedulingError):
    """Raised when brute_force_schedule() is asked to enumerate too much."""

    pass


# =============================================================================
# Data Classes
# =============================================================================


@dataclass(frozen=True)
class Candidate:
    """
    A node that may serve one share of one task.

    Attributes:
        node_id: Node identifier.
        distance: Vehicle-to-node 3-D distance in metres.
        remain_fraction: f^remain / F^max at evaluation time.
        score: Node score.
    """

    node_id: str
    distance: float
    remain_fraction: float
    score: float


@dataclass(frozen=True)
class Allocation:
    """Outcome of one allocate() call."""

    f_alloc: float
    demand: float
    shortfall: bool


@dataclass
class BruteForceResult:
    """Best placement found by exhaustive search."""

    decisions: list[OffloadDecision]
    reward: float
    placements_checked: int


# =============================================================================
# Ordering, Eligibility and Scoring
# =============================================================================


def sort_tasks(tasks: Sequence[Task], fifo: bool = False) -> list[Task]:
    """
    Order tasks for scheduling.

    Priority order is K descending, then deadline ascending, then vehicle id.
    FIFO order is arrival, then vehicle id.
    """
    if fifo:
        return sorted(tasks, key=lambda t: (t.arrival, t.vehicle_id))
    return sorted(tasks, key=lambda t: (-t.priority, t.deadline, t.vehicle_id))


def score_node(c: Candidate, alpha_s: float, beta_s: float) -> float:
    """Score = alpha_s / d + beta_s * remain_fraction, with d clamped to 1 m."""
    return alpha_s / max(c.distance, 1.0) + beta_s * c.remain_fraction


def _in_coverage(
    vehicle_id: int, mode: Mode, node_id: str, channel: "SlotChannel", cfg: "SimConfig"
) -> bool:
    net = cfg.network
    if mode in RELAY_MODES:
        if net.huav_coverage is None:
            return True
        d = float(np.linalg.norm(channel.vehicle_positions[vehicle_id] - channel.huav_position))
        return d <= net.huav_coverage
    radius = net.rsu_coverage if mode is Mode.RSU else net.luav_coverage
    return channel.distance_to(vehicle_id, node_id) <= radius


def reachable_nodes(
    vehicle_id: int, mode: Mode, channel: "SlotChannel", cfg: "SimConfig"
) -> list[NodeState]:
    """Nodes of the mode's class that the vehicle can reach, ignoring load."""
    kind = MODE_NODE_KIND[mode]
    direct = channel.direct_rsu(vehicle_id) if mode is Mode.HUAV_RSU else None
    return [
        node
        for node in channel.nodes.values()
        if node.kind is kind
        and not node.depleted
        and node.cpu_total > 0
        and node.node_id != direct
        and _in_coverage(vehicle_id, mode, node.node_id, channel, cfg)
    ]


def eligible_nodes(
    vehicle_id: int, mode: Mode, channel: "SlotChannel", cfg: "SimConfig"
) -> list[Candidate]:
    """
    Scored candidates for one remote share, best first.

    A node is eligible when it is reachable and strictly more than the
    eligibility fraction of its CPU is still free. For HUAV-RSU the vehicle's
    direct RSU is never a candidate.
    """
    if mode is Mode.LOCAL:
        raise SchedulingError("LOCAL has no candidate nodes")
    sch = cfg.scheduler
    candidates = []
    for node in reachable_nodes(vehicle_id, mode, channel, cfg):
        if node.remain_fraction <= sch.eligibility_fraction:
            continue
        c = Candidate(
            node_id=node.node_id,
            distance=channel.distance_to(vehicle_id, node.node_id),
            remain_fraction=node.remain_fraction,
            score=0.0,
        )
        candidates.append(replace(c, score=score_node(c, sch.alpha_s, sch.beta_s)))
    candidates.sort(key=lambda c: (-c.score, c.node_id))
    return candidates


# =============================================================================
# Allocation
# =============================================================================


def time_budget(task: Task, tx_delay: float) -> float:
    """Seconds left for computing after transmission, floored at 10% of T^max."""
    return max(task.deadline - tx_delay, 0.1 * task.deadline)


def allocate(task: Task, lam: float, node: NodeState, tx_delay: float = 0.0) -> Allocation:
    """
    Grant CPU to one share and deduct it from the node's ledger.

    The demand is the frequency that finishes lam * C within the time budget.
    The grant is capped at what the node has left; a capped grant is a
    shortfall.
    """
    if lam <= 0:
        return Allocation(f_alloc=0.0, demand=0.0, shortfall=False)
    demand = lam * task.cycles / time_budget(task, tx_delay)
    f_alloc = min(node.cpu_remaining, demand)
    node.cpu_remaining -= f_alloc
    return Allocation(f_alloc=f_alloc, demand=demand, shortfall=f_alloc < demand)


def release(node: NodeState, allocation: Allocation) -> None:
    """Return a grant to the node's ledger."""
    node.cpu_remaining = min(node.cpu_total, node.cpu_remaining + allocation.f_alloc)


def estimate_sharers(decisions: Sequence[OffloadDecision]) -> dict[Mode, int]:
    """
    Upper bound on the vehicles sharing each mode's bandwidth pool.

    A vehicle may end up in a mode only through mass in that mode or an
    earlier one in the fallback chain; relay modes share one pool, so any
    remote mass counts for them. Any positive share counts, however small,
    because final_sharers() gives an eps share a full slice of the pool too.
    """
    counts = {}
    for mode in _CHAIN_REMOTE:
        upto = _CHAIN_REMOTE if mode in RELAY_MODES else \
            _CHAIN_REMOTE[: _CHAIN_REMOTE.index(mode) + 1]
        counts[mode] = sum(
            1 for d in decisions if any(d.ratios[m] > 0 for m in upto)
        )
    return counts


# =============================================================================
# Greedy Scheduler
# =============================================================================


def _copy_decision(d: OffloadDecision) -> OffloadDecision:
    return OffloadDecision(vehicle_id=d.vehicle_id, ratios=d.ratios.copy())


def schedule(
    decisions: Sequence[OffloadDecision],
    tasks: Sequence[Task],
    channel: "SlotChannel",
    cfg: "SimConfig",
    fifo: Optional[bool] = None,
) -> list[OffloadDecision]:
    """
    Resolve targets and CPU grants for every remote share.

    Mutates the cpu_remaining ledger of the nodes held by ``channel``.

    Args:
        decisions: One decision per task, ratios only.
        tasks: The slot's tasks.
        channel: Slot channel state with the node ledger.
        cfg: Validated configuration.
        fifo: Serve tasks in arrival order. Defaults to the opposite of
            cfg.scheduler.priority.

    Returns:
        New decisions, in input order, with targets and allocations filled in.
    """
    if fifo is None:
        fifo = not cfg.scheduler.priority
    scheduled = {d.vehicle_id: _copy_decision(d) for d in decisions}
    sharers = estimate_sharers(decisions)

    for task in sort_tasks([t for t in tasks if t.vehicle_id in scheduled], fifo=fifo):
        d = scheduled[task.vehicle_id]
        for mode in _CHAIN_REMOTE:
            lam = float(d.ratios[mode])
            if lam <= 0:
                continue
            if not _place_share(d, task, mode, lam, channel, sharers[mode], cfg):
                successor = fallback_of(mode)
                d.ratios[successor] += lam
                d.ratios[mode] = 0.0
                logger.debug(
                    f"Vehicle {task.vehicle_id}: {mode.name} share {lam:.3f} "
                    f"falls back to {successor.name}"
                )

    return [scheduled[d.vehicle_id] for d in decisions]


def _place_share(
    d: OffloadDecision,
    task: Task,
    mode: Mode,
    lam: float,
    channel: "SlotChannel",
    sharers: int,
    cfg: "SimConfig",
) -> bool:
    candidates = eligible_nodes(task.vehicle_id, mode, channel, cfg)
    if not candidates:
        return False
    best = candidates[0]
    node = channel.nodes[best.node_id]
    try:
        tx = channel.transmission_delay(mode, task.vehicle_id, best.node_id,
                                        lam * task.size, sharers)
    except ChannelError as e:
        logger.warning(f"Vehicle {task.vehicle_id}: {mode.name} link to {best.node_id} "
                       f"unusable ({e}), falling back")
        return False
    if not math.isfinite(tx):
        return False
    grant = allocate(task, lam, node, tx)
    if grant.shortfall:
        release(node, grant)
        return False
    d.targets[mode] = best.node_id
    d.allocations[mode] = grant.f_alloc
    return True


# =============================================================================
# Exhaustive Oracle
# =============================================================================


def schedule_reward(
    decisions: Sequence[OffloadDecision],
    tasks: Sequence[Task],
    channel: "SlotChannel",
    cfg: "SimConfig",
) -> float:
    """Slot reward of scheduled decisions with every LUAV hovering in place."""
    outcomes = evaluate_decisions(decisions, tasks, channel, cfg)
    luavs = [n for n in channel.nodes.values() if n.kind is NodeKind.LUAV]
    speeds = [None if n.depleted else 0.0 for n in luavs]
    return slot_metrics(outcomes, speeds, cfg).reward


def _share_options(
    vehicle_id: int, mode: Mode, channel: "SlotChannel", cfg: "SimConfig"
) -> list[tuple[Mode, Optional[str]]]:
    options: list[tuple[Mode, Optional[str]]] = []
    for m in _CHAIN_REMOTE[_CHAIN_REMOTE.index(mode):]:
        nodes = reachable_nodes(vehicle_id, m, channel, cfg)
        options.extend((m, n.node_id) for n in sorted(nodes, key=lambda n: n.node_id))
    options.append((Mode.LOCAL, None))
    return options


def _build_placement(
    base: OffloadDecision, shares: list[tuple[Mode, float]],
    choice: Sequence[tuple[Mode, Optional[str]]],
) -> Optional[OffloadDecision]:
    ratios = np.zeros(NUM_MODES)
    ratios[Mode.LOCAL] = base.ratios[Mode.LOCAL]
    targets: dict[Mode, str] = {}
    for (_, lam), (mode, node_id) in zip(shares, choice):
        if node_id is not None:
            if targets.get(mode, node_id) != node_id:
                return None
            targets[mode] = node_id
        ratios[mode] += lam
    return OffloadDecision(vehicle_id=base.vehicle_id, ratios=ratios, targets=targets)


def _fits_some_order(
    placed: list[OffloadDecision],
    channel: "SlotChannel",
    cfg: "SimConfig",
) -> bool:
    """True if some task order grants every demand to an eligible node."""
    frac = cfg.scheduler.eligibility_fraction
    for order in itertools.permutations(placed):
        remaining = {nid: n.cpu_remaining for nid, n in channel.nodes.items()}
        ok = True
        for d in order:
            for mode, node_id in d.targets.items():
                node = channel.nodes[node_id]
                demand = d.allocations[mode]
                if remaining[node_id] / node.cpu_total <= frac or demand > remaining[node_id]:
                    ok = False
                    break
                remaining[node_id] -= demand
            if not ok:
                break
        if ok:
            return True
    return False


def brute_force_schedule(
    decisions: Sequence[OffloadDecision],
    tasks: Sequence[Task],
    channel: "SlotChannel",
    cfg: "SimConfig",
) -> BruteForceResult:
    """
    Exhaustively search share placements for the reward-optimal schedule.

    Every remote share may go to any reachable node of its own mode or of a
    later mode in the fallback chain, or stay local. Allocations are the exact
    deadline demand under the placement's final bandwidth shares, and a
    placement counts only if some task order serves it without violating
    eligibility or capacity. The node ledger is not modified.

    Raises:
        InstanceTooLargeError: Beyond 4 tasks, 4 computing nodes, or when the
            placement space exceeds BRUTE_FORCE_MAX_PLACEMENTS.
    """
    compute_nodes = [n for n in channel.nodes.values() if n.cpu_total > 0]
    if len(tasks) > BRUTE_FORCE_MAX_TASKS or len(compute_nodes) > BRUTE_FORCE_MAX_NODES:
        raise InstanceTooLargeError(
            f"Brute force supports at most {BRUTE_FORCE_MAX_TASKS} tasks and "
            f"{BRUTE_FORCE_MAX_NODES} nodes, got {len(tasks)} and {len(compute_nodes)}"
        )
    if not decisions:
        return BruteForceResult(decisions=[], reward=0.0, placements_checked=0)

    by_vehicle = {t.vehicle_id: t for t in tasks}
    per_vehicle_shares = []
    per_vehicle_options = []
    for d in decisions:
        shares = [(m, float(d.ratios[m])) for m in _CHAIN_REMOTE if d.ratios[m] > 0]
        per_vehicle_shares.append(shares)
        per_vehicle_options.append(
            [_share_options(d.vehicle_id, m, channel, cfg) for m, _ in shares]
        )
    total = math.prod(len(opts) for options in per_vehicle_options for opts in options)
    if total > BRUTE_FORCE_MAX_PLACEMENTS:
        raise InstanceTooLargeError(f"{total} placements exceed the enumeration limit")

    best: Optional[BruteForceResult] = None
    checked = 0
    per_vehicle_choices = [
        list(itertools.product(*options)) for options in per_vehicle_options
    ]
    for joint in itertools.product(*per_vehicle_choices):
        placed = [
            _build_placement(d, shares, choice)
            for d, shares, choice in zip(decisions, per_vehicle_shares, joint)
        ]
        if any(p is None for p in placed):
            continue
        checked += 1
        try:
            _exact_allocations(placed, by_vehicle, channel)
        except (ChannelError, CostError):
            continue
        if not _fits_some_order(placed, channel, cfg):
            continue
        try:
            reward = schedule_reward(placed, tasks, channel, cfg)
        except CostError:
            continue
        if best is None or reward > best.reward:
            best = BruteForceResult(decisions=placed, reward=reward, placements_checked=0)

    if best is None:
        # All-local is always feasible.
        placed = []
        for d in decisions:
            ratios = np.zeros(NUM_MODES)
            ratios[Mode.LOCAL] = 1.0
            placed.append(OffloadDecision(vehicle_id=d.vehicle_id, ratios=ratios))
        best = BruteForceResult(placed, schedule_reward(placed, tasks, channel, cfg), 0)
    best.placements_checked = checked
    return best


def _exact_allocations(
    placed: list[OffloadDecision], by_vehicle: dict[int, Task], channel: "SlotChannel"
) -> None:
    sharers = final_sharers(placed)
    for d in placed:
        task = by_vehicle[d.vehicle_id]
        for mode, node_id in d.targets.items():
            key = ("relay", HUAV_ID) if mode in RELAY_MODES else ("direct", node_id)
            lam = float(d.ratios[mode])
            tx = channel.transmission_delay(mode, d.vehicle_id, node_id,
                                            lam * task.size, sharers.get(key, 1))
            if not math.isfinite(tx):
                raise CostError(f"{mode.name} link to {node_id} is unusable")
            d.allocations[mode] = lam * task.cycles / time_budget(task, tx)
