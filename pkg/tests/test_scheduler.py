"""
Unit tests for hivec/services/scheduler.py - priority scheduling layer.

Tests cover:
    - Task ordering by priority or arrival
    - Node scoring and eligibility
    - Demand-based allocation and shortfall
    - Fallback chain and mass conservation
    - Exhaustive oracle on small instances
"""

import pytest
from dataclasses import replace
from typing import Callable

import numpy as np

from hivec.config import SimConfig, validate_config
from hivec.domain import Mode, NodeKind, NodeState, OffloadDecision, Task
from hivec.services.channel import SlotChannel
from hivec.services.cost import final_sharers
from hivec.services.environment import HivecEnv, map_action
from hivec.services.scheduler import (
    Candidate,
    InstanceTooLargeError,
    SchedulingError,
    allocate,
    brute_force_schedule,
    eligible_nodes,
    estimate_sharers,
    release,
    schedule,
    schedule_reward,
    score_node,
    sort_tasks,
    time_budget,
)


def _decision(vid: int, ratios: list[float]) -> OffloadDecision:
    return OffloadDecision(vehicle_id=vid, ratios=np.array(ratios, dtype=float))


# =============================================================================
# Ordering Tests
# =============================================================================


class TestSortTasks:
    """Tests for task ordering."""

    def test_priority_then_deadline(self, make_task: Callable[..., Task]) -> None:
        """Test higher priority first, then the earlier deadline."""
        tasks = [
            make_task(vehicle_id=0, priority=1, deadline=0.2),
            make_task(vehicle_id=1, priority=3, deadline=0.9),
            make_task(vehicle_id=2, priority=3, deadline=0.3),
        ]
        assert [t.vehicle_id for t in sort_tasks(tasks)] == [2, 1, 0]

    def test_ties_by_vehicle_id(self, make_task: Callable[..., Task]) -> None:
        """Test identical keys are ordered by vehicle id."""
        tasks = [make_task(vehicle_id=v, priority=2, deadline=0.5) for v in (4, 1, 3)]
        assert [t.vehicle_id for t in sort_tasks(tasks)] == [1, 3, 4]

    def test_fifo(self, make_task: Callable[..., Task]) -> None:
        """Test FIFO order follows arrival and ignores priority."""
        tasks = [
            make_task(vehicle_id=0, priority=3, arrival=2),
            make_task(vehicle_id=1, priority=1, arrival=0),
            make_task(vehicle_id=2, priority=2, arrival=1),
        ]
        assert [t.vehicle_id for t in sort_tasks(tasks, fifo=True)] == [1, 2, 0]

    def test_empty(self) -> None:
        """Test an empty slot sorts to an empty list."""
        assert sort_tasks([]) == []


# =============================================================================
# Scoring and Eligibility Tests
# =============================================================================


class TestScoreNode:
    """Tests for the node score."""

    def test_reference_value(self) -> None:
        """Test alpha=beta=0.5, d=100, remain=0.5 scores 0.255."""
        c = Candidate(node_id="rsu-0", distance=100.0, remain_fraction=0.5, score=0.0)
        assert score_node(c, 0.5, 0.5) == pytest.approx(0.255)

    def test_more_remaining_wins(self) -> None:
        """Test at equal distance the node with more CPU left scores higher."""
        a = Candidate("a", 100.0, 0.6, 0.0)
        b = Candidate("b", 100.0, 0.4, 0.0)
        assert score_node(a, 0.5, 0.5) > score_node(b, 0.5, 0.5)

    def test_closer_wins(self) -> None:
        """Test at equal remaining CPU the closer node scores higher."""
        a = Candidate("a", 50.0, 0.5, 0.0)
        b = Candidate("b", 150.0, 0.5, 0.0)
        assert score_node(a, 0.5, 0.5) > score_node(b, 0.5, 0.5)

    @pytest.mark.parametrize("k", [0.01, 3.0, 1e4])
    def test_joint_scaling_keeps_argmax(self, k: float) -> None:
        """Test multiplying alpha_s and beta_s by one constant never changes the best node."""
        rng = np.random.default_rng(int(k * 100))
        for _ in range(200):
            candidates = [
                Candidate(f"n{j}", float(rng.uniform(0.5, 800.0)), float(rng.uniform()), 0.0)
                for j in range(int(rng.integers(2, 7)))
            ]
            alpha, beta = float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.1, 1.0))
            base = [score_node(c, alpha, beta) for c in candidates]
            scaled = [score_node(c, k * alpha, k * beta) for c in candidates]
            assert int(np.argmax(scaled)) == int(np.argmax(base))


class TestEligibleNodes:
    """Tests for candidate collection."""

    def test_best_first(self, line_channel: SlotChannel) -> None:
        """Test candidates are sorted by descending score."""
        candidates = eligible_nodes(0, Mode.RSU, line_channel, line_channel.cfg)
        assert [c.node_id for c in candidates] == ["rsu-0", "rsu-1"]
        assert candidates[0].score >= candidates[1].score

    def test_threshold_is_strict(self, line_channel: SlotChannel) -> None:
        """Test a node with exactly the eligibility fraction left is excluded."""
        node = line_channel.nodes["rsu-0"]
        node.cpu_remaining = 0.3 * node.cpu_total
        candidates = eligible_nodes(0, Mode.RSU, line_channel, line_channel.cfg)
        assert [c.node_id for c in candidates] == ["rsu-1"]

    def test_relay_excludes_direct_rsu(self, line_channel: SlotChannel) -> None:
        """Test HUAV-RSU never offers the vehicle's direct RSU."""
        candidates = eligible_nodes(0, Mode.HUAV_RSU, line_channel, line_channel.cfg)
        assert [c.node_id for c in candidates] == ["rsu-1"]

    def test_depleted_luav_excluded(self, line_channel: SlotChannel) -> None:
        """Test a landed LUAV is never a candidate."""
        line_channel.nodes["luav-0"].depleted = True
        assert eligible_nodes(0, Mode.LUAV, line_channel, line_channel.cfg) == []

    def test_out_of_coverage(self, line_channel: SlotChannel) -> None:
        """Test RSUs beyond the coverage radius are skipped."""
        cfg = line_channel.cfg
        line_channel.cfg = replace(cfg, network=replace(cfg.network, rsu_coverage=100.0))
        candidates = eligible_nodes(0, Mode.RSU, line_channel, line_channel.cfg)
        assert [c.node_id for c in candidates] == ["rsu-0"]

    def test_local_has_no_candidates(self, line_channel: SlotChannel) -> None:
        """Test asking for LOCAL candidates is an error."""
        with pytest.raises(SchedulingError):
            eligible_nodes(0, Mode.LOCAL, line_channel, line_channel.cfg)


# =============================================================================
# Allocation Tests
# =============================================================================


class TestAllocate:
    """Tests for demand-based CPU grants."""

    def test_reference_value(self, make_task: Callable[..., Task],
                             make_node: Callable[..., NodeState]) -> None:
        """Test lambda*C=1e8 in 0.1 s from 2e9 free grants 1e9 and leaves 1e9."""
        node = make_node("rsu-0", NodeKind.RSU, (0, 0, 0), cpu=8e9, remaining=2e9)
        grant = allocate(make_task(cycles=1e8, deadline=0.1), 1.0, node)
        assert grant.f_alloc == pytest.approx(1e9)
        assert not grant.shortfall
        assert node.cpu_remaining == pytest.approx(1e9)

    def test_zero_share(self, make_task: Callable[..., Task],
                        make_node: Callable[..., NodeState]) -> None:
        """Test a zero share takes nothing."""
        node = make_node("rsu-0", NodeKind.RSU, (0, 0, 0))
        grant = allocate(make_task(), 0.0, node)
        assert grant.f_alloc == 0.0
        assert node.cpu_remaining == node.cpu_total

    def test_shortfall(self, make_task: Callable[..., Task],
                       make_node: Callable[..., NodeState]) -> None:
        """Test demand above the free CPU is capped and flagged."""
        node = make_node("rsu-0", NodeKind.RSU, (0, 0, 0), cpu=8e9, remaining=5e8)
        grant = allocate(make_task(cycles=1e8, deadline=0.1), 1.0, node)
        assert grant.shortfall
        assert grant.f_alloc == pytest.approx(5e8)
        assert node.cpu_remaining == pytest.approx(0.0)
        release(node, grant)
        assert node.cpu_remaining == pytest.approx(5e8)

    def test_time_budget_floor(self, make_task: Callable[..., Task]) -> None:
        """Test the compute budget never drops below 10% of the deadline."""
        task = make_task(deadline=0.5)
        assert time_budget(task, 0.2) == pytest.approx(0.3)
        assert time_budget(task, 0.9) == pytest.approx(0.05)


class TestEstimateSharers:
    """Tests for the pre-scheduling bandwidth contention bound."""

    def test_chain_prefix(self) -> None:
        """Test RSU counts vehicles with LUAV or RSU mass, relays count any remote mass."""
        decisions = [
            _decision(0, [0.5, 0.0, 0.5, 0.0, 0.0]),
            _decision(1, [0.5, 0.5, 0.0, 0.0, 0.0]),
            _decision(2, [0.0, 0.0, 0.0, 0.0, 1.0]),
            _decision(3, [1.0, 0.0, 0.0, 0.0, 0.0]),
        ]
        counts = estimate_sharers(decisions)
        assert counts[Mode.LUAV] == 1
        assert counts[Mode.RSU] == 2
        assert counts[Mode.HUAV_RSU] == 3
        assert counts[Mode.HUAV_BS] == 3

    def test_eps_share_counts_like_final_sharers(self) -> None:
        """Test a tiny RSU share is counted before and after scheduling alike."""
        tiny = 1e-6
        decisions = [
            _decision(0, [1.0 - tiny, tiny, 0.0, 0.0, 0.0]),
            _decision(1, [0.0, 1.0, 0.0, 0.0, 0.0]),
        ]
        assert estimate_sharers(decisions)[Mode.RSU] == 2
        for d in decisions:
            d.targets[Mode.RSU] = "rsu-0"
        assert final_sharers(decisions)[("direct", "rsu-0")] == 2


# =============================================================================
# schedule Tests
# =============================================================================


class TestSchedule:
    """Tests for the greedy scheduler."""

    def test_direct_placement(self, line_channel: SlotChannel,
                              make_task: Callable[..., Task]) -> None:
        """Test an RSU share goes to the best RSU with a CPU grant."""
        [d] = schedule([_decision(0, [0.5, 0.5, 0, 0, 0])], [make_task(vehicle_id=0)],
                       line_channel, line_channel.cfg)
        assert d.targets == {Mode.RSU: "rsu-0"}
        assert d.allocations[Mode.RSU] > 0
        node = line_channel.nodes["rsu-0"]
        assert node.cpu_remaining == pytest.approx(node.cpu_total - d.allocations[Mode.RSU])

    def test_input_not_mutated(self, line_channel: SlotChannel,
                               make_task: Callable[..., Task]) -> None:
        """Test the caller's decisions keep their ratios."""
        original = _decision(0, [0.0, 0.0, 1.0, 0.0, 0.0])
        line_channel.nodes["luav-0"].cpu_remaining = 0.0
        schedule([original], [make_task(vehicle_id=0)], line_channel, line_channel.cfg)
        assert original.ratios[Mode.LUAV] == 1.0
        assert original.targets == {}

    def test_luav_falls_back_to_rsu(self, line_channel: SlotChannel,
                                    make_task: Callable[..., Task]) -> None:
        """Test a LUAV share moves to RSU when the LUAV has no CPU left."""
        line_channel.nodes["luav-0"].cpu_remaining = 0.0
        [d] = schedule([_decision(0, [0.0, 0.0, 1.0, 0.0, 0.0])], [make_task(vehicle_id=0)],
                       line_channel, line_channel.cfg)
        assert d.ratios[Mode.LUAV] == 0.0
        assert d.ratios[Mode.RSU] == pytest.approx(1.0)
        assert d.targets == {Mode.RSU: "rsu-0"}

    def test_everything_falls_to_local(self, line_channel: SlotChannel,
                                       make_task: Callable[..., Task]) -> None:
        """Test mass reaches LOCAL when no node has CPU, and is conserved."""
        for node in line_channel.nodes.values():
            node.cpu_remaining = 0.0
        [d] = schedule([_decision(0, [0.0, 0.25, 0.25, 0.25, 0.25])],
                       [make_task(vehicle_id=0)], line_channel, line_channel.cfg)
        assert d.ratios[Mode.LOCAL] == pytest.approx(1.0)
        assert d.ratio_sum == pytest.approx(1.0)
        assert d.targets == {}

    def test_priority_wins_contention(self, line_channel: SlotChannel,
                                      make_task: Callable[..., Task]) -> None:
        """Test the higher-priority task gets the scarce LUAV."""
        tasks = [
            make_task(vehicle_id=0, cycles=3e9, priority=1, arrival=0),
            make_task(vehicle_id=1, cycles=3e9, priority=3, arrival=1),
        ]
        decisions = [_decision(0, [0, 0, 1, 0, 0]), _decision(1, [0, 0, 1, 0, 0])]
        d0, d1 = schedule(decisions, tasks, line_channel, line_channel.cfg, fifo=False)
        assert d1.targets.get(Mode.LUAV) == "luav-0"
        assert Mode.LUAV not in d0.targets
        assert d0.ratios[Mode.RSU] == pytest.approx(1.0)

    def test_fifo_serves_arrival_order(self, line_channel: SlotChannel,
                                       make_task: Callable[..., Task]) -> None:
        """Test FIFO order gives the scarce LUAV to the first arrival."""
        tasks = [
            make_task(vehicle_id=0, cycles=3e9, priority=1, arrival=0),
            make_task(vehicle_id=1, cycles=3e9, priority=3, arrival=1),
        ]
        decisions = [_decision(0, [0, 0, 1, 0, 0]), _decision(1, [0, 0, 1, 0, 0])]
        d0, d1 = schedule(decisions, tasks, line_channel, line_channel.cfg, fifo=True)
        assert d0.targets.get(Mode.LUAV) == "luav-0"
        assert Mode.LUAV not in d1.targets

    def test_capacity_respected(self, line_channel: SlotChannel,
                                make_task: Callable[..., Task]) -> None:
        """Test grants per node never exceed its CPU."""
        tasks = [make_task(vehicle_id=v, cycles=4e9) for v in (0, 1)]
        decisions = [_decision(v, [0, 0.5, 0.5, 0, 0]) for v in (0, 1)]
        scheduled = schedule(decisions, tasks, line_channel, line_channel.cfg)
        granted: dict[str, float] = {}
        for d in scheduled:
            for mode, f in d.allocations.items():
                granted[d.targets[mode]] = granted.get(d.targets[mode], 0.0) + f
        for node_id, total in granted.items():
            assert total <= line_channel.nodes[node_id].cpu_total + 1e-6


class TestScheduleOnRandomSlots:
    """Constraint checks over random slots of the default world."""

    @pytest.mark.integration
    def test_mass_and_capacity(self, tiny_cfg: SimConfig) -> None:
        """Test mass conservation and capacity over random actions."""
        env = HivecEnv(tiny_cfg)
        rng = np.random.default_rng(4)
        for seed in range(20):
            env.reset(seed=seed)
            state = env.state
            decisions, _ = map_action(rng.uniform(-1, 1, env.action_space.shape), tiny_cfg)
            nodes = state.computing_nodes()
            channel = SlotChannel(tiny_cfg, state.vehicle_positions(), nodes,
                                  state.huav.position, rng)
            scheduled = schedule(decisions, state.tasks, channel, tiny_cfg)
            for before, after in zip(decisions, scheduled):
                assert after.ratio_sum == pytest.approx(1.0, abs=1e-9)
                assert before.ratios[Mode.LOCAL] <= after.ratios[Mode.LOCAL] + 1e-12
            for node in nodes.values():
                assert node.cpu_remaining >= -1e-6


# =============================================================================
# Exhaustive Oracle Tests
# =============================================================================


class TestBruteForce:
    """Tests for the exhaustive placement oracle."""

    def test_too_many_tasks(self, line_channel: SlotChannel,
                            make_task: Callable[..., Task]) -> None:
        """Test instances beyond four tasks are refused."""
        tasks = [make_task(vehicle_id=v % 2) for v in range(5)]
        decisions = [_decision(v % 2, [1, 0, 0, 0, 0]) for v in range(5)]
        with pytest.raises(InstanceTooLargeError):
            brute_force_schedule(decisions, tasks, line_channel, line_channel.cfg)

    def test_beats_all_local(self, line_channel: SlotChannel,
                             make_task: Callable[..., Task]) -> None:
        """Test the optimum is at least as good as running everything locally."""
        tasks = [make_task(vehicle_id=0, cycles=5e8, deadline=0.5),
                 make_task(vehicle_id=1, cycles=5e8, deadline=0.5)]
        decisions = [_decision(0, [0.2, 0.4, 0.4, 0, 0]), _decision(1, [0.2, 0.2, 0.2, 0.2, 0.2])]
        best = brute_force_schedule(decisions, tasks, line_channel, line_channel.cfg)
        local = [_decision(0, [1, 0, 0, 0, 0]), _decision(1, [1, 0, 0, 0, 0])]
        assert best.reward >= schedule_reward(local, tasks, line_channel, line_channel.cfg) - 1e-12
        assert best.placements_checked > 0
        for d in best.decisions:
            assert d.ratio_sum == pytest.approx(1.0)
        assert best.reward == pytest.approx(
            schedule_reward(best.decisions, tasks, line_channel, line_channel.cfg)
        )

    def test_ledger_untouched(self, line_channel: SlotChannel,
                              make_task: Callable[..., Task]) -> None:
        """Test the search does not consume CPU from the nodes."""
        before = {nid: n.cpu_remaining for nid, n in line_channel.nodes.items()}
        brute_force_schedule([_decision(0, [0.5, 0.5, 0, 0, 0])], [make_task(vehicle_id=0)],
                             line_channel, line_channel.cfg)
        assert {nid: n.cpu_remaining for nid, n in line_channel.nodes.items()} == before

    @pytest.mark.slow
    def test_greedy_close_to_optimum(self, make_node: Callable[..., NodeState]) -> None:
        """Test greedy reaches 90% of the optimum on 95% of small random instances."""
        cfg = validate_config(replace(SimConfig(), task=replace(
            SimConfig().task, size_min=1e6, size_max=6e6)))
        rng = np.random.default_rng(2024)
        good = 0
        trials = 200
        for _ in range(trials):
            n_tasks = int(rng.integers(1, 5))
            nodes = {
                "rsu-0": make_node("rsu-0", NodeKind.RSU, (900.0, 1000.0, 0.0), cpu=8e9),
                "rsu-1": make_node("rsu-1", NodeKind.RSU, (1100.0, 1000.0, 0.0), cpu=8e9),
                "luav-0": make_node("luav-0", NodeKind.LUAV,
                                    (*rng.uniform(800, 1200, 2), 20.0), cpu=5e9),
                "bs": make_node("bs", NodeKind.BS, (0.0, 0.0, 0.0), cpu=10e9),
            }
            vehicles = np.column_stack([rng.uniform(800, 1200, (n_tasks, 2)),
                                        np.zeros(n_tasks)])
            channel = SlotChannel(cfg, vehicles, nodes, np.array([1000.0, 1000.0, 100.0]), rng)
            tasks = [
                Task(vehicle_id=i, size=float(s), cycles=100.0 * float(s),
                     deadline=float(rng.uniform(0.1, 1.0)), priority=int(rng.integers(1, 4)))
                for i, s in enumerate(rng.uniform(1e6, 6e6, n_tasks))
            ]
            decisions = [_decision(i, rng.dirichlet(np.ones(5))) for i in range(n_tasks)]
            best = brute_force_schedule(decisions, tasks, channel, cfg)
            greedy = schedule(decisions, tasks, channel, cfg)
            reward = schedule_reward(greedy, tasks, channel, cfg)
            if reward >= best.reward - 0.1 * abs(best.reward) - 1e-9:
                good += 1
        assert good >= 0.95 * trials
