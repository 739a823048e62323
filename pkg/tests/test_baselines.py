"""
Unit tests for hivec/agents/baselines.py - agent kinds and heuristic policies.
"""

import pytest

import numpy as np
from scipy import stats

from hivec.agents.baselines import AgentKind, RandomPolicy, fix_luav_speed
from hivec.config import SimConfig
from hivec.services.environment import HivecEnv, action_size, map_action


class TestAgentKind:
    """Tests for AgentKind parsing and flags."""

    def test_parse_case_insensitive(self) -> None:
        """Test names are parsed regardless of case and whitespace."""
        assert AgentKind.parse(" SAC ") is AgentKind.SAC
        assert AgentKind.parse("NoPriority") is AgentKind.NO_PRIORITY

    def test_parse_unknown(self) -> None:
        """Test an unknown name lists the valid choices."""
        with pytest.raises(ValueError, match="fixeduav"):
            AgentKind.parse("ppo")

    def test_sac_family(self) -> None:
        """Test which kinds run on the SAC agent."""
        assert {k for k in AgentKind if k.uses_sac} == {
            AgentKind.SAC, AgentKind.NO_PRIORITY, AgentKind.FIXED_UAV,
        }

    def test_only_nopriority_is_fifo(self) -> None:
        """Test only the no-priority baseline ignores priorities."""
        assert [k for k in AgentKind if k.fifo] == [AgentKind.NO_PRIORITY]


class TestRandomPolicy:
    """Tests for the uniform random baseline."""

    def test_bounds_and_length(self) -> None:
        """Test actions are uniform draws in [-1, 1]."""
        policy = RandomPolicy(7, np.random.default_rng(0))
        actions = np.array([policy.act(np.zeros(3)) for _ in range(500)])
        assert actions.shape == (500, 7)
        assert actions.min() >= -1.0 and actions.max() <= 1.0
        assert abs(actions.mean()) < 0.05

    def test_uniform_ks(self) -> None:
        """Test 1e4 draws pass a KS test against U(-1, 1)."""
        policy = RandomPolicy(1, np.random.default_rng(12))
        draws = np.array([policy.act(np.zeros(1))[0] for _ in range(10_000)])
        assert stats.kstest(draws, stats.uniform(loc=-1.0, scale=2.0).cdf).pvalue > 0.01

    def test_reproducible(self) -> None:
        """Test equal seeds give equal actions."""
        a = RandomPolicy(4, np.random.default_rng(3)).act(np.zeros(1))
        b = RandomPolicy(4, np.random.default_rng(3)).act(np.zeros(1))
        assert np.array_equal(a, b)


class TestFixLuavSpeed:
    """Tests for the fixed-UAV action filter."""

    def test_speeds_forced_to_zero(self, tiny_cfg: SimConfig) -> None:
        """Test every LUAV ends up with zero speed while ratios are untouched."""
        raw = np.random.default_rng(0).uniform(-1, 1, action_size(tiny_cfg))
        fixed = fix_luav_speed(raw, tiny_cfg.network.num_vehicles)
        decisions, controls = map_action(fixed, tiny_cfg)
        original, _ = map_action(raw, tiny_cfg)
        assert all(c.speed == 0.0 for c in controls)
        for d, o in zip(decisions, original):
            assert np.array_equal(d.ratios, o.ratios)

    def test_input_not_modified(self, tiny_cfg: SimConfig) -> None:
        """Test the filter returns a copy."""
        raw = np.ones(action_size(tiny_cfg))
        fix_luav_speed(raw, tiny_cfg.network.num_vehicles)
        assert np.all(raw == 1.0)

    def test_luavs_stay_put_for_an_episode(self, tiny_cfg: SimConfig) -> None:
        """Test LUAV positions never change when every action is filtered."""
        env = HivecEnv(tiny_cfg)
        env.reset(seed=4)
        start = [luav.position.copy() for luav in env.state.luavs]
        rng = np.random.default_rng(4)
        done = False
        while not done:
            raw = rng.uniform(-1, 1, action_size(tiny_cfg))
            _, _, terminated, truncated, _ = env.step(
                fix_luav_speed(raw, tiny_cfg.network.num_vehicles))
            done = terminated or truncated
            for luav, pos in zip(env.state.luavs, start):
                assert np.array_equal(luav.position, pos)
