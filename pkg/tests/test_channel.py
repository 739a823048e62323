"""
Unit tests for hivec/services/channel.py - gains, rates and slot channel state.

Tests cover:
    - Ground and air path-loss gains
    - Shadowing distribution
    - Shannon rates and their monotonicity
    - Relay hop rates and the direct-RSU exclusion
    - SlotChannel bandwidth sharing and transmission delays
"""

import math
import pytest

import numpy as np
from scipy import stats

from hivec.config import SimConfig
from hivec.domain import Mode
from hivec.services.channel import (
    ChannelError,
    DegenerateGeometryError,
    InvalidNoiseError,
    InvalidRelayTargetError,
    SlotChannel,
    distance,
    g2g_gain,
    link_budget,
    link_rate,
    los_gain,
    relay_pair_rates,
    sample_shadowing,
)


# =============================================================================
# Gain Tests
# =============================================================================


class TestG2gGain:
    """Tests for the ground-to-ground NLoS gain."""

    def test_reference_value(self) -> None:
        """Test d=10, beta0=1e-5, alpha=3.5, xi=1 gives 3.1623e-9."""
        assert g2g_gain(10.0, 1e-5, 3.5, 1.0) == pytest.approx(3.1623e-9, rel=1e-4)

    def test_unit_distance(self) -> None:
        """Test the gain at 1 m is beta0 times the shadowing."""
        assert g2g_gain(1.0, 1e-5, 3.5, 2.0) == pytest.approx(2e-5)

    def test_decreasing_in_distance(self) -> None:
        """Test the gain falls with distance."""
        assert g2g_gain(50.0, 1e-5, 3.5, 1.0) > g2g_gain(60.0, 1e-5, 3.5, 1.0)

    def test_zero_distance(self) -> None:
        """Test co-located nodes raise DegenerateGeometryError."""
        with pytest.raises(DegenerateGeometryError):
            g2g_gain(0.0, 1e-5, 3.5, 1.0)

    def test_nonpositive_shadowing(self) -> None:
        """Test a zero shadowing sample is rejected."""
        with pytest.raises(ChannelError):
            g2g_gain(10.0, 1e-5, 3.5, 0.0)

    @pytest.mark.parametrize("d", [1.0, 7.5, 120.0, 1500.0])
    def test_unshadowed_matches_los(self, d: float) -> None:
        """Test xi=1 and alpha1=alpha2 reduce the ground gain to the air gain."""
        assert g2g_gain(d, 1e-5, 2.8, 1.0) == pytest.approx(los_gain(d, 1e-5, 2.8), rel=1e-12)


class TestLosGain:
    """Tests for the LoS air gain."""

    def test_reference_value(self) -> None:
        """Test d=100, beta0=1e-5, alpha=2 gives 1e-9."""
        assert los_gain(100.0, 1e-5, 2.0) == pytest.approx(1e-9)

    def test_huav_overhead(self, default_cfg: SimConfig) -> None:
        """Test a HUAV 100 m straight above a vehicle has gain 1e-9."""
        ch = default_cfg.channel
        d = distance((0.0, 0.0, 0.0), (0.0, 0.0, default_cfg.network.huav_altitude))
        assert los_gain(d, ch.beta0, ch.alpha_los) == pytest.approx(1e-9)

    def test_zero_distance(self) -> None:
        """Test co-located nodes raise DegenerateGeometryError."""
        with pytest.raises(DegenerateGeometryError):
            los_gain(0.0, 1e-5, 2.0)


class TestSampleShadowing:
    """Tests for log-normal shadowing samples."""

    def test_zero_sigma_is_deterministic(self) -> None:
        """Test sigma=0 returns exactly 10^(mu/10)."""
        rng = np.random.default_rng(0)
        assert sample_shadowing(3.0, 0.0, rng) == pytest.approx(10 ** 0.3)

    def test_negative_sigma(self) -> None:
        """Test a negative sigma is rejected."""
        with pytest.raises(ChannelError):
            sample_shadowing(0.0, -1.0, np.random.default_rng(0))

    def test_distribution_in_db(self) -> None:
        """Test samples are normal in dB with the requested moments (KS test)."""
        rng = np.random.default_rng(1)
        samples_db = np.array(
            [10.0 * math.log10(sample_shadowing(0.0, 4.0, rng)) for _ in range(2000)]
        )
        result = stats.kstest(samples_db, "norm", args=(0.0, 4.0))
        assert result.pvalue > 0.01


# =============================================================================
# Rate Tests
# =============================================================================


class TestLinkRate:
    """Tests for the Shannon rate."""

    def test_reference_value(self) -> None:
        """Test B=1e6, P=0.1, h=1e-9, Pn=1e-14 gives about 1.32879e7 bit/s."""
        assert link_rate(1e6, 0.1, 1e-9, 1e-14) == pytest.approx(1.32879e7, rel=1e-5)

    def test_zero_gain(self) -> None:
        """Test a zero gain gives a zero rate."""
        assert link_rate(1e6, 0.1, 0.0, 1e-14) == 0.0

    def test_zero_noise(self) -> None:
        """Test zero noise raises InvalidNoiseError."""
        with pytest.raises(InvalidNoiseError):
            link_rate(1e6, 0.1, 1e-9, 0.0)

    def test_monotone(self) -> None:
        """Test the rate grows with bandwidth, power and gain."""
        base = link_rate(1e6, 0.1, 1e-9, 1e-14)
        assert link_rate(2e6, 0.1, 1e-9, 1e-14) > base
        assert link_rate(1e6, 0.2, 1e-9, 1e-14) > base
        assert link_rate(1e6, 0.1, 2e-9, 1e-14) > base

    def test_link_budget_keeps_terms(self) -> None:
        """Test link_budget records every input and the rate."""
        budget = link_budget(1e6, 0.1, 1e-9, 1e-14)
        assert budget.bandwidth == 1e6
        assert budget.rate == pytest.approx(link_rate(1e6, 0.1, 1e-9, 1e-14))


class TestDistance:
    """Tests for the clamped 3-D distance."""

    def test_three_dimensional(self) -> None:
        """Test altitude is part of the distance."""
        assert distance((0, 0, 0), (30, 0, 40)) == pytest.approx(50.0)

    def test_clamp(self) -> None:
        """Test distances below the minimum are clamped."""
        assert distance((1, 1, 0), (1, 1, 0), min_distance=1.0) == 1.0


class TestRelayPairRates:
    """Tests for the two relay hops."""

    def test_direct_rsu_rejected(self, default_cfg: SimConfig) -> None:
        """Test relaying to the vehicle's own RSU is rejected."""
        with pytest.raises(InvalidRelayTargetError):
            relay_pair_rates(
                (0, 0, 0), (0, 0, 100), (10, 0, 0), default_cfg,
                target_id="rsu-0", direct_rsu_id="rsu-0",
            )

    def test_hop_powers(self, default_cfg: SimConfig) -> None:
        """Test hop 1 uses the vehicle's power and hop 2 the HUAV's."""
        ch = default_cfg.channel
        r1, r2 = relay_pair_rates((0, 0, 0), (0, 0, 100), (0, 0, 0), default_cfg)
        assert r1 == pytest.approx(link_rate(ch.bandwidth_huav_access, ch.vehicle_tx_power,
                                             1e-9, ch.noise_power))
        assert r2 == pytest.approx(link_rate(ch.bandwidth_huav_backhaul, ch.huav_tx_power,
                                             1e-9, ch.noise_power))
        assert r2 > r1


# =============================================================================
# SlotChannel Tests
# =============================================================================


class TestSlotChannel:
    """Tests for the per-slot channel state."""

    def test_direct_rsu_is_nearest(self, line_channel: SlotChannel) -> None:
        """Test each vehicle's direct RSU is the nearest one."""
        assert line_channel.direct_rsu(0) == "rsu-0"
        assert line_channel.direct_rsu(1) == "rsu-1"

    def test_shadowing_shape(self, line_channel: SlotChannel) -> None:
        """Test one shadowing factor per vehicle-RSU pair."""
        assert line_channel.shadowing.shape == (2, 2)
        assert np.allclose(line_channel.shadowing, 1.0)

    def test_rsu_rate_matches_formula(self, line_channel: SlotChannel) -> None:
        """Test the RSU uplink is the NLoS Shannon rate."""
        ch = line_channel.cfg.channel
        h = g2g_gain(50.0, ch.beta0, ch.alpha_nlos, 1.0)
        expected = link_rate(ch.bandwidth_rsu, ch.vehicle_tx_power, h, ch.noise_power)
        assert line_channel.direct_rate(0, "rsu-0") == pytest.approx(expected)

    def test_sharing_reduces_rate(self, line_channel: SlotChannel) -> None:
        """Test splitting bandwidth between two users halves the rate."""
        alone = line_channel.direct_rate(0, "luav-0", sharers=1)
        shared = line_channel.direct_rate(0, "luav-0", sharers=2)
        assert shared == pytest.approx(alone / 2.0)

    def test_no_direct_link_to_bs(self, line_channel: SlotChannel) -> None:
        """Test a vehicle has no direct uplink to the BS."""
        with pytest.raises(ChannelError):
            line_channel.direct_rate(0, "bs")

    def test_relay_delay_is_two_hops(self, line_channel: SlotChannel) -> None:
        """Test relay transmission delay is the sum of both hop delays."""
        r1, r2 = line_channel.relay_rates(0, "bs")
        delay = line_channel.transmission_delay(Mode.HUAV_BS, 0, "bs", 1e6)
        assert delay == pytest.approx(1e6 / r1 + 1e6 / r2)

    def test_relay_to_direct_rsu_rejected(self, line_channel: SlotChannel) -> None:
        """Test the HUAV-RSU relay cannot target the direct RSU."""
        with pytest.raises(InvalidRelayTargetError):
            line_channel.relay_rates(0, "rsu-0")

    def test_zero_bits(self, line_channel: SlotChannel) -> None:
        """Test moving no data takes no time."""
        assert line_channel.transmission_delay(Mode.RSU, 0, "rsu-0", 0.0) == 0.0

    def test_same_seed_same_shadowing(self, default_cfg: SimConfig, line_channel: SlotChannel) -> None:
        """Test shadowing is reproducible from the generator seed."""
        args = (line_channel.vehicle_positions, line_channel.nodes, line_channel.huav_position)
        a = SlotChannel(default_cfg, *args, np.random.default_rng(5))
        b = SlotChannel(default_cfg, *args, np.random.default_rng(5))
        assert np.array_equal(a.shadowing, b.shadowing)
