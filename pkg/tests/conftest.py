"""
Pytest configuration and shared fixtures for hivec tests.

This module provides reusable fixtures: validated configurations at three
scales, tasks, nodes and a hand-placed slot channel for exact oracles.
"""

import pytest
from pathlib import Path
from typing import Any, Callable

import numpy as np

from hivec.config import SimConfig, build_config, validate_config
from hivec.domain import NodeKind, NodeState, Task
from hivec.services.channel import SlotChannel

REPO_ROOT = Path(__file__).resolve().parent.parent


# =============================================================================
# Environment Isolation
# =============================================================================


@pytest.fixture(autouse=True)
def isolate_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Remove any HIVEC_* variables inherited from the developer's shell."""
    import os

    for key in list(os.environ):
        if key.startswith("HIVEC_"):
            monkeypatch.delenv(key, raising=False)


# =============================================================================
# Configuration Fixtures
# =============================================================================


@pytest.fixture
def default_cfg() -> SimConfig:
    """The study's parameter list, validated."""
    return validate_config(SimConfig())


@pytest.fixture
def tiny_json() -> dict[str, Any]:
    """A small, fast configuration as a JSON-compatible dict."""
    return {
        "network": {
            "num_vehicles": 3, "num_rsus": 2, "num_luavs": 1, "num_slots": 5, "horizon": 5.0,
        },
        "task": {"size_min": 1e6, "size_max": 6e6},
        "agent": {
            "hidden_sizes": [16, 16],
            "batch_size": 8,
            "buffer_capacity": 200,
            "warmup_steps": 10,
            "epsilon_decay_steps": 50,
            "dqn_target_sync": 5,
        },
        "rng_seed": 11,
    }


@pytest.fixture
def tiny_cfg(tiny_json: dict[str, Any]) -> SimConfig:
    """Three vehicles, two RSUs, one LUAV, five slots."""
    return validate_config(build_config(tiny_json))


@pytest.fixture
def temp_config_file(tmp_path: Path, tiny_json: dict[str, Any]) -> Path:
    """Write the tiny configuration to a temporary JSON file."""
    import json

    config_path = tmp_path / "tiny.json"
    with open(config_path, "w") as f:
        json.dump(tiny_json, f)
    return config_path


@pytest.fixture
def desk_config_path() -> Path:
    return REPO_ROOT / "configs" / "desk.json"


@pytest.fixture
def default_config_path() -> Path:
    return REPO_ROOT / "configs" / "default.json"


# =============================================================================
# Domain Fixtures
# =============================================================================


@pytest.fixture
def make_task() -> Callable[..., Task]:
    """Factory for tasks with small, feasible defaults."""

    def _make(
        vehicle_id: int = 0,
        size: float = 1e6,
        cycles: float = 1e8,
        deadline: float = 1.0,
        priority: int = 1,
        arrival: int = 0,
    ) -> Task:
        return Task(
            vehicle_id=vehicle_id,
            size=size,
            cycles=cycles,
            deadline=deadline,
            priority=priority,
            arrival=arrival,
        )

    return _make


@pytest.fixture
def make_node() -> Callable[..., NodeState]:
    """Factory for computing nodes."""

    def _make(
        node_id: str,
        kind: NodeKind,
        position: tuple[float, float, float],
        cpu: float = 8e9,
        remaining: float | None = None,
    ) -> NodeState:
        return NodeState(
            node_id=node_id,
            kind=kind,
            position=np.asarray(position, dtype=float),
            cpu_total=cpu,
            cpu_remaining=cpu if remaining is None else remaining,
            kappa=1e-28,
        )

    return _make


@pytest.fixture
def quiet_cfg(default_cfg: SimConfig) -> SimConfig:
    """Default config without shadowing, so ground gains are deterministic."""
    from dataclasses import replace

    return validate_config(
        replace(default_cfg, channel=replace(default_cfg.channel, shadow_sigma_db=0.0))
    )


@pytest.fixture
def line_channel(
    quiet_cfg: SimConfig, make_node: Callable[..., NodeState]
) -> SlotChannel:
    """
    Two vehicles on the x axis with two RSUs, one LUAV and the BS nearby.

    vehicle-0 at (100, 0), vehicle-1 at (300, 0); rsu-0 at (150, 0),
    rsu-1 at (400, 0), luav-0 above (120, 0), bs at the origin, HUAV above
    (200, 0).
    """
    nodes = {
        "rsu-0": make_node("rsu-0", NodeKind.RSU, (150.0, 0.0, 0.0), cpu=8e9),
        "rsu-1": make_node("rsu-1", NodeKind.RSU, (400.0, 0.0, 0.0), cpu=8e9),
        "luav-0": make_node("luav-0", NodeKind.LUAV, (120.0, 0.0, 20.0), cpu=5e9),
        "bs": make_node("bs", NodeKind.BS, (0.0, 0.0, 0.0), cpu=10e9),
    }
    vehicles = np.array([[100.0, 0.0, 0.0], [300.0, 0.0, 0.0]])
    return SlotChannel(
        quiet_cfg, vehicles, nodes, np.array([200.0, 0.0, 100.0]), np.random.default_rng(0)
    )
