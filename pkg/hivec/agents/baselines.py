"""
Agent kinds and the heuristic baselines compared against the proposed agent.

    sac         proposed: SAC policy + priority scheduler
    nopriority  SAC policy, scheduler serves tasks first-in first-out
    fixeduav    SAC policy, LUAV speeds forced to zero
    dqn         factorised DQN over discrete templates + priority scheduler
    random      uniform raw actions + priority scheduler
"""

import logging
from enum import Enum

import numpy as np

from hivec.domain import NUM_MODES

logger = logging.getLogger("hivec.agents.baselines")


class AgentKind(str, Enum):
    """Every policy the experiment runner can train or evaluate."""

    SAC = "sac"
    DQN = "dqn"
    NO_PRIORITY = "nopriority"
    FIXED_UAV = "fixeduav"
    RANDOM = "random"

    @property
    def uses_sac(self) -> bool:
        return self in (AgentKind.SAC, AgentKind.NO_PRIORITY, AgentKind.FIXED_UAV)

    @property
    def fifo(self) -> bool:
        """Whether the scheduler ignores priorities for this kind."""
        return self is AgentKind.NO_PRIORITY

    @classmethod
    def parse(cls, value: str) -> "AgentKind":
        try:
            return cls(value.strip().lower())
        except ValueError as e:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"Unknown agent '{value}', choose from: {choices}") from e


class RandomPolicy:
    """Uniform raw actions over [-1, 1]^act_dim."""

    def __init__(self, act_dim: int, rng: np.random.Generator) -> None:
        self.act_dim = act_dim
        self.rng = rng

    def act(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, size=self.act_dim)


def fix_luav_speed(raw: np.ndarray, num_vehicles: int) -> np.ndarray:
    """Copy of ``raw`` with every LUAV speed component at -1 (zero speed)."""
    fixed = np.array(raw, dtype=float, copy=True)
    fixed[NUM_MODES * num_vehicles + 1:: 2] = -1.0
    return fixed
