"""
Deep Q-network baseline over a discretised action space.

The joint action is factorised into one head per entity so the output layer
grows linearly instead of as 7^I * 5^L:

    per vehicle   7 offloading templates (five pure modes, an even split,
                  half local / half LUAV)
    per LUAV      5 controls (hover, or half speed east / north / west / south)

Each head is trained with its own one-step TD target against a periodically
synced target network.

Example:
    >>> codec = TemplateCodec(cfg)
    >>> agent = DqnAgent(obs_dim, codec.head_sizes, cfg.agent, seed=0)
    >>> indices = agent.act(obs)
    >>> raw_action = codec.decode(indices)
"""

import copy
import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from hivec.agents.networks import MlpNet, ObservationScaler, check_finite, hard_update
from hivec.agents.replay import Batch
from hivec.config import AgentConfig, SimConfig
from hivec.domain import NUM_MODES

logger = logging.getLogger("hivec.agents.dqn")

# Raw offloading logits per template; raw = -1 maps to an exact zero share.
RATIO_TEMPLATES = np.array(
    [
        [1.0, -1.0, -1.0, -1.0, -1.0],  # all local
        [-1.0, 1.0, -1.0, -1.0, -1.0],  # all RSU
        [-1.0, -1.0, 1.0, -1.0, -1.0],  # all LUAV
        [-1.0, -1.0, -1.0, 1.0, -1.0],  # all HUAV-RSU
        [-1.0, -1.0, -1.0, -1.0, 1.0],  # all HUAV-BS
        [0.0, 0.0, 0.0, 0.0, 0.0],      # even split
        [1.0, -1.0, 1.0, -1.0, -1.0],   # half local, half LUAV
    ]
)

# Raw (heading, speed) per LUAV control.
LUAV_CONTROLS = np.array(
    [
        [-1.0, -1.0],  # hover
        [-1.0, 0.0],   # east
        [-0.5, 0.0],   # north
        [0.0, 0.0],    # west
        [0.5, 0.0],    # south
    ]
)


class TemplateCodec:
    """Translate per-head indices into the environment's raw action vector."""

    def __init__(self, cfg: SimConfig) -> None:
        self.num_vehicles = cfg.network.num_vehicles
        self.num_luavs = cfg.network.num_luavs
        self.head_sizes = (
            [len(RATIO_TEMPLATES)] * self.num_vehicles + [len(LUAV_CONTROLS)] * self.num_luavs
        )

    def decode(self, indices: Sequence[int]) -> np.ndarray:
        idx = [int(i) for i in indices]
        ratios = [RATIO_TEMPLATES[i] for i in idx[: self.num_vehicles]]
        controls = [LUAV_CONTROLS[i] for i in idx[self.num_vehicles:]]
        parts = ratios + controls
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts).astype(np.float64)

    @property
    def action_size(self) -> int:
        return NUM_MODES * self.num_vehicles + 2 * self.num_luavs


class FactorizedQNet(torch.nn.Module):
    """One shared body, one block of Q-values per head."""

    def __init__(self, obs_dim: int, head_sizes: Sequence[int], hidden: Sequence[int]) -> None:
        super().__init__()
        self.head_sizes = list(head_sizes)
        self.body = MlpNet([obs_dim, *hidden, sum(head_sizes)])

    def forward(self, obs: torch.Tensor) -> list[torch.Tensor]:
        return list(torch.split(self.body(obs), self.head_sizes, dim=-1))


def dqn_policy(
    qnet: FactorizedQNet,
    state: torch.Tensor,
    epsilon: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Epsilon-greedy index per head for one (scaled) observation.

    Each head independently explores with probability epsilon.
    """
    with torch.no_grad():
        heads = qnet(state.unsqueeze(0))
    indices = np.empty(len(heads), dtype=np.int64)
    for h, q in enumerate(heads):
        if rng.random() < epsilon:
            indices[h] = rng.integers(q.shape[-1])
        else:
            indices[h] = int(torch.argmax(q.squeeze(0)))
    return indices


@dataclass
class DqnLosses:
    td: float
    epsilon: float

    def as_dict(self) -> dict[str, float]:
        return {"td": self.td, "epsilon": self.epsilon}


class DqnAgent:
    """
    Factorised DQN with linear epsilon decay and hard target sync.

    Args:
        obs_dim: Observation length.
        head_sizes: Number of discrete choices per head.
        agent_cfg: Hyperparameters.
        scaler: Observation scaler; identity when omitted.
        seed: Seeds initialisation and exploration.
    """

    def __init__(
        self,
        obs_dim: int,
        head_sizes: Sequence[int],
        agent_cfg: AgentConfig,
        scaler: Optional[ObservationScaler] = None,
        seed: int = 0,
    ) -> None:
        self.cfg = agent_cfg
        self.scaler = scaler or ObservationScaler()
        self.head_sizes = list(head_sizes)
        torch.manual_seed(seed)
        self.q = FactorizedQNet(obs_dim, head_sizes, agent_cfg.hidden_sizes)
        self.q_target = copy.deepcopy(self.q)
        for p in self.q_target.parameters():
            p.requires_grad_(False)
        self.optimizer = torch.optim.Adam(self.q.parameters(), lr=agent_cfg.learning_rate)
        self.rng = np.random.default_rng(seed)
        self.steps = 0
        self.updates = 0

    @property
    def epsilon(self) -> float:
        """Linearly decayed exploration rate at the current step."""
        cfg = self.cfg
        frac = min(self.steps / max(cfg.epsilon_decay_steps, 1), 1.0)
        return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)

    def act(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        """Index per head; exploring calls advance the epsilon schedule."""
        state = torch.as_tensor(self.scaler(obs), dtype=torch.float32)
        if deterministic:
            return dqn_policy(self.q, state, 0.0, self.rng)
        indices = dqn_policy(self.q, state, self.epsilon, self.rng)
        self.steps += 1
        return indices

    def update(self, batch: Batch) -> DqnLosses:
        return dqn_update(self, batch)

    def state_dict(self) -> dict[str, Any]:
        return {"q": self.q.state_dict(), "q_target": self.q_target.state_dict()}

    def load_state_dict(self, state: dict[str, Any]) -> None:
        self.q.load_state_dict(state["q"])
        self.q_target.load_state_dict(state["q_target"])


def dqn_update(agent: DqnAgent, batch: Batch) -> DqnLosses:
    """
    One TD step over all heads: Q_h(s, a_h) -> r + gamma (1 - done) max Q_target_h(s').

    Raises:
        NonFiniteLossError: If the TD loss is NaN or infinite.
    """
    states = torch.as_tensor(agent.scaler(batch.states), dtype=torch.float32)
    next_states = torch.as_tensor(agent.scaler(batch.next_states), dtype=torch.float32)
    actions = torch.as_tensor(batch.actions, dtype=torch.int64)
    rewards = torch.as_tensor(batch.rewards, dtype=torch.float32)
    dones = torch.as_tensor(batch.dones, dtype=torch.float32)

    with torch.no_grad():
        next_heads = agent.q_target(next_states)
    heads = agent.q(states)
    losses = []
    for h, (q, q_next) in enumerate(zip(heads, next_heads)):
        target = rewards + agent.cfg.gamma * (1.0 - dones) * q_next.max(dim=-1).values
        chosen = q.gather(-1, actions[:, h: h + 1]).squeeze(-1)
        losses.append(F.mse_loss(chosen, target))
    loss = torch.stack(losses).mean()
    check_finite({"td": loss}, f"DQN update {agent.updates}")

    agent.optimizer.zero_grad()
    loss.backward()
    agent.optimizer.step()
    agent.updates += 1
    if agent.updates % agent.cfg.dqn_target_sync == 0:
        hard_update(agent.q_target, agent.q)
    return DqnLosses(td=float(loss), epsilon=agent.epsilon)
