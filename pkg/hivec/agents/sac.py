"""
Soft actor-critic agent, the upper decision layer.

The HUAV's policy outputs one raw vector in [-1, 1]^(5I + 2L) per slot:
offloading logits for every vehicle and (heading, speed) for every LUAV.
Training follows the usual maximum-entropy recipe:

    - twin critics Q1, Q2 with Polyak-averaged targets
    - critic target y = r + gamma (1 - done) (min Q_target(s', a') - alpha log pi(a'|s'))
    - actor loss mean(alpha log pi(a|s) - min Q(s, a))
    - temperature alpha tuned so the policy entropy tracks -dim(A)

Example:
    >>> agent = SacAgent(obs_dim, act_dim, cfg.agent, seed=0)
    >>> action = agent.act(obs)
    >>> losses = agent.update(buffer.sample(cfg.agent.batch_size))

See Also:
    - hivec.agents.networks: Actor and critic modules
    - hivec.agents.training: Episode loop that calls update()
"""

import copy
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Optional

import numpy as np
import torch
import torch.nn.functional as F

from hivec.agents.networks import (
    GaussianActor,
    ObservationScaler,
    QNetwork,
    check_finite,
    soft_update,
)
from hivec.agents.replay import Batch
from hivec.config import AgentConfig

logger = logging.getLogger("hivec.agents.sac")


@dataclass
class SacLosses:
    """Losses of one update step."""

    critic1: float
    critic2: float
    actor: float
    temperature: float
    alpha: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


class SacAgent:
    """
    Actor, twin critics, their targets and the learned temperature.

    Args:
        obs_dim: Observation length.
        act_dim: Action length.
        agent_cfg: Hyperparameters.
        scaler: Observation scaler; identity when omitted.
        seed: Seeds parameter initialisation and action sampling.
    """

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        agent_cfg: AgentConfig,
        scaler: Optional[ObservationScaler] = None,
        seed: int = 0,
    ) -> None:
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.cfg = agent_cfg
        self.scaler = scaler or ObservationScaler()
        self.gamma = agent_cfg.gamma
        self.tau = agent_cfg.tau
        self.batch_size = agent_cfg.batch_size
        self.target_entropy = (
            float(-act_dim) if agent_cfg.target_entropy is None else agent_cfg.target_entropy
        )

        torch.manual_seed(seed)
        hidden = agent_cfg.hidden_sizes
        self.actor = GaussianActor(obs_dim, act_dim, hidden)
        self.q1 = QNetwork(obs_dim, act_dim, hidden)
        self.q2 = QNetwork(obs_dim, act_dim, hidden)
        self.q1_target = copy.deepcopy(self.q1)
        self.q2_target = copy.deepcopy(self.q2)
        for p in [*self.q1_target.parameters(), *self.q2_target.parameters()]:
            p.requires_grad_(False)
        self.log_alpha = torch.tensor(math.log(agent_cfg.init_temperature), requires_grad=True)

        lr = agent_cfg.learning_rate
        self.actor_optimizer = torch.optim.Adam(self.actor.parameters(), lr=lr)
        self.critic_optimizer = torch.optim.Adam(
            [*self.q1.parameters(), *self.q2.parameters()], lr=lr
        )
        self.alpha_optimizer = torch.optim.Adam([self.log_alpha], lr=lr)
        self.generator = torch.Generator().manual_seed(seed)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(self.log_alpha.exp())

    def _obs_tensor(self, obs: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(self.scaler(obs), dtype=torch.float32)

    def act(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        """Raw action in [-1, 1]^act_dim for one observation."""
        with torch.no_grad():
            action, _ = self.actor.sample(
                self._obs_tensor(obs).unsqueeze(0), self.generator, deterministic
            )
        return action.squeeze(0).numpy().astype(np.float64)

    def update(self, batch: Batch) -> SacLosses:
        return sac_update(self, batch)

    # -------------------------------------------------------------------------
    # Checkpoint support
    # -------------------------------------------------------------------------

    def state_dict(self) -> dict[str, Any]:
        return {
            "actor": self.actor.state_dict(),
            "q1": self.q1.state_dict(),
            "q2": self.q2.state_dict(),
            "q1_target": self.q1_target.state_dict(),
            "q2_target": self.q2_target.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
        }

    def load_state_dict(self, state: dict[str, Any]) -> None:
        self.actor.load_state_dict(state["actor"])
        self.q1.load_state_dict(state["q1"])
        self.q2.load_state_dict(state["q2"])
        self.q1_target.load_state_dict(state["q1_target"])
        self.q2_target.load_state_dict(state["q2_target"])
        with torch.no_grad():
            self.log_alpha.copy_(state["log_alpha"])


def critic_targets(
    agent: SacAgent,
    rewards: torch.Tensor,
    next_states: torch.Tensor,
    dones: torch.Tensor,
) -> torch.Tensor:
    """Soft Bellman targets for a batch of (already scaled) next states."""
    with torch.no_grad():
        next_actions, next_log_prob = agent.actor.sample(next_states, agent.generator)
        q_next = torch.min(
            agent.q1_target(next_states, next_actions),
            agent.q2_target(next_states, next_actions),
        )
        soft_value = q_next - agent.log_alpha.exp() * next_log_prob
        return rewards + agent.gamma * (1.0 - dones) * soft_value


def sac_update(agent: SacAgent, batch: Batch) -> SacLosses:
    """
    One gradient step on critics, actor and temperature, then target averaging.

    Raises:
        NonFiniteLossError: If any loss is NaN or infinite; parameters touched
            by that loss are left unchanged.
    """
    if len(batch) < 2:
        raise ValueError(f"Batch size must be >= 2, got {len(batch)}")
    states = torch.as_tensor(agent.scaler(batch.states), dtype=torch.float32)
    next_states = torch.as_tensor(agent.scaler(batch.next_states), dtype=torch.float32)
    actions = torch.as_tensor(batch.actions, dtype=torch.float32)
    rewards = torch.as_tensor(batch.rewards, dtype=torch.float32)
    dones = torch.as_tensor(batch.dones, dtype=torch.float32)

    # Critics
    y = critic_targets(agent, rewards, next_states, dones)
    critic1_loss = F.mse_loss(agent.q1(states, actions), y)
    critic2_loss = F.mse_loss(agent.q2(states, actions), y)
    check_finite({"critic1": critic1_loss, "critic2": critic2_loss},
                 f"SAC update {agent.updates}")
    agent.critic_optimizer.zero_grad()
    (critic1_loss + critic2_loss).backward()
    agent.critic_optimizer.step()

    # Actor
    new_actions, log_prob = agent.actor.sample(states, agent.generator)
    q_new = torch.min(agent.q1(states, new_actions), agent.q2(states, new_actions))
    alpha = agent.log_alpha.exp().detach()
    actor_loss = (alpha * log_prob - q_new).mean()
    check_finite({"actor": actor_loss}, f"SAC update {agent.updates}")
    agent.actor_optimizer.zero_grad()
    actor_loss.backward()
    agent.actor_optimizer.step()

    # Temperature
    temperature_loss = -(agent.log_alpha * (log_prob.detach() + agent.target_entropy)).mean()
    check_finite({"temperature": temperature_loss}, f"SAC update {agent.updates}")
    agent.alpha_optimizer.zero_grad()
    temperature_loss.backward()
    agent.alpha_optimizer.step()

    soft_update(agent.q1_target, agent.q1, agent.tau)
    soft_update(agent.q2_target, agent.q2, agent.tau)
    agent.updates += 1

    return SacLosses(
        critic1=float(critic1_loss),
        critic2=float(critic2_loss),
        actor=float(actor_loss),
        temperature=float(temperature_loss),
        alpha=agent.alpha,
    )
