"""
Training and evaluation loops, policy checkpoints.

train() runs whole episodes of ``num_slots`` slots, stores every transition
and updates the agent every ``update_freq`` slots once the buffer holds a
batch. Every random stream (environment, replay sampling, exploration,
network initialisation) is derived from one seed, so two runs with the same
seed produce identical metric series.

Key Features:
    - One Policy wrapper for every AgentKind
    - Per-episode metrics: reward, utility, completion rate, delay, energy
    - Checkpoints that refuse to load under a different configuration

Example:
    >>> result = train(cfg, AgentKind.SAC, episodes=300, seed=1)
    >>> result.metrics[-1].completion_rate
    >>> save_checkpoint(result.policy, Path("out/sac.pt"))
    >>> policy = load_checkpoint(Path("out/sac.pt"), cfg)
    >>> evaluate(cfg, policy, episodes=10, seed=99)

See Also:
    - hivec.services.environment: The environment stepped here
    - hivec.services.experiments: Runs train() over sweep cells
"""

import logging
import pickle
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import torch

from hivec import __version__
from hivec.agents.baselines import AgentKind, RandomPolicy, fix_luav_speed
from hivec.agents.dqn import DqnAgent, TemplateCodec
from hivec.agents.networks import AgentError, NonFiniteLossError, ObservationScaler
from hivec.agents.replay import ReplayBuffer
from hivec.agents.sac import SacAgent
from hivec.config import SimConfig, config_hash
from hivec.domain import Transition
from hivec.services.environment import (
    HivecEnv,
    SlotTraceWriter,
    action_size,
    observation_bounds,
    observation_size,
)

logger = logging.getLogger("hivec.agents.training")

CHECKPOINT_VERSION = 1


# =============================================================================
# Exceptions
# =============================================================================


class CheckpointError(AgentError):
    """Raised when a checkpoint cannot be written, read or matched to a config."""

    pass


# =============================================================================
# Data Classes
# =============================================================================


@dataclass
class EpisodeMetrics:
    """
    Summary of one episode.

    Attributes:
        episode: Episode index.
        total_reward: Sum of slot rewards.
        utility: Mean slot reward.
        completion_rate: Mean slot completion rate.
        mean_delay: Mean per-task completion delay in seconds.
        total_energy: Sum of slot system energy in joules.
        violations: Hard constraint violations summed over slots.
        infeasible_tasks: Tasks flagged infeasible, summed over slots.
    """

    episode: int
    total_reward: float
    utility: float
    completion_rate: float
    mean_delay: float
    total_energy: float
    violations: int
    infeasible_tasks: int

    def as_record(self) -> dict[str, Union[int, float]]:
        return asdict(self)


@dataclass
class TrainResult:
    """A trained policy and its per-episode metric series."""

    policy: "Policy"
    metrics: list[EpisodeMetrics] = field(default_factory=list)


# =============================================================================
# Policy Wrapper
# =============================================================================


class Policy:
    """
    Any AgentKind bound to one configuration.

    ``stored_action`` is what the replay buffer keeps (raw vector for SAC,
    head indices for DQN); ``env_action`` turns it into the raw vector the
    environment takes.
    """

    def __init__(self, kind: AgentKind, cfg: SimConfig, seed: int = 0) -> None:
        self.kind = kind
        self.cfg = cfg
        self.seed = seed
        obs_dim, act_dim = observation_size(cfg), action_size(cfg)
        scaler = ObservationScaler(*observation_bounds(cfg))
        streams = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(streams[0])
        self.replay_rng = np.random.default_rng(streams[1])
        self.codec: Optional[TemplateCodec] = None
        self.agent: Any
        if kind.uses_sac:
            self.agent = SacAgent(obs_dim, act_dim, cfg.agent, scaler, seed=seed)
            self.buffer_action_dim = act_dim
        elif kind is AgentKind.DQN:
            self.codec = TemplateCodec(cfg)
            self.agent = DqnAgent(obs_dim, self.codec.head_sizes, cfg.agent, scaler, seed=seed)
            self.buffer_action_dim = len(self.codec.head_sizes)
        else:
            self.agent = RandomPolicy(act_dim, self.rng)
            self.buffer_action_dim = act_dim

    @property
    def learns(self) -> bool:
        return self.kind is not AgentKind.RANDOM

    def stored_action(self, obs: np.ndarray, explore: bool, warmup: bool = False) -> np.ndarray:
        if self.kind.uses_sac and warmup:
            raw = self.rng.uniform(-1.0, 1.0, size=self.buffer_action_dim)
        else:
            raw = self.agent.act(obs, deterministic=not explore)
        if self.kind is AgentKind.FIXED_UAV:
            raw = fix_luav_speed(raw, self.cfg.network.num_vehicles)
        return np.asarray(raw, dtype=np.float64)

    def env_action(self, stored: np.ndarray) -> np.ndarray:
        if self.codec is not None:
            return self.codec.decode(stored)
        return stored

    def act(self, obs: np.ndarray, deterministic: bool = True) -> np.ndarray:
        """Raw environment action for one observation."""
        return self.env_action(self.stored_action(obs, explore=not deterministic))


def make_policy(cfg: SimConfig, kind: AgentKind, seed: int = 0) -> Policy:
    return Policy(kind, cfg, seed)


def seed_everything(seed: int) -> None:
    """Pin torch to one thread and seed its global generator."""
    torch.set_num_threads(1)
    torch.manual_seed(seed)


def episode_seed(seed: int, episode: int) -> int:
    """Independent environment seed for one episode of one run."""
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


# =============================================================================
# Episode Loop
# =============================================================================


def _summarise(episode: int, slots: list[Any], num_vehicles: int) -> EpisodeMetrics:
    n = max(len(slots), 1)
    return EpisodeMetrics(
        episode=episode,
        total_reward=float(sum(m.reward for m in slots)),
        utility=float(sum(m.reward for m in slots) / n),
        completion_rate=float(sum(m.completion_rate for m in slots) / n),
        mean_delay=float(sum(m.total_delay for m in slots) / (n * num_vehicles)),
        total_energy=float(sum(m.system_energy for m in slots)),
        violations=int(sum(m.violations.total() for m in slots)),
        infeasible_tasks=int(sum(m.violations.infeasible_tasks for m in slots)),
    )


def train(
    cfg: SimConfig,
    agent_kind: AgentKind,
    episodes: int,
    update_freq: Optional[int] = None,
    seed: Optional[int] = None,
    trace: Optional[SlotTraceWriter] = None,
) -> TrainResult:
    """
    Train one agent kind.

    Args:
        cfg: Validated configuration.
        agent_kind: Which policy to train.
        episodes: Number of episodes; 0 returns the untrained policy.
        update_freq: Slots between updates; defaults to cfg.agent.update_freq.
        seed: Run seed; defaults to cfg.rng_seed.
        trace: Optional per-slot JSON-lines trace of every episode.

    Raises:
        NonFiniteLossError: With the episode and slot of the failed update.
    """
    seed = cfg.rng_seed if seed is None else seed
    update_freq = update_freq or cfg.agent.update_freq
    seed_everything(seed)
    policy = make_policy(cfg, agent_kind, seed)
    result = TrainResult(policy=policy)
    if episodes <= 0:
        return result

    ag = cfg.agent
    buffer = ReplayBuffer(ag.buffer_capacity, observation_size(cfg),
                          policy.buffer_action_dim, policy.replay_rng)
    env = HivecEnv(cfg, trace=trace, fifo=agent_kind.fifo)
    total_steps = 0
    logger.info(f"Training {agent_kind.value} for {episodes} episodes (seed {seed})")

    for ep in range(episodes):
        obs, _ = env.reset(seed=episode_seed(seed, ep))
        slots = []
        terminated = False
        while not terminated:
            stored = policy.stored_action(obs, explore=True,
                                          warmup=total_steps < ag.warmup_steps)
            next_obs, reward, terminated, _, info = env.step(policy.env_action(stored))
            slots.append(info["metrics"])
            total_steps += 1
            if policy.learns:
                buffer.add(Transition(obs, stored, reward, next_obs, terminated))
                if (
                    total_steps % update_freq == 0
                    and total_steps >= ag.warmup_steps
                    and len(buffer) >= ag.batch_size
                ):
                    try:
                        policy.agent.update(buffer.sample(ag.batch_size))
                    except NonFiniteLossError as e:
                        raise NonFiniteLossError(
                            f"Episode {ep}, slot {len(slots) - 1}: {e}"
                        ) from e
            obs = next_obs

        summary = _summarise(ep, slots, cfg.network.num_vehicles)
        result.metrics.append(summary)
        logger.info(
            f"[{agent_kind.value}] episode {ep}: reward={summary.total_reward:.3f} "
            f"completion={summary.completion_rate:.3f} delay={summary.mean_delay:.3f}s "
            f"energy={summary.total_energy:.1f}J"
        )
    env.close()
    return result


def evaluate(
    cfg: SimConfig,
    policy: Policy,
    episodes: int,
    seed: Optional[int] = None,
    trace: Optional[SlotTraceWriter] = None,
) -> list[EpisodeMetrics]:
    """Roll out a frozen policy with deterministic actions, no learning."""
    seed = cfg.rng_seed if seed is None else seed
    seed_everything(seed)
    env = HivecEnv(cfg, trace=trace, fifo=policy.kind.fifo)
    metrics = []
    for ep in range(episodes):
        obs, _ = env.reset(seed=episode_seed(seed, ep))
        slots = []
        terminated = False
        while not terminated:
            obs, _, terminated, _, info = env.step(policy.act(obs, deterministic=True))
            slots.append(info["metrics"])
        metrics.append(_summarise(ep, slots, cfg.network.num_vehicles))
    env.close()
    return metrics


# =============================================================================
# Checkpoints
# =============================================================================


def _tensor_shapes(state: dict[str, Any], prefix: str = "") -> dict[str, list[int]]:
    shapes = {}
    for key, value in state.items():
        name = f"{prefix}{key}"
        if isinstance(value, torch.Tensor):
            shapes[name] = list(value.shape)
        elif isinstance(value, dict):
            shapes.update(_tensor_shapes(value, prefix=f"{name}."))
    return shapes


def save_checkpoint(policy: Policy, path: Path) -> None:
    """Write every parameter tensor with its shape and the config hash."""
    state = policy.agent.state_dict() if policy.learns else {}
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "code_version": __version__,
        "kind": policy.kind.value,
        "seed": policy.seed,
        "config_hash": config_hash(policy.cfg),
        "shapes": _tensor_shapes(state),
        "state": state,
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(payload, path)
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}") from e
    logger.info(f"Saved {policy.kind.value} checkpoint to {path}")


def load_checkpoint(path: Path, cfg: SimConfig) -> Policy:
    """
    Restore a policy saved by save_checkpoint().

    Raises:
        CheckpointError: If the file is unreadable, from another format
            version, saved under a different configuration, or its tensor
            shapes do not fit the configuration's networks.
    """
    try:
        payload = torch.load(path, weights_only=True)
    except (OSError, RuntimeError, EOFError, pickle.UnpicklingError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
    expected = config_hash(cfg)
    if payload["config_hash"] != expected:
        raise CheckpointError(
            f"{path} was saved under config {payload['config_hash'][:12]}, "
            f"current config is {expected[:12]}"
        )
    policy = make_policy(cfg, AgentKind(payload["kind"]), seed=int(payload["seed"]))
    if policy.learns:
        current = _tensor_shapes(policy.agent.state_dict())
        if current != payload["shapes"]:
            raise CheckpointError(f"{path} tensor shapes do not match the configuration")
        try:
            policy.agent.load_state_dict(payload["state"])
        except (KeyError, RuntimeError) as e:
            raise CheckpointError(f"Cannot restore {path}: {e}") from e
    return policy
