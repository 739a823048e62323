"""
Neural-network core shared by the learning agents.

Everything is plain torch: MlpNet is a stack of nn.Linear layers with tanh
between them, gradients come from torch.autograd and updates from
torch.optim.Adam. The helpers here are what the SAC and DQN agents build on,
plus a finite-difference checker used to verify autograd on small nets.

Example:
    >>> net = MlpNet([4, 16, 2])
    >>> grads = mlp_gradients(net, lambda out: (out ** 2).sum(dim=-1), batch)
    >>> fd = finite_difference_gradients(net, lambda out: (out ** 2).sum(dim=-1), batch)
"""

import logging
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

logger = logging.getLogger("hivec.agents.networks")

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0

LossFn = Callable[[torch.Tensor], torch.Tensor]
ArrayLike = Union[np.ndarray, torch.Tensor, Sequence[float]]


# =============================================================================
# Exceptions
# =============================================================================


class AgentError(Exception):
    """Base exception for agent errors."""

    pass


class NetworkShapeError(AgentError):
    """Raised when an input does not match a network's input size."""

    pass


class NonFiniteLossError(AgentError):
    """Raised when an update produces a NaN or infinite loss."""

    pass


# =============================================================================
# Networks
# =============================================================================


class MlpNet(nn.Module):
    """
    Fully connected network: tanh on hidden layers, linear output.

    Args:
        sizes: Layer widths, input first and output last.
    """

    def __init__(self, sizes: Sequence[int]) -> None:
        super().__init__()
        if len(sizes) < 2:
            raise NetworkShapeError(f"Need at least input and output sizes, got {sizes}")
        self.sizes = list(sizes)
        self.layers = nn.ModuleList(
            nn.Linear(n_in, n_out) for n_in, n_out in zip(sizes[:-1], sizes[1:])
        )

    @property
    def in_features(self) -> int:
        return self.sizes[0]

    @property
    def out_features(self) -> int:
        return self.sizes[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_features:
            raise NetworkShapeError(
                f"Expected {self.in_features} input features, got {x.shape[-1]}"
            )
        for layer in self.layers[:-1]:
            x = torch.tanh(layer(x))
        return self.layers[-1](x)


class GaussianActor(nn.Module):
    """
    Squashed Gaussian policy over [-1, 1]^act_dim.

    The body outputs a mean and a log standard deviation per action
    dimension; actions are tanh(mean + std * noise).
    """

    def __init__(self, obs_dim: int, act_dim: int, hidden: Sequence[int]) -> None:
        super().__init__()
        self.act_dim = act_dim
        self.body = MlpNet([obs_dim, *hidden, 2 * act_dim])

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean, log_std = self.body(obs).chunk(2, dim=-1)
        return mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def sample(
        self,
        obs: torch.Tensor,
        generator: Optional[torch.Generator] = None,
        deterministic: bool = False,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Return (action, log_prob); deterministic mode uses the mean."""
        mean, log_std = self(obs)
        std = log_std.exp()
        if deterministic:
            u = mean
        else:
            noise = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
            u = mean + std * noise
        log_prob = torch.distributions.Normal(mean, std).log_prob(u).sum(dim=-1)
        log_prob = log_prob - squash_correction(u).sum(dim=-1)
        return torch.tanh(u), log_prob


class QNetwork(nn.Module):
    """State-action value Q(s, a)."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: Sequence[int]) -> None:
        super().__init__()
        self.body = MlpNet([obs_dim + act_dim, *hidden, 1])

    def forward(self, obs: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        return self.body(torch.cat([obs, action], dim=-1)).squeeze(-1)


def squash_correction(u: torch.Tensor) -> torch.Tensor:
    """log(1 - tanh(u)^2) in the overflow-free form 2 (log 2 - u - softplus(-2u))."""
    return 2.0 * (math.log(2.0) - u - F.softplus(-2.0 * u))


# =============================================================================
# Forward, Gradients, Updates
# =============================================================================


def _as_tensor(x: ArrayLike, like: nn.Module) -> torch.Tensor:
    dtype = next(like.parameters()).dtype
    if isinstance(x, torch.Tensor):
        return x.to(dtype)
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def mlp_forward(net: MlpNet, x: ArrayLike) -> torch.Tensor:
    """Evaluate ``net`` on ``x`` without tracking gradients."""
    with torch.no_grad():
        return net(_as_tensor(x, net))


def mlp_gradients(net: nn.Module, loss_fn: LossFn, batch: ArrayLike) -> dict[str, torch.Tensor]:
    """
    Gradients of the mean loss over ``batch`` with respect to every parameter.

    ``loss_fn`` maps the network output to a per-sample (or scalar) loss.
    Parameters the loss does not depend on get zero gradients.
    """
    names, params = zip(*net.named_parameters())
    loss = loss_fn(net(_as_tensor(batch, net))).mean()
    if not loss.requires_grad:
        return {n: torch.zeros_like(p) for n, p in zip(names, params)}
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    return {
        n: torch.zeros_like(p) if g is None else g.detach()
        for n, p, g in zip(names, params, grads)
    }


def finite_difference_gradients(
    net: nn.Module, loss_fn: LossFn, batch: ArrayLike, h: float = 1e-5
) -> dict[str, torch.Tensor]:
    """Central-difference estimate of mlp_gradients(), one coordinate at a time."""
    x = _as_tensor(batch, net)
    estimates = {}
    with torch.no_grad():
        for name, param in net.named_parameters():
            grad = torch.zeros_like(param)
            flat, gflat = param.data.view(-1), grad.view(-1)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + h
                plus = loss_fn(net(x)).mean().item()
                flat[i] = original - h
                minus = loss_fn(net(x)).mean().item()
                flat[i] = original
                gflat[i] = (plus - minus) / (2.0 * h)
            estimates[name] = grad
    return estimates


def adam_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    state: Optional[torch.optim.Adam],
    lr: float,
) -> torch.optim.Adam:
    """
    Apply one Adam update with the given gradients.

    Pass the returned optimizer back as ``state`` on the next call; it holds
    the first and second moments.
    """
    if state is None:
        state = torch.optim.Adam(params, lr=lr)
    for p, g in zip(params, grads):
        p.grad = g.detach().clone()
    state.step()
    return state


def soft_update(target: nn.Module, online: nn.Module, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, parameter by parameter."""
    with torch.no_grad():
        for t, o in zip(target.parameters(), online.parameters()):
            t.mul_(1.0 - tau).add_(o, alpha=tau)


def hard_update(target: nn.Module, online: nn.Module) -> None:
    target.load_state_dict(online.state_dict())


def check_finite(losses: dict[str, torch.Tensor], context: str) -> None:
    """Raise NonFiniteLossError naming every non-finite loss."""
    bad = {k: float(v) for k, v in losses.items() if not torch.isfinite(v).all()}
    if bad:
        raise NonFiniteLossError(f"{context}: non-finite losses {bad}")


# =============================================================================
# Observation Scaling
# =============================================================================


class ObservationScaler:
    """
    Affine map of raw observations onto [-1, 1] per feature.

    Features whose low and high bounds coincide map to 0. Without bounds the
    scaler is the identity.
    """

    def __init__(
        self, low: Optional[np.ndarray] = None, high: Optional[np.ndarray] = None
    ) -> None:
        if low is None or high is None:
            self.centre = None
            self.half_range = None
            return
        low, high = np.asarray(low, dtype=float), np.asarray(high, dtype=float)
        self.centre = (low + high) / 2.0
        span = (high - low) / 2.0
        self.half_range = np.where(span > 0, span, np.inf)

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        if self.centre is None:
            return obs
        return (obs - self.centre) / self.half_range
