from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F


@dataclass
class RolloutBuffer:
    """One worker's trajectory segment. ``bootstrap`` is 0 when the segment ended an episode."""

    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    bootstrap: float = 0.0

    def __len__(self) -> int:
        return len(self.rewards)

    def validate(self):
        n = len(self.rewards)
        if n == 0:
            raise ValueError("empty rollout")
        lengths = {len(self.actions), len(self.dones)}
        if self.observations:
            lengths.add(len(self.observations))
        if self.values:
            lengths.add(len(self.values))
        if lengths != {n}:
            raise ValueError("rollout fields have inconsistent lengths")
        if self.dones[-1] and self.bootstrap != 0.0:
            raise ValueError("a terminated rollout must carry bootstrap 0")


def n_step_returns(rewards, gamma: float, bootstrap: float = 0.0) -> np.ndarray:
    """Discounted returns R_t = r_t + gamma * R_{t+1}, seeded with ``bootstrap``."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty rollout")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    out = np.empty_like(r)
    running = float(bootstrap)
    for t in range(r.size - 1, -1, -1):
        running = r[t] + gamma * running
        out[t] = running
    return out


def categorical_entropy(logits: torch.Tensor) -> torch.Tensor:
    """Entropy of softmax(logits) along the last axis."""
    logp = F.log_softmax(logits, dim=-1)
    return -(logp.exp() * logp).sum(-1)


def a3c_loss(logits: torch.Tensor, values: torch.Tensor, actions: torch.Tensor, returns,
             entropy_beta: float = 0.01, value_coef: float = 0.5):
    """Actor-critic loss summed over time and joints.

    logits: (T, joints, actions); values: (T,); actions: (T, joints) long;
    returns: (T,). The advantage is detached so it only scales the policy
    gradient. Returns (total, {"policy", "value", "entropy"}) where
    total = policy + value + entropy (the entropy entry already carries -beta).
    """
    returns = torch.as_tensor(returns, dtype=values.dtype)
    if not (torch.isfinite(logits).all() and torch.isfinite(values).all() and torch.isfinite(returns).all()):
        raise FloatingPointError("non-finite input to a3c_loss")
    logp = F.log_softmax(logits, dim=-1)
    chosen = logp.gather(-1, actions.long().unsqueeze(-1)).squeeze(-1)
    advantage = (returns - values).detach()
    policy = -(chosen.sum(-1) * advantage).sum()
    value = value_coef * ((returns - values) ** 2).sum()
    entropy = -entropy_beta * categorical_entropy(logits).sum()
    total = policy + value + entropy
    return total, {"policy": policy, "value": value, "entropy": entropy}
