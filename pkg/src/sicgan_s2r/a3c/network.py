from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass(frozen=True)
class PolicyNetSpec:
    resolution: int = 64
    conv1_filters: int = 16
    conv1_kernel: int = 8
    conv1_stride: int = 4
    conv2_filters: int = 32
    conv2_kernel: int = 5
    conv2_stride: int = 2
    fc_width: int = 256
    lstm_hidden: int = 128
    n_joints: int = 6
    n_actions_per_joint: int = 7

    def conv_sides(self) -> tuple[int, int]:
        """Spatial side after each conv layer, valid padding."""
        s1 = (self.resolution - self.conv1_kernel) // self.conv1_stride + 1
        s2 = (s1 - self.conv2_kernel) // self.conv2_stride + 1
        return s1, s2

    @property
    def flatten_width(self) -> int:
        return self.conv_sides()[1] ** 2 * self.conv2_filters

    def to_dict(self) -> dict:
        return asdict(self)


class ActorCritic(nn.Module):
    """Conv encoder -> FC -> LSTM cell -> one softmax head per joint plus a value head."""

    def __init__(self, spec: PolicyNetSpec):
        super().__init__()
        if min(spec.conv_sides()) < 1:
            raise ValueError(f"resolution {spec.resolution} too small for the conv stack")
        self.spec = spec
        self.conv1 = nn.Conv2d(3, spec.conv1_filters, spec.conv1_kernel, stride=spec.conv1_stride)
        self.conv2 = nn.Conv2d(spec.conv1_filters, spec.conv2_filters, spec.conv2_kernel,
                               stride=spec.conv2_stride)
        self.fc = nn.Linear(spec.flatten_width, spec.fc_width)
        self.lstm = nn.LSTMCell(spec.fc_width, spec.lstm_hidden)
        self.policy = nn.Linear(spec.lstm_hidden, spec.n_joints * spec.n_actions_per_joint)
        self.value = nn.Linear(spec.lstm_hidden, 1)
        self.reset_parameters()

    def reset_parameters(self):
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                nn.init.orthogonal_(m.weight, gain=nn.init.calculate_gain("relu"))
                nn.init.zeros_(m.bias)
        for name, p in self.lstm.named_parameters():
            if "weight" in name:
                nn.init.orthogonal_(p)
            else:
                nn.init.zeros_(p)
        # small heads start near-uniform, as is usual for actor-critic
        nn.init.orthogonal_(self.policy.weight, gain=0.01)
        nn.init.orthogonal_(self.value.weight, gain=1.0)

    def initial_memory(self, batch: int = 1, dtype=None):
        dtype = dtype or self.value.weight.dtype
        h = torch.zeros(batch, self.spec.lstm_hidden, dtype=dtype)
        return h, h.clone()

    def encode(self, obs: torch.Tensor) -> torch.Tensor:
        """Conv features flattened; obs is (B, 3, H, W)."""
        if obs.shape[-1] != self.spec.resolution or obs.shape[-2] != self.spec.resolution:
            raise ValueError(f"expected {self.spec.resolution}x{self.spec.resolution} observations, "
                             f"got {tuple(obs.shape[-2:])}")
        x = F.relu(self.conv1(obs))
        x = F.relu(self.conv2(x))
        return x.flatten(1)

    def forward(self, obs: torch.Tensor, memory):
        """Returns (logits (B, joints, actions), value (B,), (h, c))."""
        x = F.relu(self.fc(self.encode(obs)))
        h, c = self.lstm(x, memory)
        logits = self.policy(h).view(-1, self.spec.n_joints, self.spec.n_actions_per_joint)
        return logits, self.value(h).squeeze(-1), (h, c)


def obs_to_tensor(obs, dtype=torch.float32) -> torch.Tensor:
    """HxWx3 array (or a batch of them) in [-1, 1] -> (B, 3, H, W) tensor."""
    t = torch.as_tensor(obs, dtype=dtype)
    if t.dim() == 3:
        t = t.unsqueeze(0)
    if t.min() < -1.0 - 1e-6 or t.max() > 1.0 + 1e-6:
        raise ValueError("observations must lie in [-1, 1]")
    return t.permute(0, 3, 1, 2).contiguous()
