"""Generator and discriminator building blocks."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

DEMOD_EPS = 1e-8


@dataclass(frozen=True)
class GeneratorSpec:
    resolution: int = 224
    n_res_blocks: int = 9
    base_channels: int = 64
    norm: str = "demodulated"

    def __post_init__(self):
        if self.resolution % 4:
            raise ValueError("generator resolution must be divisible by 4")
        if self.n_res_blocks < 1:
            raise ValueError("need at least one residual block")
        if self.norm not in ("demodulated", "batch"):
            raise ValueError(f"norm must be 'demodulated' or 'batch', got {self.norm!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DiscriminatorSpec:
    resolution: int = 224
    n_down: int = 3
    leaky_slope: float = 0.2
    base_channels: int = 64

    def __post_init__(self):
        if self.resolution % (2 ** self.n_down):
            raise ValueError("discriminator resolution must be divisible by 2**n_down")

    @property
    def output_side(self) -> int:
        return self.resolution // 2 ** self.n_down

    def to_dict(self) -> dict:
        return asdict(self)


def standardize(a: torch.Tensor, eps: float = DEMOD_EPS) -> torch.Tensor:
    """(a - mean) / (std + eps) per sample and channel over the spatial axes."""
    mu = a.mean(dim=(2, 3), keepdim=True)
    sd = a.var(dim=(2, 3), keepdim=True, unbiased=False).sqrt()
    return (a - mu) / (sd + eps)


def demodulated_conv(x: torch.Tensor, weight: torch.Tensor, stride: int = 1, padding: int = 0,
                     padding_mode: str = "reflect", eps: float = DEMOD_EPS) -> torch.Tensor:
    """Convolution followed by per-feature-map standardization."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if x.dim() != 4 or weight.dim() != 4:
        raise ValueError("expected 4-D input (N, C, H, W) and 4-D kernel (out, in, kh, kw)")
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"input has {x.shape[1]} channels but the kernel expects {weight.shape[1]}")
    if not torch.isfinite(x).all():
        raise ValueError("non-finite values in demodulated_conv input")
    if padding:
        x = F.pad(x, (padding,) * 4, mode=padding_mode)
    return standardize(F.conv2d(x, weight, stride=stride), eps)


class DemodConv2d(nn.Module):
    """Reflection-padded conv with demodulation (or BatchNorm in the vanilla ablation)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int = 1, norm: str = "demodulated",
                 transposed: bool = False):
        super().__init__()
        self.stride = stride
        self.norm = norm
        self.transposed = transposed
        self.pad = kernel // 2
        if transposed:
            self.conv = nn.ConvTranspose2d(c_in, c_out, kernel, stride=stride, padding=self.pad,
                                           output_padding=stride - 1, bias=False)
        else:
            self.conv = nn.Conv2d(c_in, c_out, kernel, stride=stride, bias=False)
        self.bn = nn.BatchNorm2d(c_out) if norm == "batch" else None

    def forward(self, x):
        if self.transposed:
            a = self.conv(x)
        else:
            if self.pad:
                x = F.pad(x, (self.pad,) * 4, mode="reflect")
            a = self.conv(x)
        return self.bn(a) if self.bn is not None else standardize(a)


class ResidualBlock(nn.Module):
    """Two 3x3 demodulated convs with a ReLU between them; output is added to the input."""

    def __init__(self, channels: int, norm: str = "demodulated"):
        super().__init__()
        self.conv1 = DemodConv2d(channels, channels, 3, norm=norm)
        self.conv2 = DemodConv2d(channels, channels, 3, norm=norm)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class Generator(nn.Module):
    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        c, norm = spec.base_channels, spec.norm
        self.stem = DemodConv2d(3, c, 7, norm=norm)
        self.down = nn.ModuleList([DemodConv2d(c, 2 * c, 3, stride=2, norm=norm),
                                   DemodConv2d(2 * c, 4 * c, 3, stride=2, norm=norm)])
        self.blocks = nn.Sequential(*[ResidualBlock(4 * c, norm) for _ in range(spec.n_res_blocks)])
        self.up = nn.ModuleList([DemodConv2d(4 * c, 2 * c, 3, stride=2, norm=norm, transposed=True),
                                 DemodConv2d(2 * c, c, 3, stride=2, norm=norm, transposed=True)])
        self.head = nn.Conv2d(c, 3, 7)

    def forward(self, x):
        if x.shape[-1] != self.spec.resolution or x.shape[-2] != self.spec.resolution:
            raise ValueError(f"generator expects {self.spec.resolution}px input, got {tuple(x.shape[-2:])}")
        x = F.relu(self.stem(x))
        for layer in self.down:
            x = F.relu(layer(x))
        x = self.blocks(x)
        for layer in self.up:
            x = F.relu(layer(x))
        return torch.tanh(self.head(F.pad(x, (3, 3, 3, 3), mode="reflect")))


class _SamePad4(nn.ZeroPad2d):
    """Asymmetric zero padding that keeps the side length through a stride-1, kernel-4 conv."""

    def __init__(self):
        super().__init__((1, 2, 1, 2))


class Discriminator(nn.Module):
    """PatchGAN: n_down stride-2 kernel-4 convs, one stride-1 conv, then a 1-channel logit map."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        c = spec.base_channels
        layers: list[nn.Module] = [nn.Conv2d(3, c, 4, stride=2, padding=1), nn.LeakyReLU(spec.leaky_slope)]
        ch = c
        for i in range(1, spec.n_down):
            nxt = c * min(2 ** i, 8)
            layers += [nn.Conv2d(ch, nxt, 4, stride=2, padding=1), nn.InstanceNorm2d(nxt),
                       nn.LeakyReLU(spec.leaky_slope)]
            ch = nxt
        nxt = c * min(2 ** spec.n_down, 8)
        layers += [_SamePad4(), nn.Conv2d(ch, nxt, 4), nn.InstanceNorm2d(nxt), nn.LeakyReLU(spec.leaky_slope),
                   _SamePad4(), nn.Conv2d(nxt, 1, 4)]
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        if x.shape[-1] != self.spec.resolution or x.shape[-2] != self.spec.resolution:
            raise ValueError(f"discriminator expects {self.spec.resolution}px input, got {tuple(x.shape[-2:])}")
        return self.net(x)


def init_weights(module: nn.Module, std: float = 0.02):
    """Normal(0, std^2) conv weights, zero biases; BatchNorm scales around 1."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.normal_(m.weight, 1.0, std)
            nn.init.zeros_(m.bias)
