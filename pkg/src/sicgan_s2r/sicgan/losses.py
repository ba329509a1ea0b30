"""Least-squares adversarial, cycle-consistency and identity losses."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch
import torch.nn as nn

Translator = Callable[[torch.Tensor], torch.Tensor]


@dataclass
class GanBundle:
    """Both generators (G: sim->real, F: real->sim), both discriminators and the loss weights."""

    G: nn.Module
    F: nn.Module
    D_X: nn.Module
    D_Y: nn.Module
    lambda_cyc: float = 10.0
    lambda_id: float = 0.1
    mode: str = "sicgan"

    def __post_init__(self):
        if self.lambda_cyc <= 0:
            raise ValueError("lambda_cyc must be positive")
        if self.lambda_id < 0:
            raise ValueError("lambda_id must be non-negative")
        if self.mode not in ("sicgan", "vanilla_cyclegan"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "vanilla_cyclegan" and self.lambda_id != 0:
            raise ValueError("vanilla_cyclegan mode requires lambda_id = 0")

    def generator_parameters(self):
        return list(self.G.parameters()) + list(self.F.parameters())

    def discriminator_parameters(self):
        return list(self.D_X.parameters()) + list(self.D_Y.parameters())


def _check_finite(t: torch.Tensor, what: str):
    if not torch.isfinite(t).all():
        raise ValueError(f"non-finite values in {what}")


def _check_batch(x: torch.Tensor, what: str):
    if x.numel() == 0 or x.shape[0] == 0:
        raise ValueError(f"empty {what} batch")


def adversarial_loss(pred: torch.Tensor, target_is_real: bool) -> torch.Tensor:
    """Mean over patches of (pred - t)^2 with t = 1 for real, 0 for synthetic."""
    _check_finite(pred, "discriminator output")
    target = 1.0 if target_is_real else 0.0
    return ((pred - target) ** 2).mean()


def l1(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return (a - b).abs().mean()


def cycle_loss(x: torch.Tensor, y: torch.Tensor, G: Translator, F: Translator) -> torch.Tensor:
    """mean|F(G(x)) - x| + mean|G(F(y)) - y|."""
    _check_batch(x, "domain X")
    _check_batch(y, "domain Y")
    return l1(F(G(x)), x) + l1(G(F(y)), y)


def identity_loss(x: torch.Tensor, y: torch.Tensor, G: Translator, F: Translator) -> torch.Tensor:
    """mean|G(y) - y| + mean|F(x) - x|."""
    _check_batch(x, "domain X")
    _check_batch(y, "domain Y")
    return l1(G(y), y) + l1(F(x), x)


def compose_generator_loss(adv_G, adv_F, cyc, idt, lambda_cyc: float, lambda_id: float):
    """Weighted generator objective; returns (total, terms) with sum(terms) == total."""
    terms = {
        "adv_G": adv_G,
        "adv_F": adv_F,
        "cyc": lambda_cyc * cyc,
        "id": lambda_id * idt if lambda_id else 0.0 * cyc,
    }
    total = terms["adv_G"] + terms["adv_F"] + terms["cyc"] + terms["id"]
    return total, terms


@dataclass
class GeneratorLoss:
    total: torch.Tensor
    terms: dict
    raw: dict
    fake_x: torch.Tensor
    fake_y: torch.Tensor


def total_generator_loss(x: torch.Tensor, y: torch.Tensor, bundle: GanBundle) -> GeneratorLoss:
    """Adversarial terms for both directions plus weighted cycle and identity terms.

    ``raw`` holds the unweighted components (``cyc`` and ``id`` are the sums of
    both directions). The identity term is skipped entirely when lambda_id is 0.
    """
    _check_batch(x, "domain X")
    _check_batch(y, "domain Y")
    fake_y = bundle.G(x)
    fake_x = bundle.F(y)
    adv_G = adversarial_loss(bundle.D_Y(fake_y), True)
    adv_F = adversarial_loss(bundle.D_X(fake_x), True)
    cyc = l1(bundle.F(fake_y), x) + l1(bundle.G(fake_x), y)
    if bundle.lambda_id:
        idt = identity_loss(x, y, bundle.G, bundle.F)
    else:
        idt = torch.zeros((), dtype=cyc.dtype)
    total, terms = compose_generator_loss(adv_G, adv_F, cyc, idt, bundle.lambda_cyc, bundle.lambda_id)
    raw = {"adv_G": adv_G, "adv_F": adv_F, "cyc": cyc, "id": idt}
    return GeneratorLoss(total, terms, raw, fake_x, fake_y)


def discriminator_loss(D: nn.Module, real: torch.Tensor, fake: torch.Tensor) -> torch.Tensor:
    """Mean of the real and synthetic adversarial terms for one discriminator."""
    return 0.5 * (adversarial_loss(D(real), True) + adversarial_loss(D(fake.detach()), False))
