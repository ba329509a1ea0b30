"""Finite-difference gradient cases shared by the unit tests and the acceptance suite.

Each case builds a random float64 instance from a seed, computes the autograd
gradient once and compares it with central differences of the forward pass.
It returns the relative error (norm of difference over the larger norm).
"""
from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from sicgan_s2r.a3c.losses import a3c_loss
from sicgan_s2r.a3c.network import ActorCritic, PolicyNetSpec
from sicgan_s2r.sicgan.layers import (Discriminator, DiscriminatorSpec, Generator, GeneratorSpec, ResidualBlock,
                                      demodulated_conv, init_weights)
from sicgan_s2r.sicgan.losses import (GanBundle, adversarial_loss, cycle_loss, discriminator_loss, identity_loss,
                                      total_generator_loss)

from oracles import central_difference, relative_error

N_INSTANCES = 20
TOL = 1e-4


def _check(fn, x0: np.ndarray, h: float = 1e-6, n_coords: int | None = None, seed: int = 0,
           fd_fn=None) -> float:
    """fn: float64 tensor -> scalar tensor. Compares autograd with central differences at x0.

    ``n_coords`` limits the comparison to a random subset of entries. ``fd_fn``
    (default ``fn``) is the function differenced numerically; it differs from
    ``fn`` only where the analytic gradient is a deliberate semi-gradient.
    """
    x = torch.tensor(x0, dtype=torch.float64, requires_grad=True)
    fn(x).backward()
    analytic = x.grad.numpy().reshape(-1)
    fd_fn = fd_fn or fn

    def f(v):
        with torch.no_grad():
            return float(fd_fn(torch.tensor(v, dtype=torch.float64)))

    if n_coords is None:
        return relative_error(analytic, central_difference(f, x0, h).reshape(-1))
    idx = np.random.default_rng(seed).choice(analytic.size, size=min(n_coords, analytic.size), replace=False)
    base = np.array(x0, dtype=np.float64)
    numeric = []
    for i in idx:
        v = base.copy().reshape(-1)
        v[i] += h
        fp = f(v.reshape(base.shape))
        v[i] -= 2 * h
        fm = f(v.reshape(base.shape))
        numeric.append((fp - fm) / (2 * h))
    return relative_error(analytic[idx], numeric)


def _params_check(module: nn.Module, loss_fn, rng, n_coords: int = 40, h: float = 1e-6, fd_fn=None) -> float:
    """Autograd vs central differences on a random subset of a module's parameter entries."""
    fd_fn = fd_fn or loss_fn
    params = [p for p in module.parameters() if p.requires_grad]
    module.zero_grad()
    loss_fn().backward()
    analytic, numeric = [], []
    sizes = np.array([p.numel() for p in params])
    for _ in range(n_coords):
        k = rng.choice(len(params), p=sizes / sizes.sum())
        i = int(rng.integers(params[k].numel()))
        flat = params[k].data.view(-1)
        analytic.append(float(params[k].grad.view(-1)[i]))
        old = float(flat[i])
        with torch.no_grad():
            flat[i] = old + h
            fp = float(fd_fn())
            flat[i] = old - h
            fm = float(fd_fn())
            flat[i] = old
        numeric.append((fp - fm) / (2 * h))
    return relative_error(analytic, numeric)


def demod_conv_input(seed: int) -> float:
    rng = np.random.default_rng(seed)
    w = torch.tensor(rng.normal(size=(3, 2, 3, 3)), dtype=torch.float64)
    proj = torch.tensor(rng.normal(size=(2, 3, 5, 5)), dtype=torch.float64)
    return _check(lambda x: (demodulated_conv(x, w, padding=1) * proj).sum(), rng.normal(size=(2, 2, 5, 5)))


def demod_conv_weight(seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = torch.tensor(rng.normal(size=(2, 2, 5, 5)), dtype=torch.float64)
    proj = torch.tensor(rng.normal(size=(2, 3, 5, 5)), dtype=torch.float64)
    return _check(lambda w: (demodulated_conv(x, w, padding=1) * proj).sum(), rng.normal(size=(3, 2, 3, 3)))


def residual_block(seed: int) -> float:
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    block = ResidualBlock(2).double()
    proj = torch.tensor(rng.normal(size=(1, 2, 5, 5)), dtype=torch.float64)
    return _check(lambda x: (block(x) * proj).sum(), rng.normal(size=(1, 2, 5, 5)))


def tanh_head(seed: int) -> float:
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    gen = Generator(GeneratorSpec(resolution=8, n_res_blocks=1, base_channels=2)).double()
    init_weights(gen, 0.3)
    proj = torch.tensor(rng.normal(size=(1, 3, 8, 8)), dtype=torch.float64)
    return _check(lambda x: (gen(x) * proj).sum(), rng.uniform(-1, 1, size=(1, 3, 8, 8)), n_coords=60, seed=seed)


def adversarial(seed: int) -> float:
    rng = np.random.default_rng(seed)
    real = bool(seed % 2)
    return _check(lambda p: adversarial_loss(p, real), rng.normal(size=(2, 1, 3, 3)))


class _Affine(nn.Module):
    """Tiny stand-in generator: per-channel 1x1 conv followed by tanh."""

    def __init__(self, rng):
        super().__init__()
        self.conv = nn.Conv2d(3, 3, 1).double()
        with torch.no_grad():
            self.conv.weight.copy_(torch.tensor(rng.normal(size=(3, 3, 1, 1))))
            self.conv.bias.copy_(torch.tensor(rng.normal(size=3) * 0.1))

    def forward(self, x):
        return torch.tanh(self.conv(x))


def cycle(seed: int) -> float:
    rng = np.random.default_rng(seed)
    G, F = _Affine(rng), _Affine(rng)
    y = torch.tensor(rng.uniform(-1, 1, size=(2, 3, 4, 4)), dtype=torch.float64)
    return _check(lambda x: cycle_loss(x, y, G, F), rng.uniform(-1, 1, size=(2, 3, 4, 4)))


def identity(seed: int) -> float:
    rng = np.random.default_rng(seed)
    G, F = _Affine(rng), _Affine(rng)
    x = torch.tensor(rng.uniform(-1, 1, size=(2, 3, 4, 4)), dtype=torch.float64)
    return _check(lambda y: identity_loss(x, y, G, F), rng.uniform(-1, 1, size=(2, 3, 4, 4)))


def _tiny_bundle(seed: int, lambda_id: float = 0.1) -> GanBundle:
    torch.manual_seed(seed)
    gs = GeneratorSpec(resolution=8, n_res_blocks=1, base_channels=2)
    ds = DiscriminatorSpec(resolution=8, n_down=2, base_channels=2)
    nets = [Generator(gs).double(), Generator(gs).double(), Discriminator(ds).double(), Discriminator(ds).double()]
    for n in nets:
        init_weights(n, 0.3)
    return GanBundle(*nets, lambda_cyc=10.0, lambda_id=lambda_id)


def total_generator(seed: int) -> float:
    rng = np.random.default_rng(seed)
    b = _tiny_bundle(seed)
    y = torch.tensor(rng.uniform(-1, 1, size=(1, 3, 8, 8)), dtype=torch.float64)
    return _check(lambda x: total_generator_loss(x, y, b).total, rng.uniform(-1, 1, size=(1, 3, 8, 8)),
                  n_coords=40, seed=seed)


def total_generator_params(seed: int) -> float:
    rng = np.random.default_rng(seed)
    b = _tiny_bundle(seed)
    x = torch.tensor(rng.uniform(-1, 1, size=(1, 3, 8, 8)), dtype=torch.float64)
    y = torch.tensor(rng.uniform(-1, 1, size=(1, 3, 8, 8)), dtype=torch.float64)
    return _params_check(b.G, lambda: total_generator_loss(x, y, b).total, rng)


def discriminator(seed: int) -> float:
    rng = np.random.default_rng(seed)
    b = _tiny_bundle(seed)
    fake = torch.tensor(rng.uniform(-1, 1, size=(1, 3, 8, 8)), dtype=torch.float64)
    return _check(lambda real: discriminator_loss(b.D_Y, real, fake), rng.uniform(-1, 1, size=(1, 3, 8, 8)),
                  n_coords=60, seed=seed)


def _a3c_inputs(seed: int, T: int = 4, J: int = 6):
    rng = np.random.default_rng(seed)
    actions = torch.tensor(rng.integers(0, 7, size=(T, J)))
    returns = torch.tensor(rng.normal(size=T), dtype=torch.float64)
    return rng, actions, returns


def a3c_logits(seed: int) -> float:
    rng, actions, returns = _a3c_inputs(seed)
    values = torch.tensor(rng.normal(size=4), dtype=torch.float64)
    return _check(lambda lg: a3c_loss(lg, values, actions, returns)[0], rng.normal(size=(4, 6, 7)))


def _frozen_advantage_loss(logits, values, actions, returns, advantage):
    """The A3C objective with the advantage held at a fixed value (the surrogate whose
    exact gradient the detached-advantage loss computes)."""
    logp = torch.log_softmax(logits, -1).gather(-1, actions.long().unsqueeze(-1)).squeeze(-1)
    p = torch.softmax(logits, -1)
    entropy = -(p * torch.log_softmax(logits, -1)).sum(-1)
    return (-(logp.sum(-1) * advantage).sum() + 0.5 * ((returns - values) ** 2).sum()
            - 0.01 * entropy.sum())


def a3c_values(seed: int) -> float:
    rng, actions, returns = _a3c_inputs(seed)
    logits = torch.tensor(rng.normal(size=(4, 6, 7)), dtype=torch.float64)
    v0 = rng.normal(size=4)
    adv0 = returns - torch.tensor(v0)
    return _check(lambda v: a3c_loss(logits, v, actions, returns)[0], v0,
                  fd_fn=lambda v: _frozen_advantage_loss(logits, v, actions, returns, adv0))


def a3c_network(seed: int) -> float:
    """Loss of a short rollout through a tiny actor-critic, w.r.t. its parameters."""
    rng, actions, returns = _a3c_inputs(seed, T=3, J=2)
    torch.manual_seed(seed)
    spec = PolicyNetSpec(resolution=28, conv1_filters=2, conv2_filters=3, fc_width=6, lstm_hidden=4, n_joints=2)
    net = ActorCritic(spec).double()
    with torch.no_grad():
        net.policy.weight.mul_(50.0)   # make the policy gradient non-negligible
        for name, p in net.named_parameters():
            if "bias" in name:   # zero biases put dead units exactly on the relu kink
                p.copy_(torch.tensor(rng.normal(scale=0.3, size=p.shape)))
    obs = torch.tensor(rng.uniform(-1, 1, size=(3, 1, 3, 28, 28)), dtype=torch.float64)

    def rollout():
        mem = net.initial_memory(dtype=torch.float64)
        logits, values = [], []
        for t in range(3):
            lg, v, mem = net(obs[t], mem)
            logits.append(lg[0])
            values.append(v[0])
        return torch.stack(logits), torch.stack(values)

    def loss():
        return a3c_loss(*rollout(), actions, returns)[0]

    with torch.no_grad():
        adv0 = returns - rollout()[1]

    def surrogate():
        return _frozen_advantage_loss(*rollout(), actions, returns, adv0)

    return _params_check(net, loss, rng, n_coords=60, fd_fn=surrogate)


CASES = {
    "demodulated_conv_input": demod_conv_input,
    "demodulated_conv_weight": demod_conv_weight,
    "residual_block": residual_block,
    "tanh_head": tanh_head,
    "adversarial_loss": adversarial,
    "cycle_loss": cycle,
    "identity_loss": identity,
    "total_generator_loss": total_generator,
    "total_generator_loss_params": total_generator_params,
    "discriminator_loss": discriminator,
    "a3c_loss_logits": a3c_logits,
    "a3c_loss_values": a3c_values,
    "a3c_loss_network": a3c_network,
}


def worst_error(name: str, n: int = N_INSTANCES) -> float:
    return max(CASES[name](seed) for seed in range(n))
