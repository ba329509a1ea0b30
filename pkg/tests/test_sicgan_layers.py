import numpy as np
import pytest
import torch
import torch.nn as nn
from hypothesis import given, settings, strategies as st

from sicgan_s2r.sicgan import (Discriminator, DiscriminatorSpec, Generator, GeneratorSpec, ResidualBlock,
                               demodulated_conv, init_weights)
from sicgan_s2r.sicgan.layers import standardize

from gradcases import TOL, worst_error
from oracles import conv2d_np, reflect_pad_np, standardize_np


def test_generator_full_resolution_shape_and_range():
    torch.manual_seed(0)
    gen = Generator(GeneratorSpec())
    init_weights(gen)
    with torch.no_grad():
        out = gen(torch.rand(1, 3, 224, 224) * 2 - 1)
    assert out.shape == (1, 3, 224, 224)
    assert out.min() >= -1 and out.max() <= 1


def test_discriminator_full_resolution_grid():
    torch.manual_seed(0)
    disc = Discriminator(DiscriminatorSpec())
    with torch.no_grad():
        out = disc(torch.zeros(1, 3, 224, 224))
    assert out.shape == (1, 1, 28, 28)


def test_discriminator_desk_grid():
    disc = Discriminator(DiscriminatorSpec(resolution=64, base_channels=8))
    with torch.no_grad():
        assert disc(torch.zeros(2, 3, 64, 64)).shape == (2, 1, 8, 8)


def test_discriminator_channel_layout():
    disc = Discriminator(DiscriminatorSpec(resolution=64))
    convs = [m for m in disc.modules() if isinstance(m, nn.Conv2d)]
    assert [c.out_channels for c in convs] == [64, 128, 256, 512, 1]
    assert [c.stride[0] for c in convs] == [2, 2, 2, 1, 1]
    assert all(c.kernel_size == (4, 4) for c in convs)


def test_leaky_slope():
    disc = Discriminator(DiscriminatorSpec(resolution=64))
    leaky = [m for m in disc.modules() if isinstance(m, nn.LeakyReLU)]
    assert leaky and all(float(m(torch.tensor(-1.0))) == pytest.approx(-0.2) for m in leaky)


@pytest.mark.parametrize("cls,spec", [(Generator, GeneratorSpec(resolution=64, n_res_blocks=1, base_channels=4)),
                                      (Discriminator, DiscriminatorSpec(resolution=64, base_channels=4))])
def test_resolution_mismatch_rejected(cls, spec):
    with pytest.raises(ValueError):
        cls(spec)(torch.zeros(1, 3, 32, 32))


@pytest.mark.parametrize("kwargs", [dict(resolution=66), dict(n_res_blocks=0), dict(norm="layer")])
def test_bad_generator_spec(kwargs):
    with pytest.raises(ValueError):
        GeneratorSpec(**kwargs)


def test_bad_discriminator_spec():
    with pytest.raises(ValueError):
        DiscriminatorSpec(resolution=60, n_down=3)


def test_generator_deterministic():
    torch.manual_seed(3)
    gen = Generator(GeneratorSpec(resolution=32, n_res_blocks=2, base_channels=4))
    x = torch.rand(1, 3, 32, 32) * 2 - 1
    with torch.no_grad():
        assert torch.equal(gen(x), gen(x))


def test_residual_block_zero_weights_is_identity():
    block = ResidualBlock(3)
    for p in block.parameters():
        nn.init.zeros_(p)
    x = torch.randn(2, 3, 6, 6)
    with torch.no_grad():
        assert torch.equal(block(x), x)


def test_demod_constant_input_gives_zero():
    x = torch.full((1, 2, 5, 5), 0.7, dtype=torch.float64)
    w = torch.randn(3, 2, 3, 3, dtype=torch.float64)
    # zero up to the rounding left by the mean subtraction
    assert demodulated_conv(x, w, padding=1).abs().max() <= 1e-6


def test_demod_matches_numpy_reference(rng):
    x = rng.normal(size=(2, 2, 6, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    ref = standardize_np(conv2d_np(reflect_pad_np(x, 1), w))
    got = demodulated_conv(torch.tensor(x), torch.tensor(w), padding=1).numpy()
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_demod_rejects_bad_inputs():
    w = torch.randn(3, 2, 3, 3)
    with pytest.raises(ValueError):
        demodulated_conv(torch.full((1, 2, 4, 4), float("nan")), w)
    with pytest.raises(ValueError):
        demodulated_conv(torch.zeros(1, 4, 4, 4), w)
    with pytest.raises(ValueError):
        demodulated_conv(torch.zeros(1, 2, 4, 4), w, eps=0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), scale=st.floats(1e-2, 1e3), side=st.integers(3, 9))
def test_demod_normalization(seed, scale, side):
    g = torch.Generator().manual_seed(seed)
    x = torch.randn(2, 3, side, side, generator=g, dtype=torch.float64) * scale
    w = torch.randn(4, 3, 3, 3, generator=g, dtype=torch.float64)
    raw = torch.nn.functional.conv2d(torch.nn.functional.pad(x, (1,) * 4, mode="reflect"), w)
    out = demodulated_conv(x, w, padding=1)
    assert out.mean(dim=(2, 3)).abs().max() <= 1e-6
    sd_in = raw.var(dim=(2, 3), unbiased=False).sqrt()
    sd_out = out.var(dim=(2, 3), unbiased=False).sqrt()
    ok = sd_in >= 1e-3
    assert ((sd_out[ok] - 1).abs() <= 1e-3).all()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), gain=st.floats(0.01, 50.0))
def test_generator_output_bounded(seed, gain):
    torch.manual_seed(seed)
    gen = Generator(GeneratorSpec(resolution=16, n_res_blocks=1, base_channels=2))
    init_weights(gen, gain)
    with torch.no_grad():
        out = gen(torch.rand(1, 3, 16, 16) * 2 - 1)
    assert out.shape == (1, 3, 16, 16)
    assert out.min() >= -1 and out.max() <= 1


def test_standardize_mean_zero():
    a = torch.randn(3, 5, 7, 7, dtype=torch.float64) * 10 + 4
    assert standardize(a).mean(dim=(2, 3)).abs().max() < 1e-12


def test_init_weights_statistics():
    torch.manual_seed(0)
    gen = Generator(GeneratorSpec(resolution=32, n_res_blocks=2, base_channels=16))
    init_weights(gen, 0.02)
    w = torch.cat([m.weight.reshape(-1) for m in gen.modules() if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d))])
    assert abs(float(w.mean())) < 1e-3
    assert float(w.std()) == pytest.approx(0.02, rel=0.02)


def test_vanilla_norm_uses_batchnorm():
    gen = Generator(GeneratorSpec(resolution=16, n_res_blocks=1, base_channels=2, norm="batch"))
    assert any(isinstance(m, nn.BatchNorm2d) for m in gen.modules())


@pytest.mark.parametrize("case", ["demodulated_conv_input", "demodulated_conv_weight", "residual_block",
                                  "tanh_head"])
def test_layer_gradients_match_finite_differences(case):
    assert worst_error(case, n=5) < TOL
