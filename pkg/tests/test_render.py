import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sicgan_s2r.arm_world import StyleSpec, load_profile, render_scene, target_colored, target_layer
from sicgan_s2r.bridge import target_grid


@pytest.mark.parametrize("style", ["virtual", "pseudo_real"])
@pytest.mark.parametrize("res", [32, 64])
def test_render_range_shape_and_determinism(desk, style, res):
    q = desk.joint_mid + 0.1
    a = render_scene(desk, q, res, style, target_xy=[0.3, 0.0], seed=4, frame=2)
    b = render_scene(desk, q, res, style, target_xy=[0.3, 0.0], seed=4, frame=2)
    assert a.shape == (res, res, 3) and a.dtype == np.float32
    assert a.min() >= -1.0 and a.max() <= 1.0
    assert np.array_equal(a, b)


def test_pseudo_real_noise_depends_on_frame(desk):
    q = desk.joint_mid
    a = render_scene(desk, q, 32, "pseudo_real", seed=1, frame=0)
    b = render_scene(desk, q, 32, "pseudo_real", seed=1, frame=1)
    assert not np.array_equal(a, b)


def test_styles_differ(desk):
    q = desk.joint_mid
    v = render_scene(desk, q, 32, "virtual")
    p = render_scene(desk, q, 32, "pseudo_real")
    assert np.abs(v - p).mean() > 0.05


def test_virtual_style_rejects_perturbations():
    with pytest.raises(ValueError):
        StyleSpec(style="virtual", noise_sigma=0.1)
    with pytest.raises(ValueError):
        StyleSpec(style="sepia")


@pytest.mark.parametrize("name", ["irb120_like", "ur3e_like", "planar2dof_desk"])
def test_target_mask_nonempty_over_grid(name):
    """Every saved target position rasterizes to at least one target-colored pixel."""
    model = load_profile(name)
    for t in target_grid(model, 5):
        for res in (model.agent_resolution, model.gan_resolution):
            rgb, mask = target_layer(model, t, res)
            assert mask.sum() >= 1
            assert target_colored(rgb[mask]).all()


def test_target_drawn_on_top(desk):
    q = desk.joint_mid
    t = [0.3, 0.0]
    img = render_scene(desk, q, 32, "virtual", target_xy=t)
    rgb, mask = target_layer(desk, t, 32)
    np.testing.assert_allclose(img[mask], rgb[mask], atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(u=st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_arm_without_target_never_looks_like_target(desk, u):
    lim = desk.joint_limits
    q = lim[:, 0] + np.array(u) * (lim[:, 1] - lim[:, 0])
    for style in ("virtual", "pseudo_real"):
        assert not target_colored(render_scene(desk, q, 32, style)).any()


def test_too_small_resolution_rejected(desk):
    with pytest.raises(ValueError):
        render_scene(desk, desk.joint_mid, 4)
