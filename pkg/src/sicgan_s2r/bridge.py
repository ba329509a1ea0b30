"""Observation pipelines between the simulator and the agent.

Translated path: target-free virtual render at GAN resolution -> sim-to-real
generator -> target cube pasted on top (alpha 1) -> area-average downsample to
the agent resolution. Zero-shot path: pseudo-real render with the target, fed
to the agent as is.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from PIL import Image

from .arm_world.env import ReachEnv
from .arm_world.kinematics import ArmModel, load_profile
from .arm_world.render import render_scene, target_layer

Translator = Callable[[np.ndarray], np.ndarray]


def area_downsample(img: np.ndarray, size: int) -> np.ndarray:
    """Area-average resize of an HxWxC float image to size x size.

    Each output pixel is the coverage-weighted mean of the input pixels under
    it, so integer factors reduce to plain block means.
    """
    img = np.asarray(img, dtype=np.float32)
    if img.shape[0] == size and img.shape[1] == size:
        return img.copy()
    chans = [np.asarray(Image.fromarray(np.ascontiguousarray(img[..., c])).resize((size, size), Image.Resampling.BOX))
             for c in range(img.shape[-1])]
    return np.stack(chans, axis=-1).astype(np.float32)


def composite_target(img: np.ndarray, model: ArmModel, target_xy) -> np.ndarray:
    """Paste the rasterized target cube over ``img`` with alpha 1; other pixels are untouched."""
    if not model.workspace.contains(target_xy):
        raise ValueError(f"target {tuple(target_xy)} lies outside the target region")
    rgb, mask = target_layer(model, target_xy, img.shape[0])
    out = np.array(img, dtype=np.float32, copy=True)
    out[mask] = rgb[mask]
    return out


def translate_observation(model: ArmModel, joints, target_xy, translator: Translator,
                          gan_resolution: Optional[int] = None, agent_resolution: Optional[int] = None) -> np.ndarray:
    """Agent observation built from a translated target-free render."""
    if not model.workspace.contains(target_xy):
        raise ValueError(f"target {tuple(target_xy)} lies outside the target region")
    gres = int(gan_resolution or model.gan_resolution)
    ares = int(agent_resolution or model.agent_resolution)
    raw = render_scene(model, joints, gres, "virtual", target_xy=None)
    fake = np.asarray(translator(raw[None]), dtype=np.float32)
    if fake.shape != (1, gres, gres, 3):
        raise ValueError(f"translator returned shape {fake.shape}, expected {(1, gres, gres, 3)}")
    out = area_downsample(composite_target(fake[0], model, target_xy), ares)
    return np.clip(out, -1.0, 1.0)


def zero_shot_observation(model: ArmModel, joints, target_xy, agent_resolution: Optional[int] = None,
                          seed: int = 0, frame: int = 0) -> np.ndarray:
    """Pseudo-real render with the target, no translation."""
    ares = int(agent_resolution or model.agent_resolution)
    return render_scene(model, joints, ares, "pseudo_real", target_xy=target_xy, seed=seed, frame=frame)


@dataclass
class TranslatedObserver:
    """``ReachEnv`` observer that runs every frame through a translator.

    The translator is any batch callable on (N, S, S, 3) arrays in [-1, 1],
    e.g. ``SICGAN.transform``.
    """

    translator: Translator
    gan_resolution: Optional[int] = None
    agent_resolution: Optional[int] = None
    calls: int = field(default=0, init=False)

    def __call__(self, env: ReachEnv) -> np.ndarray:
        self.calls += 1
        st = env.state
        return translate_observation(env.model, st.joints, st.target_xy, self.translator,
                                     self.gan_resolution, self.agent_resolution or env.resolution)


def zero_shot_observer(env: ReachEnv) -> np.ndarray:
    st = env.state
    return zero_shot_observation(env.model, st.joints, st.target_xy, env.resolution, st.seed, st.step_count)


def target_grid(model: ArmModel | str, n: int = 5) -> list[list[float]]:
    """Uniform n x n lattice over the target rectangle, dropping points outside the region."""
    model = load_profile(model) if isinstance(model, str) else model
    if n < 1:
        raise ValueError("grid size must be >= 1")
    ws = model.workspace
    xs = np.linspace(*ws.target_x_range, n) if n > 1 else np.array([np.mean(ws.target_x_range)])
    ys = np.linspace(*ws.target_y_range, n) if n > 1 else np.array([np.mean(ws.target_y_range)])
    pts = [[float(x), float(y)] for x in xs for y in ys if ws.contains((x, y))]
    if not pts:
        raise ValueError("no lattice point falls inside the target region")
    return pts


def save_target_grid(points: Sequence, path, profile: str, seed: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"profile": profile, "seed": int(seed),
                                "targets": [[float(x), float(y)] for x, y in points]}, indent=2))
    return path


def load_target_grid(path, model: Optional[ArmModel] = None) -> list[list[float]]:
    data = json.loads(Path(path).read_text())
    pts = data["targets"] if isinstance(data, dict) else data
    if model is not None:
        bad = [p for p in pts if not model.workspace.contains(p)]
        if bad:
            raise ValueError(f"{len(bad)} saved targets lie outside the target region")
    return [[float(x), float(y)] for x, y in pts]
