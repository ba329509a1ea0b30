"""Painter's-algorithm software rasterizer for the reach scene.

The scene is a ground plane, a sky backdrop, the arm drawn as capsules and an
optional cube target. Images come back as float32 HxWx3 arrays in [-1, 1].
The target is always composited last, unoccluded, the way an AR overlay lands
on a camera frame; this keeps virtual renders and translated observations
geometrically identical around the target.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .kinematics import ArmModel, CameraSpec, frame_origins

SKY_RGB = np.array([0.56, 0.56, 0.58])
GROUND_RGB = np.array([0.22, 0.52, 0.24])
LINK_RGB = (np.array([0.86, 0.86, 0.84]), np.array([0.36, 0.37, 0.40]))
GRIPPER_RGB = np.array([0.12, 0.12, 0.14])
TARGET_RGB = np.array([1.0, 0.0, 0.0])
BACKDROP_DIST = 0.9


@dataclass(frozen=True)
class StyleSpec:
    """Rendering style. ``virtual`` has every perturbation switched off."""

    style: str = "virtual"
    hue_shift: float = 0.0
    gain: tuple[float, float, float] = (1.0, 1.0, 1.0)
    noise_sigma: float = 0.0
    vignette_strength: float = 0.0
    light_dir: tuple[float, float, float] = (0.3, -0.2, 1.0)

    def __post_init__(self):
        if self.style not in ("virtual", "pseudo_real"):
            raise ValueError(f"unknown style {self.style!r}")
        if self.style == "virtual" and (
            self.hue_shift or self.noise_sigma or self.vignette_strength
            or tuple(self.gain) != (1.0, 1.0, 1.0)
        ):
            raise ValueError("virtual style carries no perturbations")

    @classmethod
    def virtual(cls) -> "StyleSpec":
        return cls()

    @classmethod
    def pseudo_real(cls) -> "StyleSpec":
        return cls(
            style="pseudo_real",
            hue_shift=0.30,
            gain=(1.10, 0.94, 0.84),
            noise_sigma=0.02,
            vignette_strength=0.40,
            light_dir=(-0.6, 0.5, 0.7),
        )


def get_style(name: str | StyleSpec) -> StyleSpec:
    if isinstance(name, StyleSpec):
        return name
    if name == "virtual":
        return StyleSpec.virtual()
    if name == "pseudo_real":
        return StyleSpec.pseudo_real()
    raise ValueError(f"unknown style {name!r}")


@dataclass(frozen=True)
class _View:
    width: int
    focal: float
    origin: np.ndarray = field(repr=False)
    forward: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    up: np.ndarray = field(repr=False)

    def project(self, pts: np.ndarray):
        d = np.atleast_2d(pts) - self.origin
        z = d @ self.forward
        u = self.width / 2 + self.focal * (d @ self.right) / z
        v = self.width / 2 - self.focal * (d @ self.up) / z
        return u, v, z


@lru_cache(maxsize=32)
def _view(camera: CameraSpec, width: int) -> _View:
    yaw, tilt = camera.yaw, camera.tilt
    forward = np.array([np.cos(yaw) * np.cos(tilt), np.sin(yaw) * np.cos(tilt), -np.sin(tilt)])
    right = np.array([np.sin(yaw), -np.cos(yaw), 0.0])
    up = np.cross(right, forward)
    focal = (width / 2) / np.tan(np.deg2rad(camera.fov_deg) / 2)
    return _View(width, focal, np.asarray(camera.position, float), forward, right, up)


@lru_cache(maxsize=32)
def _background(camera: CameraSpec, width: int) -> np.ndarray:
    view = _view(camera, width)
    c = np.arange(width) + 0.5
    uu, vv = np.meshgrid(c, c)
    rays = (view.forward[None, None, :]
            + ((uu - width / 2) / view.focal)[..., None] * view.right
            - ((vv - width / 2) / view.focal)[..., None] * view.up)
    rz = rays[..., 2]
    img = np.empty((width, width, 3))
    ground = rz < -1e-9
    t_ground = np.where(ground, -view.origin[2] / np.where(ground, rz, -1.0), np.inf)
    # backdrop: vertical wall facing the camera, BACKDROP_DIST behind the base
    h = np.array([np.cos(camera.yaw), np.sin(camera.yaw), 0.0])
    rh = rays @ h
    wall_off = BACKDROP_DIST - view.origin @ h
    t_wall = np.where(rh > 1e-9, wall_off / np.where(rh > 1e-9, rh, 1.0), np.inf)
    ground &= t_ground < t_wall
    hit = view.origin + np.where(ground, t_ground, 0.0)[..., None] * rays
    dist = np.hypot(hit[..., 0], hit[..., 1])
    fog = 1.0 - 0.3 * np.clip(dist / 2.5, 0.0, 1.0)
    img[ground] = GROUND_RGB * fog[ground][:, None]
    sky = ~ground
    # vertical gradient on the backdrop gives it some structure
    img[sky] = SKY_RGB * (0.85 + 0.15 * (vv[sky] / width))[:, None]
    img.setflags(write=False)
    return img


def _pixel_grid(width: int):
    c = np.arange(width) + 0.5
    return np.meshgrid(c, c)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _draw_capsule(img, uu, vv, view, p0, p1, radius, rgb, light):
    (u, v, z) = view.project(np.stack([p0, p1]))
    if np.any(z <= 1e-3):
        return
    r = view.focal * radius / z
    x0, x1 = (u - r).min(), (u + r).max()
    y0, y1 = (v - r).min(), (v + r).max()
    w = img.shape[0]
    i0, i1 = max(int(np.floor(y0)), 0), min(int(np.ceil(y1)) + 1, w)
    j0, j1 = max(int(np.floor(x0)), 0), min(int(np.ceil(x1)) + 1, w)
    if i0 >= i1 or j0 >= j1:
        return
    pu, pv = uu[i0:i1, j0:j1], vv[i0:i1, j0:j1]
    du, dv = u[1] - u[0], v[1] - v[0]
    seg2 = du * du + dv * dv
    if seg2 > 1e-12:
        t = np.clip(((pu - u[0]) * du + (pv - v[0]) * dv) / seg2, 0.0, 1.0)
    else:
        t = np.zeros_like(pu)
    dist = np.hypot(pu - (u[0] + t * du), pv - (v[0] + t * dv))
    rad = r[0] + t * (r[1] - r[0])
    mask = dist <= rad
    if not mask.any():
        return
    axis = p1 - p0
    n = np.linalg.norm(axis)
    lam = np.sqrt(max(0.0, 1.0 - (axis @ light / n) ** 2)) if n > 1e-12 else 1.0
    bulge = np.sqrt(np.clip(1.0 - (dist / np.maximum(rad, 1e-9)) ** 2, 0.0, 1.0))
    shade = 0.35 + 0.65 * lam * (0.45 + 0.55 * bulge)
    region = img[i0:i1, j0:j1]
    region[mask] = rgb * shade[mask][:, None]


_CUBE_FACES = (
    (np.array([1.0, 0, 0]), [(1, -1, -1), (1, 1, -1), (1, 1, 1), (1, -1, 1)]),
    (np.array([-1.0, 0, 0]), [(-1, -1, -1), (-1, -1, 1), (-1, 1, 1), (-1, 1, -1)]),
    (np.array([0, 1.0, 0]), [(-1, 1, -1), (-1, 1, 1), (1, 1, 1), (1, 1, -1)]),
    (np.array([0, -1.0, 0]), [(-1, -1, -1), (1, -1, -1), (1, -1, 1), (-1, -1, 1)]),
    (np.array([0, 0, 1.0]), [(-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1)]),
    (np.array([0, 0, -1.0]), [(-1, -1, -1), (-1, 1, -1), (1, 1, -1), (1, -1, -1)]),
)


def _fill_convex(uu, vv, u, v) -> np.ndarray:
    """Mask of pixel centres inside the convex polygon (u, v), either winding."""
    inside_pos = np.ones(uu.shape, dtype=bool)
    inside_neg = np.ones(uu.shape, dtype=bool)
    n = len(u)
    for k in range(n):
        ax, ay, bx, by = u[k], v[k], u[(k + 1) % n], v[(k + 1) % n]
        cross = (bx - ax) * (vv - ay) - (by - ay) * (uu - ax)
        inside_pos &= cross >= 0
        inside_neg &= cross <= 0
    return inside_pos | inside_neg


def _target_layer(camera, size, z, target_xy, width: int, light) -> tuple[np.ndarray, np.ndarray]:
    view = _view(camera, width)
    uu, vv = _pixel_grid(width)
    half = size / 2
    center = np.array([target_xy[0], target_xy[1], z])
    rgb = np.zeros((width, width, 3))
    mask = np.zeros((width, width), dtype=bool)
    faces = []
    for normal, corners in _CUBE_FACES:
        verts = center + half * np.array(corners, dtype=float)
        fc = verts.mean(axis=0)
        if normal @ (fc - view.origin) >= 0:
            continue
        faces.append(((fc - view.origin) @ view.forward, normal, verts))
    for _, normal, verts in sorted(faces, key=lambda f: -f[0]):
        u, v, z = view.project(verts)
        if np.any(z <= 1e-3):
            continue
        m = _fill_convex(uu, vv, u, v)
        shade = 0.55 + 0.45 * max(0.0, float(normal @ light))
        rgb[m] = TARGET_RGB * shade
        mask |= m
    return rgb, mask


def _hue_matrix(angle: float) -> np.ndarray:
    k = np.ones(3) / np.sqrt(3.0)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def _downsample(img: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return img
    h = img.shape[0] // factor
    return img.reshape(h, factor, h, factor, -1).mean(axis=(1, 3))


def _supersample_factor(resolution: int) -> int:
    return 2 if resolution <= 64 else 1


def render_scene(model: ArmModel, joints, resolution: int, style: StyleSpec | str = "virtual",
                 target_xy=None, seed: int = 0, frame: int = 0) -> np.ndarray:
    """Rasterize the scene; ``target_xy=None`` renders it without the target.

    ``seed`` and ``frame`` drive the pseudo-real pixel noise, so an identical
    (state, style, seed, frame, resolution) tuple always yields the same image.
    """
    style = get_style(style)
    resolution = int(resolution)
    if resolution < 8:
        raise ValueError(f"resolution {resolution} too small")
    ss = _supersample_factor(resolution)
    width = resolution * ss
    light = _unit(style.light_dir)
    view = _view(model.camera, width)
    uu, vv = _pixel_grid(width)
    img = _background(model.camera, width).copy()

    pts = frame_origins(model, joints)
    prims = []
    for k in range(len(pts) - 1):
        p0, p1 = pts[k], pts[k + 1]
        if np.linalg.norm(p1 - p0) < 1e-9:
            continue
        radius = model.link_radius * (1.0 if k < 2 else max(0.55, 1.0 - 0.1 * k))
        prims.append((p0, p1, radius, LINK_RGB[k % 2]))
    grip = pts[-1]
    prims.append((grip, grip, model.link_radius * 0.8, GRIPPER_RGB))
    depth = [((p0 + p1) / 2 - view.origin) @ view.forward for p0, p1, _, _ in prims]
    for idx in np.argsort(depth)[::-1]:
        p0, p1, radius, rgb = prims[idx]
        _draw_capsule(img, uu, vv, view, p0, p1, radius, rgb, light)

    if style.style == "pseudo_real":
        img = img @ _hue_matrix(style.hue_shift).T
        img = img * np.asarray(style.gain)
        r2 = ((uu - width / 2) ** 2 + (vv - width / 2) ** 2) / (width / 2) ** 2
        img = img * (1.0 - style.vignette_strength * np.clip(r2, 0, 2) / 2)[..., None]
    img = _downsample(img, ss)
    out = np.clip(img, 0.0, 1.0) * 2.0 - 1.0
    if style.noise_sigma > 0:
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, int(frame) & 0xFFFFFFFF, resolution])
        out = out + rng.normal(0.0, style.noise_sigma, out.shape)
    out = np.clip(out, -1.0, 1.0)

    if target_xy is not None:
        rgb, mask = target_layer(model, target_xy, resolution)
        out = np.where(mask[..., None], rgb, out)
    return out.astype(np.float32)


def target_layer(model: ArmModel, target_xy, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Target cube colors in [-1, 1] and its boolean pixel mask at ``resolution``.

    With supersampling, a pixel belongs to the mask when at least half its
    sub-samples hit the cube; the color is the mean over covered sub-samples.
    Results are cached (the target is static within an episode) and read-only.
    """
    return _cached_target_layer(model.camera, float(model.target_size), float(model.workspace.target_z),
                                float(target_xy[0]), float(target_xy[1]), int(resolution))


@lru_cache(maxsize=256)
def _cached_target_layer(camera, size, z, tx, ty, resolution):
    ss = _supersample_factor(resolution)
    width = resolution * ss
    rgb, mask = _target_layer(camera, size, z, (tx, ty), width, _unit(StyleSpec().light_dir))
    if ss > 1:
        cover = _downsample(mask[..., None].astype(float), ss)[..., 0]
        summed = _downsample(rgb, ss) * ss * ss
        counts = np.maximum(cover * ss * ss, 1)
        rgb = summed / counts[..., None]
        mask = cover >= 0.5
    out = (np.clip(rgb, 0, 1) * 2.0 - 1.0).astype(np.float32)
    out.setflags(write=False)
    mask.setflags(write=False)
    return out, mask


def target_colored(img: np.ndarray) -> np.ndarray:
    """Pixels that read as the red target: strong red, weak green and blue."""
    x = (np.asarray(img) + 1.0) / 2.0
    return (x[..., 0] > 0.45) & (x[..., 1] < 0.15) & (x[..., 2] < 0.15)
