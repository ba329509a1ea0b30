"""Arm profiles and Denavit-Hartenberg forward kinematics."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

PROFILE_NAMES = ("irb120_like", "ur3e_like", "planar2dof_desk")


@dataclass(frozen=True)
class WorkspaceSpec:
    target_x_range: tuple[float, float]
    target_y_range: tuple[float, float]
    reach_annulus: tuple[float, float]
    target_z: float = 0.03
    # reject sampled targets beyond the outer reach radius
    clip_to_reach: bool = False

    def __post_init__(self):
        for lo, hi in (self.target_x_range, self.target_y_range):
            if not lo < hi:
                raise ValueError(f"degenerate target range ({lo}, {hi})")
        inner, outer = self.reach_annulus
        if not 0 <= inner < outer:
            raise ValueError(f"invalid reach annulus {self.reach_annulus}")

    def contains(self, xy) -> bool:
        x, y = float(xy[0]), float(xy[1])
        (x0, x1), (y0, y1) = self.target_x_range, self.target_y_range
        eps = 1e-12
        if not (x0 - eps <= x <= x1 + eps and y0 - eps <= y <= y1 + eps):
            return False
        if self.clip_to_reach and np.hypot(x, y) > self.reach_annulus[1] + eps:
            return False
        return True


@dataclass(frozen=True)
class CameraSpec:
    position: tuple[float, float, float]
    yaw: float
    tilt: float = np.pi / 6
    fov_deg: float = 55.0


@dataclass(frozen=True)
class MdpConfig:
    success_dist_train: float = 0.05
    success_dist_eval: float = 0.10
    success_reward: float = 70.0
    mpi_fraction: float = 0.015
    max_steps: int = 50

    def __post_init__(self):
        if not self.success_dist_train < self.success_dist_eval:
            raise ValueError("training success distance must be below the evaluation one")

    def action_increments(self, mpi: float) -> np.ndarray:
        """The 7 joint increments, indexed 0..6: 0, +-MPI, +-MPI/10, +-MPI/100."""
        return np.array([0.0, mpi, -mpi, mpi / 10, -mpi / 10, mpi / 100, -mpi / 100])


N_ACTIONS = 7


@dataclass(frozen=True)
class ArmModel:
    """Serial chain described by rows of (a, alpha, d, theta_offset)."""

    name: str
    dh_params: np.ndarray
    joint_limits: np.ndarray
    workspace: WorkspaceSpec
    camera: CameraSpec
    mdp: MdpConfig = field(default_factory=MdpConfig)
    base_z: float = 0.0
    tool_length: float = 0.0
    target_size: float = 0.06
    link_radius: float = 0.04
    agent_resolution: int = 64
    gan_resolution: int = 224

    def __post_init__(self):
        dh = np.asarray(self.dh_params, dtype=float)
        lim = np.asarray(self.joint_limits, dtype=float)
        if dh.ndim != 2 or dh.shape[1] != 4:
            raise ValueError("dh_params must have shape (n_joints, 4)")
        if lim.shape != (dh.shape[0], 2):
            raise ValueError("joint_limits must have shape (n_joints, 2)")
        if np.any(lim[:, 0] >= lim[:, 1]):
            raise ValueError("every joint needs min < max")
        object.__setattr__(self, "dh_params", dh)
        object.__setattr__(self, "joint_limits", lim)

    @property
    def n_joints(self) -> int:
        return self.dh_params.shape[0]

    @property
    def joint_mid(self) -> np.ndarray:
        return self.joint_limits.mean(axis=1)

    @property
    def joint_range(self) -> np.ndarray:
        return self.joint_limits[:, 1] - self.joint_limits[:, 0]

    @property
    def max_reach(self) -> float:
        """Upper bound on the gripper's distance from the first joint axis."""
        dh = self.dh_params
        return float(np.abs(dh[:, 0]).sum() + np.abs(dh[1:, 2]).sum() + self.tool_length)

    def within_limits(self, joints) -> bool:
        q = np.asarray(joints, dtype=float)
        lim = self.joint_limits
        return bool(np.all(q >= lim[:, 0] - 1e-12) and np.all(q <= lim[:, 1] + 1e-12))


def mpi(model: ArmModel, joint_index: int) -> float:
    """Maximum position increment of one joint: its working range times the MPI fraction."""
    if not 0 <= joint_index < model.n_joints:
        raise IndexError(f"joint index {joint_index} out of range for {model.n_joints} joints")
    lo, hi = model.joint_limits[joint_index]
    return float((hi - lo) * model.mdp.mpi_fraction)


def dh_transform(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def frame_origins(model: ArmModel, joints) -> np.ndarray:
    """World positions of the base and every joint frame, gripper last: shape (n_joints + 2, 3)."""
    q = np.asarray(joints, dtype=float)
    if q.shape != (model.n_joints,):
        raise ValueError(f"expected {model.n_joints} joint values, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint values must be finite")
    if not model.within_limits(q):
        raise ValueError(f"joint configuration {q} outside limits")
    T = np.eye(4)
    T[2, 3] = model.base_z
    points = [np.array([0.0, 0.0, 0.0]), T[:3, 3].copy()]
    for (a, alpha, d, offset), theta in zip(model.dh_params, q):
        T = T @ dh_transform(a, alpha, d, theta + offset)
        points.append(T[:3, 3].copy())
    if model.tool_length:
        points[-1] = points[-1] + T[:3, 2] * model.tool_length
    return np.stack(points)


def forward_kinematics(model: ArmModel, joints) -> np.ndarray:
    """Gripper position (x, y, z) in meters."""
    return frame_origins(model, joints)[-1]


def _model_from_dict(data: dict) -> ArmModel:
    ws = data["workspace"]
    cam = data["camera"]
    return ArmModel(
        name=data["name"],
        dh_params=np.array(data["dh"], dtype=float),
        joint_limits=np.deg2rad(np.array(data["joint_limits_deg"], dtype=float)),
        workspace=WorkspaceSpec(
            target_x_range=tuple(ws["target_x_range"]),
            target_y_range=tuple(ws["target_y_range"]),
            reach_annulus=tuple(ws["reach_annulus"]),
            target_z=ws.get("target_z", 0.03),
            clip_to_reach=ws.get("clip_to_reach", False),
        ),
        camera=CameraSpec(
            position=tuple(cam["position"]),
            yaw=cam["yaw"],
            tilt=cam.get("tilt", np.pi / 6),
            fov_deg=cam.get("fov_deg", 55.0),
        ),
        mdp=MdpConfig(**data.get("mdp", {})),
        base_z=data.get("base_z", 0.0),
        tool_length=data.get("tool_length", 0.0),
        target_size=data.get("target_size", 0.06),
        link_radius=data.get("link_radius", 0.04),
        agent_resolution=data.get("agent_resolution", 64),
        gan_resolution=data.get("gan_resolution", 224),
    )


def load_profile(name_or_path: str | Path) -> ArmModel:
    """Load a shipped profile by name, or any profile JSON file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    else:
        ref = resources.files("sicgan_s2r.arm_world") / "profiles" / f"{name_or_path}.json"
        if not ref.is_file():
            raise ValueError(f"unknown profile {name_or_path!r}; shipped: {', '.join(PROFILE_NAMES)}")
        text = ref.read_text()
    return _model_from_dict(json.loads(text))


def as_joint_array(model: ArmModel, joints: Sequence[float]) -> np.ndarray:
    q = np.asarray(joints, dtype=float).reshape(-1)
    if q.shape[0] != model.n_joints:
        raise ValueError(f"expected {model.n_joints} joints, got {q.shape[0]}")
    return q
