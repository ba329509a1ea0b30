"""Reach MDP over a kinematic arm, with a pluggable observation function."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kinematics import ArmModel, N_ACTIONS, forward_kinematics, load_profile, mpi
from .render import StyleSpec, get_style, render_scene


class EpisodeDone(RuntimeError):
    """Raised when stepping an environment whose episode has ended."""


@dataclass
class EpisodeState:
    joints: np.ndarray
    target_xy: np.ndarray
    seed: int
    step_count: int = 0
    done: bool = False
    success: bool = False
    last_dist: float = float("nan")
    gripper_path: list = field(default_factory=list)


def sample_target(model: ArmModel, rng: np.random.Generator) -> np.ndarray:
    ws = model.workspace
    while True:
        xy = np.array([rng.uniform(*ws.target_x_range), rng.uniform(*ws.target_y_range)])
        if ws.contains(xy):
            return xy


def sample_initial_joints(model: ArmModel, rng: np.random.Generator, band: float = 0.15) -> np.ndarray:
    """Uniform within +-band of the working range around each joint's mid-range."""
    half = band * model.joint_range
    return model.joint_mid + rng.uniform(-half, half)


def sample_pose(model: ArmModel, rng: np.random.Generator) -> np.ndarray:
    """Uniform over the full joint limits, rejecting poses with the gripper below the floor."""
    lim = model.joint_limits
    while True:
        q = rng.uniform(lim[:, 0], lim[:, 1])
        if forward_kinematics(model, q)[2] >= 0.0:
            return q


class ReachEnv:
    """Image-observation reach task.

    Actions are one index in 0..6 per joint selecting an increment from
    {0, +-MPI, +-MPI/10, +-MPI/100}. Each step pays -(2*dist)^2, or +70 and
    ends the episode once the gripper is within the success distance of the
    target centre. Episodes are capped at ``mdp.max_steps`` steps.

    ``observer`` replaces the default renderer; it receives the environment
    and must return an HxWx3 array in [-1, 1]. ``target_positions`` restricts
    random targets to a saved list of (x, y) points.
    """

    def __init__(self, model: ArmModel | str = "planar2dof_desk", style: StyleSpec | str = "virtual",
                 resolution: Optional[int] = None, mode: str = "train",
                 observer: Optional[Callable[["ReachEnv"], np.ndarray]] = None,
                 target_positions=None):
        self.model = load_profile(model) if isinstance(model, str) else model
        self.style = get_style(style)
        self.resolution = int(resolution or self.model.agent_resolution)
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        self.mode = mode
        self.observer = observer
        self.target_positions = None
        if target_positions is not None:
            pts = np.asarray(target_positions, dtype=float).reshape(-1, 2)
            if len(pts) == 0 or not all(self.model.workspace.contains(p) for p in pts):
                raise ValueError("saved target positions must be non-empty and inside the target region")
            self.target_positions = pts
        mdp = self.model.mdp
        self.increments = np.stack([mdp.action_increments(mpi(self.model, j))
                                    for j in range(self.model.n_joints)])
        self.state: Optional[EpisodeState] = None

    @property
    def n_joints(self) -> int:
        return self.model.n_joints

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    @property
    def success_dist(self) -> float:
        mdp = self.model.mdp
        return mdp.success_dist_train if self.mode == "train" else mdp.success_dist_eval

    def gripper(self) -> np.ndarray:
        return forward_kinematics(self.model, self.state.joints)

    def distance(self) -> float:
        g = self.gripper()
        c = np.array([*self.state.target_xy, self.model.workspace.target_z])
        return float(np.linalg.norm(g - c))

    def reset(self, seed: int = 0, joints=None, target_xy=None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        q = sample_initial_joints(self.model, rng) if joints is None else np.asarray(joints, float).copy()
        if target_xy is not None:
            t = np.asarray(target_xy, float).copy()
        elif self.target_positions is not None:
            t = self.target_positions[rng.integers(len(self.target_positions))].copy()
        else:
            t = sample_target(self.model, rng)
        if not self.model.within_limits(q):
            raise ValueError("initial joints outside limits")
        self.state = EpisodeState(joints=q, target_xy=t, seed=int(seed))
        self.state.last_dist = self.distance()
        self.state.gripper_path.append(self.gripper())
        return self.observe()

    def step(self, actions):
        st = self.state
        if st is None:
            raise EpisodeDone("reset() must be called before step()")
        if st.done:
            raise EpisodeDone("episode already finished; call reset()")
        a = np.asarray(actions, dtype=int).reshape(-1)
        if a.shape[0] != self.n_joints or np.any((a < 0) | (a >= N_ACTIONS)):
            raise ValueError(f"expected {self.n_joints} action indices in 0..{N_ACTIONS - 1}, got {actions}")
        delta = self.increments[np.arange(self.n_joints), a]
        lim = self.model.joint_limits
        st.joints = np.clip(st.joints + delta, lim[:, 0], lim[:, 1])
        st.step_count += 1
        dist = self.distance()
        st.last_dist = dist
        st.gripper_path.append(self.gripper())
        if dist <= self.success_dist:
            reward = self.model.mdp.success_reward
            st.success = True
            st.done = True
        else:
            reward = -(2.0 * dist) ** 2
            st.done = st.step_count >= self.model.mdp.max_steps
        obs = self.observe()
        return obs, float(reward), st.done, {"dist": dist, "success": st.success}

    def observe(self) -> np.ndarray:
        if self.observer is not None:
            return self.observer(self)
        return self.render(self.style, self.resolution, include_target=True)

    def render(self, style: StyleSpec | str, resolution: int, include_target: bool = True) -> np.ndarray:
        st = self.state
        return render_scene(self.model, st.joints, resolution, style,
                            target_xy=st.target_xy if include_target else None,
                            seed=st.seed, frame=st.step_count)


def sample_corpus(model: ArmModel | str, n: int, style: StyleSpec | str, seed: int,
                  resolution: Optional[int] = None) -> list[np.ndarray]:
    """``n`` target-free renders of random in-limit poses in one fixed style."""
    if n < 1:
        raise ValueError("corpus size must be >= 1")
    model = load_profile(model) if isinstance(model, str) else model
    res = int(resolution or model.gan_resolution)
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        q = sample_pose(model, rng)
        out.append(render_scene(model, q, res, style, target_xy=None, seed=seed, frame=k))
    return out
