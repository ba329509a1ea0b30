"""Estimator-style wrapper around actor-critic training, acting and persistence."""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_images, check_seed
from ..arm_world.env import ReachEnv
from ..arm_world.kinematics import load_profile
from .network import ActorCritic, PolicyNetSpec, obs_to_tensor
from .workers import TrainConfig, make_eval_set, run_episode, train_a3c

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("global_step", "mean_return", "success_rate")


def write_curve_csv(curve, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for row in curve:
            w.writerow([int(row["global_step"]), repr(float(row["mean_return"])), repr(float(row["success_rate"]))])
    return path


def save_eval_set(eval_set, path, profile: str, seed: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"profile": profile, "seed": int(seed), "configs": eval_set}, indent=2))
    return path


def load_eval_set(path) -> list[dict]:
    return json.loads(Path(path).read_text())["configs"]


class A3CAgent(BaseEstimator):
    """Asynchronous advantage actor-critic agent for the image reach task.

    ``fit`` trains a fresh network on environments built from ``profile``
    (or from an explicit factory) and keeps the parameters of the best
    interim evaluation. ``predict`` maps single observations to greedy
    per-joint actions from a fresh recurrent state; ``run_episode`` plays a
    full greedy episode with the recurrent state carried across steps.

    Defaults are tuned for the desk profile's 500k-step budget: a learning
    rate of 3e-4 and rewards scaled by 0.1 on the learner side. The long-run
    recipe (lr 1e-4, unscaled rewards) is ``TrainConfig()``.
    """

    def __init__(self, profile: str = "planar2dof_desk", resolution: Optional[int] = None,
                 total_steps: int = 500_000, n_workers: int = 8, rollout_len: int = 20,
                 gamma: float = 0.99, learning_rate: float = 3e-4, rmsprop_decay: float = 0.99,
                 rmsprop_eps: float = 1e-5, entropy_beta: float = 0.01, value_coef: float = 0.5,
                 reward_scale: float = 0.1,
                 grad_clip: float = 40.0, eval_interval: int = 50_000, eval_episodes: int = 40,
                 eval_seed: int = 40, seed: int = 123, mode: str = "serialized"):
        self.profile = profile
        self.resolution = resolution
        self.total_steps = total_steps
        self.n_workers = n_workers
        self.rollout_len = rollout_len
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.rmsprop_decay = rmsprop_decay
        self.rmsprop_eps = rmsprop_eps
        self.entropy_beta = entropy_beta
        self.value_coef = value_coef
        self.reward_scale = reward_scale
        self.grad_clip = grad_clip
        self.eval_interval = eval_interval
        self.eval_episodes = eval_episodes
        self.eval_seed = eval_seed
        self.seed = seed
        self.mode = mode

    def _model(self):
        return load_profile(self.profile)

    def _resolution(self) -> int:
        return int(self.resolution or self._model().agent_resolution)

    def train_config(self) -> TrainConfig:
        return TrainConfig(total_steps=self.total_steps, gamma=self.gamma, rmsprop_lr=self.learning_rate,
                           rmsprop_decay=self.rmsprop_decay, rmsprop_eps=self.rmsprop_eps,
                           entropy_beta=self.entropy_beta, value_coef=self.value_coef,
                           reward_scale=self.reward_scale, grad_clip=self.grad_clip, n_workers=self.n_workers,
                           rollout_len=self.rollout_len,
                           eval_interval=self.eval_interval, eval_episodes=self.eval_episodes,
                           seed=check_seed(self.seed), mode=self.mode)

    def _build(self) -> ActorCritic:
        model = self._model()
        self.spec_ = PolicyNetSpec(resolution=self._resolution(), n_joints=model.n_joints)
        torch.manual_seed(check_seed(self.seed))
        return ActorCritic(self.spec_)

    def make_env(self, mode: str = "train", observer=None, target_positions=None) -> ReachEnv:
        return ReachEnv(self._model(), resolution=self._resolution(), mode=mode, observer=observer,
                        target_positions=target_positions)

    def fit(self, X=None, y=None, observer: Optional[Callable] = None, target_positions=None,
            on_eval: Optional[Callable[[dict], None]] = None):
        """Train from scratch. ``X`` may be an environment factory; otherwise one is built
        from the profile with the given ``observer`` and saved ``target_positions``."""
        config = self.train_config()
        model = self._model()
        if X is None:
            def factory():
                return self.make_env("train", observer, target_positions)
        elif callable(X):
            factory = X
        else:
            raise ValueError("X must be None or an environment factory")
        self.eval_set_ = make_eval_set(model, self.eval_episodes, self.eval_seed)
        net = self._build()
        result = train_a3c(net, factory, config, self.eval_set_, on_eval=on_eval)
        if result.best_state is not None:
            net.load_state_dict(result.best_state)
        self.net_ = net.eval()
        self.curve_ = result.curve
        self.best_step_ = result.best_step
        self.global_steps_ = result.global_steps
        self.faults_ = result.faults
        self.final_state_ = result.final_state
        return self

    # -- acting -------------------------------------------------------------

    @torch.no_grad()
    def act(self, obs, memory=None, greedy: bool = True, generator: Optional[torch.Generator] = None):
        """One step of the policy; returns (actions, new memory)."""
        check_is_fitted(self, "net_")
        x = obs_to_tensor(check_images(obs, self.spec_.resolution, "obs")[0])
        memory = self.net_.initial_memory() if memory is None else memory
        logits, _, memory = self.net_(x, memory)
        if greedy:
            a = logits[0].argmax(-1)
        else:
            a = torch.multinomial(torch.softmax(logits[0], -1), 1, generator=generator).squeeze(-1)
        return a.numpy(), memory

    def predict(self, X) -> np.ndarray:
        """Greedy actions (N, n_joints) for a stack of observations, each from a fresh memory."""
        check_is_fitted(self, "net_")
        imgs = check_images(X, self.spec_.resolution)
        return np.stack([self.act(img)[0] for img in imgs])

    @torch.no_grad()
    def predict_proba(self, X) -> np.ndarray:
        """Per-joint action probabilities (N, n_joints, 7) from fresh memories."""
        check_is_fitted(self, "net_")
        imgs = check_images(X, self.spec_.resolution)
        out = []
        for img in imgs:
            logits, _, _ = self.net_(obs_to_tensor(img), self.net_.initial_memory())
            out.append(torch.softmax(logits[0], -1).numpy())
        return np.stack(out)

    def run_episode(self, env: ReachEnv, seed: int, joints=None, target_xy=None) -> dict:
        check_is_fitted(self, "net_")
        return run_episode(self.net_, env, seed=seed, joints=joints, target_xy=target_xy)

    # -- persistence --------------------------------------------------------

    def save(self, path, extra: Optional[dict] = None) -> Path:
        """``path.pt`` holds the parameters; ``path.json`` the spec, config, step and seed."""
        check_is_fitted(self, "net_")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(self.net_.state_dict(), path.with_suffix(".pt"))
        sidecar = {
            "params": self.get_params(),
            "spec": self.spec_.to_dict(),
            "config": self.train_config().to_dict(),
            "global_step": int(getattr(self, "global_steps_", 0)),
            "best_step": int(getattr(self, "best_step_", 0)),
            "seed": int(self.seed),
            **(extra or {}),
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
        return path.with_suffix(".pt")

    @classmethod
    def load(cls, path) -> "A3CAgent":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        agent = cls(**sidecar["params"])
        net = agent._build()
        if agent.spec_.to_dict() != sidecar["spec"]:
            raise ValueError("checkpoint spec does not match the profile/resolution")
        net.load_state_dict(torch.load(path.with_suffix(".pt"), weights_only=True))
        agent.net_ = net.eval()
        agent.global_steps_ = sidecar["global_step"]
        agent.best_step_ = sidecar["best_step"]
        return agent
