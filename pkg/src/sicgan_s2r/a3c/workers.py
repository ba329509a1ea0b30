"""Asynchronous actor-critic training: workers, the shared update and interim evaluation."""
from __future__ import annotations

import copy
import logging
import math
import multiprocessing as std_mp
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
import torch
import torch.multiprocessing as mp

from ..arm_world.env import ReachEnv, sample_initial_joints, sample_target
from ..arm_world.kinematics import ArmModel
from .losses import a3c_loss, n_step_returns
from .network import ActorCritic, obs_to_tensor
from .optim import SharedRMSprop

log = logging.getLogger(__name__)

EnvFactory = Callable[[], ReachEnv]


@dataclass
class TrainConfig:
    total_steps: int = 35_000_000
    gamma: float = 0.99
    rmsprop_lr: float = 1e-4
    rmsprop_decay: float = 0.99
    rmsprop_eps: float = 1e-5
    entropy_beta: float = 0.01
    trace_lambda: float = 1.0
    value_coef: float = 0.5
    reward_scale: float = 1.0
    grad_clip: float = 40.0
    n_workers: int = 8
    rollout_len: int = 20
    eval_interval: int = 50_000
    eval_episodes: int = 40
    seed: int = 123
    mode: str = "serialized"

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.entropy_beta < 0:
            raise ValueError("entropy_beta must be >= 0")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")
        if self.trace_lambda != 1.0:
            raise ValueError("only trace_lambda = 1 (plain n-step returns) is supported")
        if self.n_workers < 1 or self.rollout_len < 1 or self.total_steps < 1:
            raise ValueError("n_workers, rollout_len and total_steps must be positive")
        if self.mode not in ("serialized", "lock_free"):
            raise ValueError(f"mode must be 'serialized' or 'lock_free', got {self.mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def make_eval_set(model: ArmModel, n: int = 40, seed: int = 0) -> list[dict]:
    """Fixed (initial joints, target xy) configurations for interim evaluation."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        q = sample_initial_joints(model, rng)
        t = sample_target(model, rng)
        out.append({"joints": q.tolist(), "target_xy": t.tolist()})
    return out


@torch.no_grad()
def run_episode(net: ActorCritic, env: ReachEnv, seed: int, joints=None, target_xy=None,
                greedy: bool = True, generator: Optional[torch.Generator] = None) -> dict:
    """Play one episode; returns return, length, final distance, success and gripper path."""
    obs = env.reset(seed=seed, joints=joints, target_xy=target_xy)
    memory = net.initial_memory()
    total, done, info = 0.0, False, {"dist": env.state.last_dist, "success": False}
    while not done:
        logits, _, memory = net(obs_to_tensor(obs), memory)
        if greedy:
            a = logits[0].argmax(-1)
        else:
            a = torch.multinomial(torch.softmax(logits[0], -1), 1, generator=generator).squeeze(-1)
        obs, r, done, info = env.step(a.numpy())
        total += r
    return {
        "return": total,
        "length": env.state.step_count,
        "final_dist": info["dist"],
        "success": bool(info["success"]),
        "gripper_path": np.array(env.state.gripper_path),
        "target_xy": env.state.target_xy.copy(),
    }


def interim_evaluate(net: ActorCritic, env: ReachEnv, eval_set: list[dict]) -> dict:
    """Greedy pass over the fixed configurations at the training success distance."""
    if env.mode != "train":
        raise ValueError("interim evaluation uses the training success distance")
    results = [run_episode(net, env, seed=k, joints=c["joints"], target_xy=c["target_xy"])
               for k, c in enumerate(eval_set)]
    return {
        "mean_return": float(np.mean([r["return"] for r in results])),
        "success_rate": float(np.mean([r["success"] for r in results])),
    }


class Worker:
    """One actor-learner. Owns its environment, local network copy, RNG and LSTM state."""

    def __init__(self, worker_id: int, env: ReachEnv, net: ActorCritic, config: TrainConfig):
        self.worker_id = worker_id
        self.env = env
        self.local = copy.deepcopy(net)
        self.config = config
        self.seed_rng = np.random.default_rng([config.seed, worker_id])
        self.generator = torch.Generator().manual_seed(config.seed * 1000 + worker_id)
        self.obs = None
        self.memory = None
        self.faults = 0
        self.episodes = 0
        self.episode_return = 0.0

    def _new_episode(self):
        for _ in range(3):
            try:
                self.obs = self.env.reset(seed=int(self.seed_rng.integers(2 ** 31)))
                break
            except Exception:  # pragma: no cover - env faults are rare and logged
                self.faults += 1
                log.exception("worker %d: env fault on reset", self.worker_id)
        else:
            raise RuntimeError(f"worker {self.worker_id}: environment keeps failing")
        self.memory = self.local.initial_memory()
        self.episode_return = 0.0

    def run_segment(self, global_net: ActorCritic, optimizer: SharedRMSprop) -> int:
        """Sync, collect up to ``rollout_len`` steps, apply gradients to the global net."""
        cfg = self.config
        self.local.load_state_dict(global_net.state_dict())
        if self.obs is None:
            self._new_episode()
        h, c = (m.detach() for m in self.memory)
        logits_seq, values, actions, rewards = [], [], [], []
        done = False
        for _ in range(cfg.rollout_len):
            logits, value, (h, c) = self.local(obs_to_tensor(self.obs), (h, c))
            with torch.no_grad():
                a = torch.multinomial(torch.softmax(logits[0], -1), 1, generator=self.generator).squeeze(-1)
            try:
                self.obs, r, done, _ = self.env.step(a.numpy())
            except Exception:
                self.faults += 1
                log.exception("worker %d: env fault on step, restarting episode", self.worker_id)
                self.obs = None
                return 0
            logits_seq.append(logits[0])
            values.append(value[0])
            actions.append(a)
            rewards.append(r)
            self.episode_return += r
            if done:
                break
        n = len(rewards)
        if done:
            bootstrap = 0.0
        else:
            with torch.no_grad():
                _, v_next, _ = self.local(obs_to_tensor(self.obs), (h, c))
            bootstrap = float(v_next[0])
        # the learner may see rescaled rewards; episode returns are logged unscaled
        returns = n_step_returns(np.asarray(rewards) * cfg.reward_scale, cfg.gamma, bootstrap)
        loss, _ = a3c_loss(torch.stack(logits_seq), torch.stack(values), torch.stack(actions),
                           torch.as_tensor(returns, dtype=torch.float32),
                           cfg.entropy_beta, cfg.value_coef)
        self.local.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(self.local.parameters(), cfg.grad_clip)
        for gp, lp in zip(global_net.parameters(), self.local.parameters()):
            gp.grad = lp.grad
        optimizer.step()
        if done:
            self.episodes += 1
            self.obs = None
        else:
            self.memory = (h.detach(), c.detach())
        return n


@dataclass
class TrainResult:
    curve: list[dict]
    best_state: dict
    best_step: int
    final_state: dict
    global_steps: int
    faults: int


class _Evaluator:
    def __init__(self, net, env_factory, eval_set, config, on_eval):
        self.net = copy.deepcopy(net)
        self.env = env_factory()
        self.eval_set = eval_set
        self.interval = config.eval_interval
        self.next_at = config.eval_interval
        self.curve: list[dict] = []
        self.best = (-math.inf, None, 0)
        self.on_eval = on_eval

    def maybe(self, global_net, step: int, force: bool = False):
        while step >= self.next_at or force:
            at = min(self.next_at, step) if not force else step
            self.net.load_state_dict(global_net.state_dict())
            res = interim_evaluate(self.net, self.env, self.eval_set)
            row = {"global_step": int(at), **res}
            self.curve.append(row)
            if self.on_eval is not None:
                self.on_eval(row)
            if res["mean_return"] > self.best[0]:
                self.best = (res["mean_return"], copy.deepcopy(global_net.state_dict()), int(at))
            if force:
                break
            self.next_at += self.interval


def _lock_free_worker(worker_id, global_net, optimizer, counter, config, env_factory, faults):
    torch.set_num_threads(1)
    torch.manual_seed(config.seed + worker_id)
    worker = Worker(worker_id, env_factory(), global_net, config)
    while counter.value < config.total_steps:
        n = worker.run_segment(global_net, optimizer)
        with counter.get_lock():
            counter.value += n
    with faults.get_lock():
        faults.value += worker.faults


def train_a3c(net: ActorCritic, env_factory: EnvFactory, config: TrainConfig, eval_set: list[dict],
              on_eval: Optional[Callable[[dict], None]] = None, poll_seconds: float = 0.5) -> TrainResult:
    """Train ``net`` in place as the global network.

    ``serialized`` mode interleaves the workers round-robin inside this
    process, one segment at a time, so runs are bit-reproducible.
    ``lock_free`` mode forks one process per worker; they update the shared
    parameters without mutual exclusion while this process evaluates
    snapshots.
    """
    torch.manual_seed(config.seed)
    optimizer = SharedRMSprop(net.parameters(), lr=config.rmsprop_lr, alpha=config.rmsprop_decay,
                              eps=config.rmsprop_eps)
    evaluator = _Evaluator(net, env_factory, eval_set, config, on_eval)

    if config.mode == "serialized":
        workers = [Worker(k, env_factory(), net, config) for k in range(config.n_workers)]
        step = 0
        while step < config.total_steps:
            for w in workers:
                step += w.run_segment(net, optimizer)
                evaluator.maybe(net, step)
                if step >= config.total_steps:
                    break
        faults = sum(w.faults for w in workers)
    else:
        net.share_memory()
        optimizer.share_memory()
        ctx = mp.get_context("fork")
        counter = ctx.Value("l", 0)
        fault_count = ctx.Value("l", 0)
        procs = [ctx.Process(target=_lock_free_worker,
                             args=(k, net, optimizer, counter, config, env_factory, fault_count))
                 for k in range(config.n_workers)]
        for p in procs:
            p.start()
        try:
            while any(p.is_alive() for p in procs):
                evaluator.maybe(net, counter.value)
                std_mp.connection.wait([p.sentinel for p in procs], timeout=poll_seconds)
        finally:
            for p in procs:
                p.join()
        if any(p.exitcode != 0 for p in procs):
            raise RuntimeError("an A3C worker process failed")
        step = counter.value
        evaluator.maybe(net, step)
        faults = fault_count.value
        if not all(torch.isfinite(p).all() for p in net.parameters()):
            raise FloatingPointError("global parameters became non-finite")

    if not evaluator.curve or evaluator.curve[-1]["global_step"] != step:
        evaluator.maybe(net, step, force=True)
    _, best_state, best_step = evaluator.best
    return TrainResult(curve=evaluator.curve, best_state=best_state, best_step=best_step,
                       final_state=copy.deepcopy(net.state_dict()), global_steps=step, faults=faults)
