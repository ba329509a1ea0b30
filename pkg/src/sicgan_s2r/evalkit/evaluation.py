"""Greedy evaluation protocols and their reports."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..a3c.network import ActorCritic
from ..a3c.workers import run_episode
from ..arm_world.env import ReachEnv
from .metrics import accuracy


@dataclass
class EvalReport:
    accuracy: float
    mean_episode_length: float
    mean_return: float
    failure_distances: list
    per_position: dict = field(default_factory=dict)
    threshold: float = 0.10
    seed: int = 0
    n_episodes: int = 0
    episodes: list = field(default_factory=list)

    def to_dict(self, include_episodes: bool = False) -> dict:
        d = asdict(self)
        if not include_episodes:
            d.pop("episodes")
        return d


def _play(agent, env: ReachEnv, seed: int, joints=None, target_xy=None) -> dict:
    if isinstance(agent, ActorCritic):
        return run_episode(agent, env, seed=seed, joints=joints, target_xy=target_xy)
    return agent.run_episode(env, seed=seed, joints=joints, target_xy=target_xy)


def position_key(xy) -> str:
    return f"{float(xy[0]):.4f},{float(xy[1]):.4f}"


def summarize(episodes: Sequence[dict], threshold: float, seed: int) -> EvalReport:
    """Aggregate episode records (final_dist, length, return, target_xy) into a report."""
    if not episodes:
        raise ValueError("no episodes to summarize")
    dists = [float(e["final_dist"]) for e in episodes]
    by_pos: dict[str, list[bool]] = {}
    for e, d in zip(episodes, dists):
        by_pos.setdefault(position_key(e["target_xy"]), []).append(d <= threshold)
    return EvalReport(
        accuracy=accuracy(dists, threshold),
        mean_episode_length=float(np.mean([e["length"] for e in episodes])),
        mean_return=float(np.mean([e["return"] for e in episodes])),
        failure_distances=[d for d in dists if d > threshold],
        per_position={k: float(np.mean(v)) for k, v in by_pos.items()},
        threshold=float(threshold),
        seed=int(seed),
        n_episodes=len(episodes),
        episodes=[{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in e.items()}
                  for e in episodes],
    )


def post_training_eval(agent, env: ReachEnv, n_episodes: int = 1000, seed: int = 803,
                       threshold: float = 0.10) -> EvalReport:
    """Greedy episodes from random initial poses and targets, all derived from ``seed``."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31 - 1, size=n_episodes)
    episodes = [_play(agent, env, int(s)) for s in seeds]
    return summarize(episodes, threshold, seed)


def workspace_sweep(agent, env: ReachEnv, grid: Sequence, trials_per_pos: int = 5,
                    threshold: float = 0.10, seed: int = 0) -> EvalReport:
    """``trials_per_pos`` greedy episodes per target position, random initial poses."""
    if trials_per_pos < 1:
        raise ValueError("trials_per_pos must be >= 1")
    pts = [np.asarray(p, dtype=float) for p in grid]
    if not pts:
        raise ValueError("empty target grid")
    for p in pts:
        if not env.model.workspace.contains(p):
            raise ValueError(f"grid point {tuple(p)} lies outside the target region")
    rng = np.random.default_rng(seed)
    episodes = []
    for p in pts:
        for _ in range(trials_per_pos):
            episodes.append(_play(agent, env, int(rng.integers(0, 2 ** 31 - 1)), target_xy=p))
    return summarize(episodes, threshold, seed)


def write_report(report: EvalReport, json_path, csv_path=None) -> Path:
    """JSON summary plus an optional per-episode CSV table."""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if csv_path is not None:
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "target_x", "target_y", "length", "return", "final_dist", "success"])
            for k, e in enumerate(report.episodes):
                w.writerow([k, repr(float(e["target_xy"][0])), repr(float(e["target_xy"][1])), int(e["length"]),
                            repr(float(e["return"])), repr(float(e["final_dist"])),
                            int(e["final_dist"] <= report.threshold)])
    return json_path
