"""Command-line entry point: corpus generation, GAN and agent training, evaluation, reports.

Every command writes into ``<out>/<label>-<hash>``, where the hash covers the
resolved configuration, so identical reruns land in the same place. Flags
override values from ``--config`` (JSON, keys named like the flags with
underscores), which override built-in defaults.

Exit codes: 0 success, 1 internal failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("sicgan_s2r")

DEFAULTS = {
    "make-corpus": {"profile": "irb120_like", "n": 1300, "seed": 0, "resolution": None, "ratio": 0.7},
    "train-gan": {"corpus": None, "epochs": 500, "resolution": None, "res_blocks": 9, "base_channels": 64,
                  "disc_channels": 64, "lr": 5e-4, "batch_size": 1, "beta1": 0.5, "beta2": 0.999,
                  "init_std": 0.02, "lambda_cyc": 10.0, "lambda_id": 0.1, "vanilla": False,
                  "checkpoint_every": 10, "seed": 0},
    "train-agent": {"profile": "planar2dof_desk", "steps": 500_000, "workers": 8, "lr": 3e-4,
                    "rmsprop_eps": 1e-5, "reward_scale": 0.1, "rollout_len": 20, "gamma": 0.99,
                    "entropy_beta": 0.01, "eval_interval": 50_000,
                    "eval_episodes": 40, "eval_seed": 40, "gan": None, "raw_obs": False, "grid": "5x5",
                    "mode": "serialized", "resolution": None, "seed": 123},
    "evaluate": {"agent": None, "virtual": False, "zero_shot": False, "episodes": 1000, "seed": 803,
                 "threshold": 0.10, "grid": "5x5", "trials": 5, "raster": 101, "trajectories": 6,
                 "gan": None},
    "report": {"wd": None, "gan": None},
}
COMMON = {"out": "runs", "label": None, "force": False}


class UsageError(Exception):
    """Bad flags, missing inputs or unwritable outputs (exit code 2)."""


# -- parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sicgan-s2r", description=__doc__.splitlines()[0],
                                argument_default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        # subparsers do not inherit argument_default
        return sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)

    def common(sp):
        sp.add_argument("--config", help="JSON file with default values for any flag")
        sp.add_argument("--out", help="root directory for run directories (default: runs)")
        sp.add_argument("--label", help="run directory prefix (default: the command name)")
        sp.add_argument("--force", action="store_true", help="overwrite an existing run directory")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = add("make-corpus", "render virtual and pseudo-real image corpora")
    common(sp)
    sp.add_argument("--profile")
    sp.add_argument("--n", type=int, help="images per domain")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--resolution", type=int, help="image side (default: profile GAN resolution)")
    sp.add_argument("--ratio", type=float, help="train fraction of the split")

    sp = add("train-gan", "train the translator on a corpus")
    common(sp)
    sp.add_argument("--corpus", help="corpus directory (with manifest.json)")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--resolution", type=int, help="must match the corpus resolution")
    sp.add_argument("--res-blocks", type=int, dest="res_blocks")
    sp.add_argument("--base-channels", type=int, dest="base_channels")
    sp.add_argument("--disc-channels", type=int, dest="disc_channels")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch-size", type=int, dest="batch_size")
    sp.add_argument("--beta1", type=float)
    sp.add_argument("--beta2", type=float)
    sp.add_argument("--init-std", type=float, dest="init_std")
    sp.add_argument("--lambda-cyc", type=float, dest="lambda_cyc")
    sp.add_argument("--lambda-id", type=float, dest="lambda_id")
    sp.add_argument("--vanilla", action="store_true", help="plain cycle-consistent ablation")
    sp.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    sp.add_argument("--seed", type=int)

    sp = add("train-agent", "train the actor-critic agent")
    common(sp)
    sp.add_argument("--profile")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--rmsprop-eps", type=float, dest="rmsprop_eps")
    sp.add_argument("--reward-scale", type=float, dest="reward_scale", help="learner-side reward multiplier")
    sp.add_argument("--rollout-len", type=int, dest="rollout_len")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--entropy-beta", type=float, dest="entropy_beta")
    sp.add_argument("--eval-interval", type=int, dest="eval_interval")
    sp.add_argument("--eval-episodes", type=int, dest="eval_episodes")
    sp.add_argument("--eval-seed", type=int, dest="eval_seed")
    sp.add_argument("--gan", help="translator checkpoint (.pt) for translated observations")
    sp.add_argument("--raw-obs", action="store_true", dest="raw_obs", help="train on untranslated renders")
    sp.add_argument("--grid", help="saved target lattice, e.g. 5x5")
    sp.add_argument("--mode", choices=["serialized", "lock-free", "lock_free"])
    sp.add_argument("--resolution", type=int, help="observation side (default: profile agent resolution)")
    sp.add_argument("--seed", type=int)

    sp = add("evaluate", "evaluate a trained agent")
    common(sp)
    sp.add_argument("--agent", help="agent checkpoint (.pt)")
    sp.add_argument("--virtual", action="store_true", help="post-training evaluation in simulation")
    sp.add_argument("--zero-shot", action="store_true", dest="zero_shot", help="pseudo-real workspace sweep")
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--grid")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--raster", type=int)
    sp.add_argument("--trajectories", type=int, help="episodes to export as trajectories")
    sp.add_argument("--gan", help="translator checkpoint (default: the one used in training)")

    sp = add("report", "histogram distance table between image sets")
    common(sp)
    sp.add_argument("--wd", nargs=2, metavar=("IMAGES_A", "IMAGES_B"),
                    help="virtual and pseudo-real image directories (or one corpus root twice)")
    sp.add_argument("--gan", help="translator checkpoint; adds a translated-vs-B row")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    flags = vars(args).copy()
    cmd = flags.pop("command")
    verbose = flags.pop("verbose", False)
    cfg = {**COMMON, **DEFAULTS[cmd]}
    if "config" in flags:
        path = Path(flags.pop("config"))
        try:
            file_cfg = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update(flags)
    cfg["command"] = cmd
    cfg["verbose"] = verbose
    return cfg


def config_hash(cfg: dict) -> str:
    keep = {k: v for k, v in cfg.items() if k not in ("out", "label", "force", "verbose")}
    return hashlib.sha256(json.dumps(keep, sort_keys=True, default=str).encode()).hexdigest()[:10]


def run_dir(cfg: dict) -> Path:
    d = Path(cfg["out"]) / f"{cfg['label'] or cfg['command']}-{config_hash(cfg)}"
    if d.exists() and any(d.iterdir()):
        if not cfg["force"]:
            raise UsageError(f"run directory {d} already exists; pass --force to overwrite")
        shutil.rmtree(d)
    try:
        d.mkdir(parents=True, exist_ok=True)
        probe = d / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"cannot write to {d}: {exc}") from exc
    (d / "run_manifest.json").write_text(json.dumps(cfg, indent=2, sort_keys=True, default=str))
    return d


def parse_grid(text: str) -> int:
    try:
        a, b = (int(v) for v in str(text).lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"grid must look like 5x5, got {text!r}") from exc
    if a != b or a < 1:
        raise UsageError("only square grids of positive size are supported")
    return a


def _existing(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if p.suffix != ".pt":
        p = p.with_suffix(".pt")
    if not p.exists() or not p.with_suffix(".json").exists():
        raise UsageError(f"{what} {p} not found (expects .pt and .json side by side)")
    return p


# -- commands -------------------------------------------------------------

def cmd_make_corpus(cfg: dict) -> dict:
    from .arm_world import load_profile, sample_corpus
    from .sicgan.corpus import PairedCorpus, save_corpus

    try:
        model = load_profile(cfg["profile"])
    except (FileNotFoundError, KeyError, ValueError) as exc:
        raise UsageError(f"unknown profile {cfg['profile']!r}") from exc
    if cfg["n"] < 1:
        raise UsageError("--n must be >= 1")
    out = run_dir(cfg)
    res = int(cfg["resolution"] or model.gan_resolution)
    seed = int(cfg["seed"])
    a = np.stack(sample_corpus(model, cfg["n"], "virtual", seed, res))
    b = np.stack(sample_corpus(model, cfg["n"], "pseudo_real", seed + 1, res))
    corpus = PairedCorpus(a, b, seed=seed, ratio=float(cfg["ratio"]))
    save_corpus(corpus, out / "corpus", extra={"profile": model.name})
    return {"run_dir": str(out), "corpus": str(out / "corpus"), "images_per_domain": cfg["n"], "resolution": res}


def cmd_train_gan(cfg: dict) -> dict:
    from .sicgan.corpus import load_corpus
    from .sicgan.estimator import SICGAN, write_metrics_csv

    if cfg["corpus"] is None or not (Path(cfg["corpus"]) / "manifest.json").exists():
        raise UsageError(f"corpus {cfg['corpus']!r} not found (needs manifest.json)")
    corpus, skipped = load_corpus(cfg["corpus"])
    res = int(cfg["resolution"] or corpus.resolution)
    if res != corpus.resolution:
        raise UsageError(f"--resolution {res} does not match corpus resolution {corpus.resolution}")
    out = run_dir(cfg)
    est = SICGAN(resolution=res, n_res_blocks=cfg["res_blocks"], base_channels=cfg["base_channels"],
                 disc_channels=cfg["disc_channels"], mode="vanilla_cyclegan" if cfg["vanilla"] else "sicgan",
                 lambda_cyc=cfg["lambda_cyc"], lambda_id=0.0 if cfg["vanilla"] else cfg["lambda_id"],
                 max_epochs=cfg["epochs"], batch_size=cfg["batch_size"], learning_rate=cfg["lr"],
                 beta1=cfg["beta1"], beta2=cfg["beta2"], init_std=cfg["init_std"],
                 checkpoint_dir=str(out / "checkpoints"), checkpoint_every=cfg["checkpoint_every"],
                 seed=cfg["seed"], verbose=cfg["verbose"])
    history = []

    def on_epoch(rec):
        history.append(rec)
        write_metrics_csv(history, out / "metrics.csv")

    est.fit(corpus, on_epoch=on_epoch)
    return {"run_dir": str(out), "best_checkpoint": str(out / "checkpoints" / "best.pt"),
            "best_epoch": est.best_epoch_, "epochs": est.n_epochs_trained_, "aborted": est.aborted_,
            "skipped_images": skipped}


def _load_translator(path):
    from .sicgan.estimator import SICGAN

    gan = SICGAN.load(_existing(path, "GAN checkpoint"))
    return gan


def cmd_train_agent(cfg: dict) -> dict:
    from .a3c.agent import A3CAgent, save_eval_set, write_curve_csv
    from .arm_world import load_profile
    from .bridge import TranslatedObserver, save_target_grid, target_grid

    try:
        model = load_profile(cfg["profile"])
    except (FileNotFoundError, KeyError, ValueError) as exc:
        raise UsageError(f"unknown profile {cfg['profile']!r}") from exc
    observer, gan_path = None, None
    if not cfg["raw_obs"]:
        gan_path = _existing(cfg["gan"], "GAN checkpoint (or pass --raw-obs)")
        gan = _load_translator(gan_path)
        observer = TranslatedObserver(gan.transform, gan_resolution=gan.resolution)
    mode = cfg["mode"].replace("-", "_")
    out = run_dir(cfg)
    targets = target_grid(model, parse_grid(cfg["grid"]))
    save_target_grid(targets, out / f"targets_{model.name}_{cfg['seed']}.json", model.name, cfg["seed"])
    agent = A3CAgent(profile=cfg["profile"], resolution=cfg["resolution"], total_steps=cfg["steps"],
                     n_workers=cfg["workers"], rollout_len=cfg["rollout_len"], gamma=cfg["gamma"],
                     learning_rate=cfg["lr"], rmsprop_eps=cfg["rmsprop_eps"],
                     reward_scale=cfg["reward_scale"], entropy_beta=cfg["entropy_beta"],
                     eval_interval=cfg["eval_interval"], eval_episodes=cfg["eval_episodes"], eval_seed=cfg["eval_seed"], seed=cfg["seed"], mode=mode)
    curve = []

    def on_eval(row):
        curve.append(row)
        write_curve_csv(curve, out / "training_curve.csv")
        log.info("step %d  mean return %.3f  success %.3f", row["global_step"], row["mean_return"],
                 row["success_rate"])

    agent.fit(observer=observer, target_positions=None if cfg["raw_obs"] else targets, on_eval=on_eval)
    save_eval_set(agent.eval_set_, out / f"eval_set_{model.name}_{cfg['eval_seed']}.json", model.name,
                  cfg["eval_seed"])
    extra = {"observation": "raw" if cfg["raw_obs"] else "translated",
             "gan_checkpoint": str(gan_path) if gan_path else None}
    agent.save(out / "agent_best", extra=extra)
    return {"run_dir": str(out), "agent": str(out / "agent_best.pt"), "best_step": agent.best_step_,
            "global_steps": agent.global_steps_, "faults": agent.faults_, "observation": extra["observation"]}


def cmd_evaluate(cfg: dict) -> dict:
    from .a3c.agent import A3CAgent
    from .bridge import TranslatedObserver, save_target_grid, target_grid, zero_shot_observer
    from .evalkit import (build_heatmap, export_trajectories, post_training_eval, save_heatmap,
                          success_map_arrays, workspace_sweep, write_report)

    agent_path = _existing(cfg["agent"], "agent checkpoint")
    if not (cfg["virtual"] or cfg["zero_shot"]):
        raise UsageError("choose at least one of --virtual and --zero-shot")
    agent = A3CAgent.load(agent_path)
    sidecar = json.loads(agent_path.with_suffix(".json").read_text())
    out = run_dir(cfg)
    summary = {"run_dir": str(out)}
    if cfg["virtual"]:
        observer = None
        gan_path = cfg["gan"] or (sidecar.get("gan_checkpoint") if sidecar.get("observation") == "translated"
                                  else None)
        if gan_path:
            gan = _load_translator(gan_path)
            observer = TranslatedObserver(gan.transform, gan_resolution=gan.resolution)
        env = agent.make_env("eval", observer=observer)
        rep = post_training_eval(agent, env, cfg["episodes"], cfg["seed"], cfg["threshold"])
        write_report(rep, out / "virtual_report.json", out / "virtual_episodes.csv")
        if cfg["trajectories"] > 0:
            export_trajectories(rep.episodes[:cfg["trajectories"]], out / "trajectories.csv",
                                out / "trajectories.png")
        summary["virtual_accuracy"] = rep.accuracy
    if cfg["zero_shot"]:
        model = agent._model()
        grid = target_grid(model, parse_grid(cfg["grid"]))
        save_target_grid(grid, out / f"targets_{model.name}_{cfg['seed']}.json", model.name, cfg["seed"])
        env = agent.make_env("eval", observer=zero_shot_observer)
        rep = workspace_sweep(agent, env, grid, cfg["trials"], cfg["threshold"], cfg["seed"])
        write_report(rep, out / "zero_shot_report.json", out / "zero_shot_episodes.csv")
        pts, vals = success_map_arrays(rep.per_position)
        hm = build_heatmap(pts, vals, model.workspace, cfg["raster"])
        save_heatmap(hm, out / "heatmap.png", out / "heatmap.csv", points=pts, title="zero-shot success rate")
        summary["zero_shot_accuracy"] = rep.accuracy
    return summary


def _read_images(path: Path, domain: str) -> np.ndarray:
    from PIL import Image

    from .sicgan.corpus import from_uint8

    if (path / "manifest.json").exists() and (path / domain).is_dir():
        path = path / domain
    files = sorted(path.glob("*.png"))
    if not files:
        raise UsageError(f"no PNG images in {path}")
    imgs = []
    for f in files:
        try:
            with Image.open(f) as im:
                imgs.append(from_uint8(np.asarray(im.convert("RGB"))))
        except OSError as exc:
            log.warning("skipping unreadable image %s: %s", f, exc)
    if not imgs:
        raise UsageError(f"no readable images in {path}")
    return np.stack(imgs)


def cmd_report(cfg: dict) -> dict:
    from .evalkit import channel_distances

    if not cfg["wd"]:
        raise UsageError("report needs --wd IMAGES_A IMAGES_B")
    pa, pb = (Path(p) for p in cfg["wd"])
    for p in (pa, pb):
        if not p.is_dir():
            raise UsageError(f"{p} is not a directory")
    a, b = _read_images(pa, "domainA"), _read_images(pb, "domainB")
    rows = [("virtual vs real", channel_distances(a, b))]
    if cfg["gan"]:
        gan = _load_translator(cfg["gan"])
        rows.append(("translated vs real", channel_distances(gan.transform(a), b)))
    out = run_dir(cfg)
    lines = ["comparison,R,G,B"] + [f"{name},{d[0]:.6f},{d[1]:.6f},{d[2]:.6f}" for name, d in rows]
    (out / "wd_table.csv").write_text("\n".join(lines) + "\n")
    print(f"{'':20s}{'R':>10s}{'G':>10s}{'B':>10s}")
    for name, d in rows:
        print(f"{name:20s}{d[0]:10.4f}{d[1]:10.4f}{d[2]:10.4f}")
    return {"run_dir": str(out), "wd": {name: d.tolist() for name, d in rows}}


COMMANDS = {"make-corpus": cmd_make_corpus, "train-gan": cmd_train_gan, "train-agent": cmd_train_agent,
            "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        summary = COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and map to the internal-failure code
        log.debug("internal failure", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
