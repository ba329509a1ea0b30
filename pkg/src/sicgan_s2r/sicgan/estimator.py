"""Two-way image translator trained with least-squares adversarial, cycle and identity losses.

The estimator follows the scikit-learn conventions: hyperparameters are plain
constructor arguments, learned state lives in trailing-underscore attributes,
``fit(X, y)`` takes domain A (virtual) images as ``X`` and domain B (pseudo-real)
images as ``y``, ``transform`` maps A -> B and ``inverse_transform`` maps B -> A.
"""
from __future__ import annotations

import copy
import csv
import json
import logging
import math
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_images, check_seed
from .corpus import PairedCorpus, make_split
from .layers import Discriminator, DiscriminatorSpec, Generator, GeneratorSpec, init_weights
from .losses import GanBundle, discriminator_loss, total_generator_loss
from .selection import select_best_model

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "gen_train", "gen_val", "disc_train", "disc_val")


def _to_tensor(imgs: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(imgs.transpose(0, 3, 1, 2)))


def _to_images(t: torch.Tensor) -> np.ndarray:
    return t.detach().permute(0, 2, 3, 1).contiguous().numpy().astype(np.float32)


def write_metrics_csv(history, path) -> Path:
    """One row per epoch record, fixed column order, repr-exact floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for rec in history:
            w.writerow([rec["epoch"]] + [repr(float(rec[k])) for k in METRIC_COLUMNS[1:]])
    return path


class SICGAN(BaseEstimator, TransformerMixin):
    """Unpaired sim-to-real translator (two generators, two PatchGAN discriminators).

    Parameters
    ----------
    resolution : int
        Side length of the square images (224 full scale, 64 for desk runs).
    n_res_blocks, base_channels : int
        Generator depth and width.
    norm : {'demodulated', 'batch'}
        Generator normalization. ``mode='vanilla_cyclegan'`` forces batch norm
        and drops the identity term.
    lambda_cyc, lambda_id : float
        Loss weights.
    max_epochs : int
        Passes over the training split. Epoch 0 in ``history_`` is the untrained baseline.
    checkpoint_dir : str or None
        If set, weights are written every ``checkpoint_every`` epochs and for the best epoch.
    """

    def __init__(self, resolution: int = 224, n_res_blocks: int = 9, base_channels: int = 64,
                 disc_channels: int = 64, n_down: int = 3, norm: str = "demodulated",
                 mode: str = "sicgan", lambda_cyc: float = 10.0, lambda_id: float = 0.1,
                 max_epochs: int = 500, batch_size: int = 1, learning_rate: float = 5e-4,
                 beta1: float = 0.5, beta2: float = 0.999, init_std: float = 0.02,
                 val_ratio: float = 0.3, checkpoint_dir: Optional[str] = None,
                 checkpoint_every: int = 10, seed: int = 0, verbose: bool = False):
        self.resolution = resolution
        self.n_res_blocks = n_res_blocks
        self.base_channels = base_channels
        self.disc_channels = disc_channels
        self.n_down = n_down
        self.norm = norm
        self.mode = mode
        self.lambda_cyc = lambda_cyc
        self.lambda_id = lambda_id
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.init_std = init_std
        self.val_ratio = val_ratio
        self.checkpoint_dir = checkpoint_dir
        self.checkpoint_every = checkpoint_every
        self.seed = seed
        self.verbose = verbose

    # -- construction -------------------------------------------------------

    def _effective(self) -> tuple[str, float]:
        if self.mode == "vanilla_cyclegan":
            return "batch", 0.0
        if self.mode != "sicgan":
            raise ValueError(f"mode must be 'sicgan' or 'vanilla_cyclegan', got {self.mode!r}")
        return self.norm, float(self.lambda_id)

    def _build(self) -> GanBundle:
        norm, lam_id = self._effective()
        gspec = GeneratorSpec(self.resolution, self.n_res_blocks, self.base_channels, norm)
        dspec = DiscriminatorSpec(self.resolution, self.n_down, 0.2, self.disc_channels)
        torch.manual_seed(check_seed(self.seed))
        nets = [Generator(gspec), Generator(gspec), Discriminator(dspec), Discriminator(dspec)]
        for n in nets:
            init_weights(n, self.init_std)
        self.generator_spec_, self.discriminator_spec_ = gspec, dspec
        return GanBundle(*nets, lambda_cyc=float(self.lambda_cyc), lambda_id=lam_id, mode=self.mode)

    def _validate_params(self):
        if self.max_epochs < 0 or self.batch_size < 1 or self.checkpoint_every < 1:
            raise ValueError("max_epochs >= 0, batch_size >= 1 and checkpoint_every >= 1 are required")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self._effective()

    # -- training -----------------------------------------------------------

    def _batches(self, n: int, rng: np.random.Generator):
        order = rng.permutation(n)
        for i in range(0, n, self.batch_size):
            yield order[i:i + self.batch_size]

    @torch.no_grad()
    def _evaluate(self, A: np.ndarray, B: np.ndarray) -> dict:
        """Mean generator, discriminator and cycle losses over paired-up batches (eval mode)."""
        b = self.bundle_
        for net in (b.G, b.F, b.D_X, b.D_Y):
            net.eval()
        n = min(len(A), len(B))
        sums = {"gen": 0.0, "disc": 0.0, "cyc": 0.0}
        count = 0
        for i in range(0, n, self.batch_size):
            x, y = _to_tensor(A[i:i + self.batch_size]), _to_tensor(B[i:i + self.batch_size])
            k = min(len(x), len(y))
            x, y = x[:k], y[:k]
            gl = total_generator_loss(x, y, b)
            d = 0.5 * (discriminator_loss(b.D_Y, y, gl.fake_y) + discriminator_loss(b.D_X, x, gl.fake_x))
            sums["gen"] += float(gl.total) * k
            sums["disc"] += float(d) * k
            sums["cyc"] += float(gl.raw["cyc"]) * k
            count += k
        return {key: v / count for key, v in sums.items()}

    def _train_epoch(self, A: np.ndarray, B: np.ndarray, rng: np.random.Generator) -> bool:
        b = self.bundle_
        for net in (b.G, b.F, b.D_X, b.D_Y):
            net.train()
        n = min(len(A), len(B))
        idx_b = rng.permutation(len(B))
        for batch in self._batches(n, rng):
            x = _to_tensor(A[batch])
            y = _to_tensor(B[idx_b[batch % len(B)]])
            # one generator update, then one discriminator update
            gl = total_generator_loss(x, y, b)
            if not torch.isfinite(gl.total):
                return False
            self.opt_g_.zero_grad()
            gl.total.backward()
            self.opt_g_.step()
            d = 0.5 * (discriminator_loss(b.D_Y, y, gl.fake_y) + discriminator_loss(b.D_X, x, gl.fake_x))
            if not torch.isfinite(d):
                return False
            self.opt_d_.zero_grad()
            d.backward()
            self.opt_d_.step()
        return True

    def _state(self) -> dict:
        b = self.bundle_
        return {k: copy.deepcopy(getattr(b, k).state_dict()) for k in ("G", "F", "D_X", "D_Y")}

    def _load_state(self, state: dict):
        for k in ("G", "F", "D_X", "D_Y"):
            getattr(self.bundle_, k).load_state_dict(state[k])

    def _prepare(self, X, y):
        if isinstance(X, PairedCorpus):
            if y is not None:
                raise ValueError("pass either a PairedCorpus or (X, y) arrays, not both")
            corpus = X
            check_images(corpus.domainA, self.resolution, "domainA")
            check_images(corpus.domainB, self.resolution, "domainB")
        else:
            if y is None:
                raise ValueError("domain B images (y) are required")
            A = check_images(X, self.resolution, "X")
            B = check_images(y, self.resolution, "y")
            seed = check_seed(self.seed)
            corpus = PairedCorpus(A, B, split={
                "domainA": make_split(len(A), 1 - self.val_ratio, seed),
                "domainB": make_split(len(B), 1 - self.val_ratio, seed + 1),
            }, seed=seed, ratio=1 - self.val_ratio)
        parts = {(d, w): corpus.part(d, w) for d in ("domainA", "domainB") for w in ("train", "val")}
        for key, arr in parts.items():
            if len(arr) == 0:
                raise ValueError(f"{key[0]} {key[1]} split is empty")
        return parts

    def fit(self, X, y=None, on_epoch: Optional[Callable[[dict], None]] = None):
        """Train on domain A images ``X`` and domain B images ``y`` (or a PairedCorpus as ``X``).

        Records per-epoch losses in ``history_``, picks ``best_epoch_`` by the
        gap-penalized validation score and leaves those weights loaded.
        A non-finite loss stops training and keeps the last finite epoch.
        """
        self._validate_params()
        parts = self._prepare(X, y)
        rng = np.random.default_rng(check_seed(self.seed))
        self.bundle_ = self._build()
        self.opt_g_ = torch.optim.Adam(self.bundle_.generator_parameters(), lr=self.learning_rate,
                                       betas=(self.beta1, self.beta2))
        self.opt_d_ = torch.optim.Adam(self.bundle_.discriminator_parameters(), lr=self.learning_rate,
                                       betas=(self.beta1, self.beta2))
        tr = (parts["domainA", "train"], parts["domainB", "train"])
        va = (parts["domainA", "val"], parts["domainB", "val"])

        self.history_, self.aborted_ = [], False
        best_state = None
        for epoch in range(self.max_epochs + 1):
            if epoch > 0:
                last_good = self._state()
                if not self._train_epoch(*tr, rng):
                    log.error("non-finite loss during epoch %d; keeping epoch %d weights", epoch, epoch - 1)
                    self._load_state(last_good)
                    self.aborted_ = True
                    break
            rt, rv = self._evaluate(*tr), self._evaluate(*va)
            if not all(math.isfinite(v) for v in (*rt.values(), *rv.values())):
                log.error("non-finite evaluation after epoch %d; stopping", epoch)
                if epoch > 0:
                    self._load_state(last_good)
                self.aborted_ = True
                break
            rec = {"epoch": epoch, "gen_train": rt["gen"], "gen_val": rv["gen"],
                   "disc_train": rt["disc"], "disc_val": rv["disc"],
                   "cyc_train": rt["cyc"], "cyc_val": rv["cyc"]}
            self.history_.append(rec)
            if select_best_model(self.history_) == epoch:
                best_state = self._state()
            if self.verbose:
                log.info("epoch %d  gen %.4f/%.4f  disc %.4f/%.4f  cyc_val %.4f", epoch, rec["gen_train"],
                         rec["gen_val"], rec["disc_train"], rec["disc_val"], rec["cyc_val"])
            if on_epoch is not None:
                on_epoch(rec)
            if self.checkpoint_dir:
                if epoch > 0 and epoch % self.checkpoint_every == 0:
                    self.save(Path(self.checkpoint_dir) / f"epoch_{epoch:04d}")
                if best_state is not None and select_best_model(self.history_) == epoch:
                    self.best_epoch_ = epoch
                    self.save(Path(self.checkpoint_dir) / "best")

        self.best_epoch_ = select_best_model(self.history_)
        self._load_state(best_state)
        self.n_epochs_trained_ = self.history_[-1]["epoch"]
        if self.checkpoint_dir:
            self.save(Path(self.checkpoint_dir) / "best")   # refresh the sidecar with the full history
            write_metrics_csv(self.history_, Path(self.checkpoint_dir) / "metrics.csv")
        return self

    # -- inference ----------------------------------------------------------

    @torch.no_grad()
    def _apply(self, net, X, batch_size: int):
        check_is_fitted(self, "bundle_")
        imgs = check_images(X, self.resolution)
        net.eval()
        out = [_to_images(net(_to_tensor(imgs[i:i + batch_size]))) for i in range(0, len(imgs), batch_size)]
        return np.concatenate(out)

    def transform(self, X, batch_size: int = 8) -> np.ndarray:
        """Translate virtual images to the pseudo-real domain (generator G)."""
        return self._apply(self.bundle_.G if hasattr(self, "bundle_") else None, X, batch_size)

    def inverse_transform(self, X, batch_size: int = 8) -> np.ndarray:
        """Translate pseudo-real images back to the virtual domain (generator F)."""
        return self._apply(self.bundle_.F if hasattr(self, "bundle_") else None, X, batch_size)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> Path:
        """Write ``path.pt`` (all four networks) and ``path.json`` (params, specs, losses)."""
        check_is_fitted(self, "bundle_")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(self._state(), path.with_suffix(".pt"))
        hist = getattr(self, "history_", [])
        best = getattr(self, "best_epoch_", None)
        sidecar = {
            "epoch": hist[-1]["epoch"] if hist else None,
            "best_epoch": best,
            "losses": next((r for r in hist if r["epoch"] == best), hist[-1] if hist else None),
            "seed": self.seed,
            "mode": self.mode,
            "params": self.get_params(),
            "generator_spec": self.generator_spec_.to_dict(),
            "discriminator_spec": self.discriminator_spec_.to_dict(),
            "history": hist,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
        return path.with_suffix(".pt")

    @classmethod
    def load(cls, path) -> "SICGAN":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        est = cls(**sidecar["params"])
        est.bundle_ = est._build()
        est._load_state(torch.load(path.with_suffix(".pt"), weights_only=True))
        est.history_ = sidecar.get("history", [])
        est.best_epoch_ = sidecar.get("best_epoch")
        return est
