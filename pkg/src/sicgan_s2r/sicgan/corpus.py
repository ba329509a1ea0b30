"""Unpaired two-domain image corpora and their on-disk layout.

Layout::

    root/
      domainA/000000.png ...   virtual style
      domainB/000000.png ...   pseudo-real style
      manifest.json            split membership and the seed that produced it
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

DOMAINS = ("domainA", "domainB")


def to_uint8(img: np.ndarray) -> np.ndarray:
    """[-1, 1] floats -> 8-bit pixels (inverse of ``from_uint8`` up to quantization)."""
    return np.clip(np.round((np.asarray(img, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def from_uint8(px: np.ndarray) -> np.ndarray:
    """8-bit pixels -> [-1, 1] via v / 127.5 - 1."""
    return (np.asarray(px, dtype=np.float32) / 127.5 - 1.0).astype(np.float32)


def make_split(n: int, ratio: float = 0.7, seed: int = 0) -> dict:
    """Disjoint train/validation cover of range(n); at least one sample on each side when n >= 2."""
    if n < 1:
        raise ValueError("cannot split an empty domain")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(ratio * n))
    if n >= 2:
        k = min(max(k, 1), n - 1)
    else:
        k = 1
    return {"train": sorted(int(i) for i in perm[:k]), "val": sorted(int(i) for i in perm[k:])}


@dataclass
class PairedCorpus:
    """Two unpaired image domains with a per-domain train/validation split."""

    domainA: np.ndarray
    domainB: np.ndarray
    split: dict = field(default_factory=dict)
    seed: int = 0
    ratio: float = 0.7

    def __post_init__(self):
        self.domainA = np.asarray(self.domainA, dtype=np.float32)
        self.domainB = np.asarray(self.domainB, dtype=np.float32)
        for name, arr in (("domainA", self.domainA), ("domainB", self.domainB)):
            if arr.ndim != 4 or arr.shape[0] == 0 or arr.shape[-1] != 3 or arr.shape[1] != arr.shape[2]:
                raise ValueError(f"{name} must be a non-empty (N, S, S, 3) image stack")
        if self.domainA.shape[1:] != self.domainB.shape[1:]:
            raise ValueError("both domains must share one resolution")
        if not self.split:
            self.split = {
                "domainA": make_split(len(self.domainA), self.ratio, self.seed),
                "domainB": make_split(len(self.domainB), self.ratio, self.seed + 1),
            }
        for name, n in (("domainA", len(self.domainA)), ("domainB", len(self.domainB))):
            s = self.split[name]
            if sorted(s["train"] + s["val"]) != list(range(n)):
                raise ValueError(f"split for {name} is not a disjoint cover")

    @property
    def resolution(self) -> int:
        return self.domainA.shape[1]

    def part(self, domain: str, which: str) -> np.ndarray:
        arr = self.domainA if domain == "domainA" else self.domainB
        return arr[self.split[domain][which]]


def save_corpus(corpus: PairedCorpus, root: str | Path, extra: dict | None = None) -> Path:
    root = Path(root)
    for name in DOMAINS:
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        for k, img in enumerate(getattr(corpus, name)):
            Image.fromarray(to_uint8(img)).save(d / f"{k:06d}.png")
    manifest = {
        "seed": corpus.seed,
        "ratio": corpus.ratio,
        "resolution": corpus.resolution,
        "counts": {n: len(getattr(corpus, n)) for n in DOMAINS},
        "files": {n: [f"{k:06d}.png" for k in range(len(getattr(corpus, n)))] for n in DOMAINS},
        "split": corpus.split,
        **(extra or {}),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return root


def load_corpus(root: str | Path) -> tuple[PairedCorpus, int]:
    """Read a corpus directory; unreadable images are skipped with a warning.

    Returns the corpus and the number of skipped files.
    """
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text())
    arrays, splits, skipped = {}, {}, 0
    for name in DOMAINS:
        imgs, keep = [], []
        for k, fname in enumerate(manifest["files"][name]):
            try:
                with Image.open(root / name / fname) as im:
                    px = np.asarray(im.convert("RGB"))
                if px.shape[0] != px.shape[1] or px.shape[0] != manifest["resolution"]:
                    raise ValueError(f"unexpected image shape {px.shape}")
            except Exception as exc:
                log.warning("skipping corrupt image %s/%s: %s", name, fname, exc)
                skipped += 1
                continue
            imgs.append(from_uint8(px))
            keep.append(k)
        if not imgs:
            raise ValueError(f"no readable images in {root / name}")
        remap = {old: new for new, old in enumerate(keep)}
        s = manifest["split"][name]
        splits[name] = {w: [remap[i] for i in s[w] if i in remap] for w in ("train", "val")}
        arrays[name] = np.stack(imgs)
    corpus = PairedCorpus(arrays["domainA"], arrays["domainB"], split=splits,
                          seed=manifest["seed"], ratio=manifest["ratio"])
    return corpus, skipped
