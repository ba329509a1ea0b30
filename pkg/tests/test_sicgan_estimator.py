import json
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sicgan_s2r import SICGAN
from sicgan_s2r.sicgan import (METRIC_COLUMNS, PairedCorpus, from_uint8, load_corpus, make_split, save_corpus,
                               to_uint8)

TINY = dict(resolution=16, n_res_blocks=1, base_channels=4, disc_channels=4, n_down=2, max_epochs=2, seed=0)


def _domains(n=6, side=16, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, size=(n, side, side, 3)).astype(np.float32)
    B = np.clip(A * 0.5 + 0.2, -1, 1).astype(np.float32)
    return A, B


# -- corpus ------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 200), ratio=st.floats(0.05, 0.95), seed=st.integers(0, 10 ** 6))
def test_split_is_disjoint_cover(n, ratio, seed):
    s = make_split(n, ratio, seed)
    assert sorted(s["train"] + s["val"]) == list(range(n))
    assert not set(s["train"]) & set(s["val"])
    if n >= 2:
        assert s["train"] and s["val"]


def test_default_ratio_is_seventy_thirty():
    s = make_split(100)
    assert (len(s["train"]), len(s["val"])) == (70, 30)


@pytest.mark.parametrize("n,ratio", [(0, 0.7), (5, 0.0), (5, 1.0)])
def test_bad_split_rejected(n, ratio):
    with pytest.raises(ValueError):
        make_split(n, ratio)


def test_pixel_mapping():
    px = np.arange(256, dtype=np.uint8)
    v = from_uint8(px)
    assert v[0] == -1.0 and v[255] == 1.0
    np.testing.assert_array_equal(to_uint8(v), px)


def test_corpus_roundtrip(tmp_path):
    A, B = _domains(5)
    corpus = PairedCorpus(A, B, seed=4)
    save_corpus(corpus, tmp_path / "c")
    loaded, skipped = load_corpus(tmp_path / "c")
    assert skipped == 0 and loaded.split == corpus.split and loaded.seed == 4
    np.testing.assert_allclose(loaded.domainA, A, atol=1 / 127.5)
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert manifest["seed"] == 4 and set(manifest["split"]) == {"domainA", "domainB"}


def test_corrupt_image_skipped(tmp_path):
    A, B = _domains(5)
    save_corpus(PairedCorpus(A, B), tmp_path / "c")
    (tmp_path / "c" / "domainB" / "000002.png").write_bytes(b"not a png")
    loaded, skipped = load_corpus(tmp_path / "c")
    assert skipped == 1 and len(loaded.domainB) == 4
    s = loaded.split["domainB"]
    assert sorted(s["train"] + s["val"]) == list(range(4))


@pytest.mark.parametrize("bad", [np.zeros((0, 8, 8, 3)), np.zeros((2, 8, 6, 3)), np.zeros((2, 8, 8, 1))])
def test_corpus_rejects_bad_stacks(bad):
    with pytest.raises(ValueError):
        PairedCorpus(bad, np.zeros((2, 8, 8, 3)))


def test_corpus_rejects_bad_split():
    A, B = _domains(4)
    with pytest.raises(ValueError):
        PairedCorpus(A, B, split={"domainA": {"train": [0, 1], "val": [1, 2, 3]},
                                  "domainB": make_split(4)})


# -- estimator ---------------------------------------------------------------

def test_sklearn_params_and_clone():
    est = SICGAN(**TINY)
    assert est.get_params()["learning_rate"] == 5e-4
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est


def test_recipe_defaults():
    p = SICGAN().get_params()
    assert (p["max_epochs"], p["batch_size"], p["learning_rate"], p["beta1"], p["beta2"], p["init_std"]) == \
        (500, 1, 5e-4, 0.5, 0.999, 0.02)
    assert (p["lambda_cyc"], p["lambda_id"], p["resolution"], p["n_res_blocks"]) == (10.0, 0.1, 224, 9)


def test_transform_before_fit_raises():
    with pytest.raises(NotFittedError):
        SICGAN(**TINY).transform(np.zeros((1, 16, 16, 3), np.float32))


def test_fit_history_and_transform():
    A, B = _domains(6)
    est = SICGAN(**TINY).fit(A, B)
    assert [r["epoch"] for r in est.history_] == [0, 1, 2]
    assert all(math.isfinite(r[k]) for r in est.history_ for k in METRIC_COLUMNS[1:])
    assert est.best_epoch_ in (0, 1, 2) and not est.aborted_
    assert isinstance(est.opt_g_, torch.optim.Adam)
    assert est.opt_g_.defaults["betas"] == (0.5, 0.999) and est.opt_g_.defaults["lr"] == 5e-4
    out = est.transform(A[:3])
    back = est.inverse_transform(out)
    assert out.shape == back.shape == (3, 16, 16, 3) and out.dtype == np.float32
    assert out.min() >= -1 and out.max() <= 1
    # a single image (H, W, 3) is promoted to a batch
    assert est.transform(A[0]).shape == (1, 16, 16, 3)


def test_epoch_zero_on_four_images():
    A, B = _domains(4)
    est = SICGAN(**{**TINY, "max_epochs": 0}).fit(A, B)
    assert len(est.history_) == 1 and est.history_[0]["epoch"] == 0
    assert all(math.isfinite(v) for v in est.history_[0].values())


def test_fit_accepts_corpus():
    A, B = _domains(6)
    est = SICGAN(**{**TINY, "max_epochs": 1}).fit(PairedCorpus(A, B, seed=2))
    assert len(est.history_) == 2


def test_fit_deterministic():
    A, B = _domains(6)
    h1 = SICGAN(**TINY).fit(A, B).history_
    h2 = SICGAN(**TINY).fit(A, B).history_
    assert h1 == h2


def test_vanilla_mode_switches_norm_and_identity():
    A, B = _domains(4)
    est = SICGAN(**{**TINY, "mode": "vanilla_cyclegan", "max_epochs": 1}).fit(A, B)
    assert est.generator_spec_.norm == "batch" and est.bundle_.lambda_id == 0.0


@pytest.mark.parametrize("kwargs", [dict(mode="bogus"), dict(learning_rate=0.0), dict(batch_size=0),
                                    dict(max_epochs=-1), dict(seed="x")])
def test_bad_params_rejected(kwargs):
    A, B = _domains(4)
    with pytest.raises((ValueError, TypeError)):
        SICGAN(**{**TINY, **kwargs}).fit(A, B)


@pytest.mark.parametrize("mutate", ["nan", "range", "side"])
def test_bad_images_rejected(mutate):
    A, B = _domains(4)
    if mutate == "nan":
        A[0, 0, 0, 0] = np.nan
    elif mutate == "range":
        A[0, 0, 0, 0] = 1.5
    else:
        A = A[:, :, :8]
    with pytest.raises((ValueError, TypeError)):
        SICGAN(**TINY).fit(A, B)


def test_float64_input_is_converted():
    A, B = _domains(4)
    est = SICGAN(**{**TINY, "max_epochs": 0}).fit(A.astype(np.float64), B)
    assert est.transform(A.astype(np.float64)).dtype == np.float32


def test_missing_domain_b_rejected():
    A, _ = _domains(4)
    with pytest.raises(ValueError):
        SICGAN(**TINY).fit(A)


def test_checkpoint_roundtrip(tmp_path):
    A, B = _domains(6)
    est = SICGAN(**{**TINY, "checkpoint_dir": str(tmp_path / "ck"), "checkpoint_every": 1}).fit(A, B)
    assert (tmp_path / "ck" / "epoch_0001.pt").exists() and (tmp_path / "ck" / "epoch_0002.json").exists()
    side = json.loads((tmp_path / "ck" / "best.json").read_text())
    assert side["best_epoch"] == est.best_epoch_ and side["seed"] == 0 and side["mode"] == "sicgan"
    assert side["generator_spec"]["resolution"] == 16
    header = (tmp_path / "ck" / "metrics.csv").read_text().splitlines()[0]
    assert header == "epoch,gen_train,gen_val,disc_train,disc_val"
    loaded = SICGAN.load(tmp_path / "ck" / "best")
    np.testing.assert_array_equal(loaded.transform(A[:2]), est.transform(A[:2]))
    assert loaded.best_epoch_ == est.best_epoch_


def test_non_finite_loss_keeps_last_good(monkeypatch):
    A, B = _domains(6)
    est = SICGAN(**{**TINY, "max_epochs": 3})
    calls = {"n": 0}
    real_epoch = SICGAN._train_epoch

    def flaky(self, *args):
        calls["n"] += 1
        if calls["n"] == 2:
            with torch.no_grad():
                for p in self.bundle_.G.parameters():
                    p.fill_(float("nan"))
            return False
        return real_epoch(self, *args)

    monkeypatch.setattr(SICGAN, "_train_epoch", flaky)
    est.fit(A, B)
    assert est.aborted_ and [r["epoch"] for r in est.history_] == [0, 1]
    assert all(torch.isfinite(p).all() for p in est.bundle_.G.parameters())
