import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazepath.data import (
    Dataset, DatasetError, FileFeatures, LabelGrid, SyntheticFeatures, blob_center, dataset_from_records,
    fixations_to_labels, load_dataset, load_label_dir, make_zerogaze_split, pad_scanpath, read_feature_file,
    read_label_file, save_dataset, synthetic_dataset, synthetic_features, unpad, write_feature_file,
    write_label_file,
)
from gazepath.model import HashEmbedding, ModelConfig
from gazepath.structs import Scanpath

CATS18 = ["bottle", "bowl", "car", "chair", "clock", "cup", "fork", "keyboard", "knife", "laptop",
          "microwave", "mouse", "oven", "potted plant", "sink", "stop sign", "toilet", "tv"]


def rec(**kw):
    base = {"name": "img", "subject": "s1", "task": "cup", "X": [10.0, 20.0], "Y": [5.0, 6.0],
            "T": [100.0, 200.0], "img_w": 100, "img_h": 50}
    base.update(kw)
    return base


def path(target, image="i", subject="s", n=2):
    return Scanpath([1.0] * n, [1.0] * n, [100.0] * n, image, target, subject, 10, 10)


# ---------------------------------------------------------------- JSON

def test_empty_dataset(tmp_path):
    (tmp_path / "d.json").write_text("[]")
    ds = load_dataset(tmp_path / "d.json")
    assert len(ds) == 0 and ds.categories == set()


@pytest.mark.parametrize("bad, msg", [
    (rec(X=[10.0, 101.0]), "record 1: fixation 1 x=101"),
    (rec(Y=[-1.0, 0.0]), "record 1: fixation 0 y=-1"),
    (rec(T=[1.0, -5.0]), "negative duration"),
    (rec(X=[1.0]), "lengths differ"),
    (rec(X=[], Y=[], T=[]), "empty scanpath"),
    ({"name": "x"}, "missing field"),
    (rec(X=["a", 1.0]), "non-numeric"),
])
def test_record_validation(bad, msg):
    with pytest.raises(DatasetError, match=msg):
        dataset_from_records([rec(), bad])


def test_malformed_json(tmp_path):
    (tmp_path / "d.json").write_text("[{")
    with pytest.raises(DatasetError, match="malformed JSON"):
        load_dataset(tmp_path / "d.json")


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    recs = [rec(X=rng.uniform(0, 100, 4).tolist(), Y=rng.uniform(0, 50, 4).tolist(),
                T=rng.uniform(0, 900, 4).tolist(), subject=f"s{i}") for i in range(5)]
    ds = dataset_from_records(recs)
    save_dataset(ds, tmp_path / "d.json")
    again = load_dataset(tmp_path / "d.json")
    assert [s.to_record() for s in again.samples] == [s.to_record() for s in ds.samples]
    assert json.loads((tmp_path / "d.json").read_text()) == recs


# ---------------------------------------------------------------- splits

def test_split_18_categories_hold_out_knife():
    ds = Dataset([path(c, image=f"{c}{k}") for c in CATS18 for k in range(3)])
    train, test = make_zerogaze_split(ds, "knife")
    assert len(train.categories) == 17 and test.categories == {"knife"}
    assert len(train) + len(test) == len(ds)


def test_split_partition_every_category():
    ds = Dataset([path(c, image=f"{c}{k}", n=1 + k) for c in CATS18 for k in range(1 + len(c) % 3)])
    for c in ds.categories:
        train, test = make_zerogaze_split(ds, c)
        assert c not in train.categories and test.categories == {c}
        ids = sorted(map(id, train.samples + test.samples))
        assert ids == sorted(map(id, ds.samples))


def test_split_only_category_warns():
    ds = Dataset([path("cup")])
    with pytest.warns(UserWarning, match="empty training set"):
        train, test = make_zerogaze_split(ds, "cup")
    assert len(train) == 0 and len(test) == 1


def test_split_unknown_category():
    with pytest.raises(DatasetError, match="unknown category"):
        make_zerogaze_split(Dataset([path("cup")]), "knife")


# ---------------------------------------------------------------- padding

def test_pad_examples():
    p = pad_scanpath(path("c", n=3), 7)
    assert p.valid.tolist() == [1, 1, 1, 0, 0, 0, 0] and p.l == 3
    assert np.all(pad_scanpath(path("c", n=7), 7).valid == 1)
    with pytest.warns(UserWarning, match="truncated"):
        p = pad_scanpath(path("c", n=9), 7)
    assert p.l == 7 and np.all(p.valid == 1)


def test_pad_sentinels_are_zero():
    p = pad_scanpath(path("c", n=2), 5)
    assert np.all(p.xs[2:] == 0) and np.all(p.ys[2:] == 0) and np.all(p.ts[2:] == 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1680), st.floats(0, 1050), st.floats(0, 3000)), min_size=1, max_size=7))
def test_pad_unpad_lossless(fix):
    xs, ys, ts = map(list, zip(*fix))
    s = Scanpath(xs, ys, ts, "i", "c", img_w=1680, img_h=1050)
    back = unpad(pad_scanpath(s, 7), 1680, 1050)
    assert np.max(np.abs(np.array(back.fixations) - np.array(s.fixations))) < 1e-9


# ---------------------------------------------------------------- synthetic features

def test_synthetic_deterministic_and_distinct():
    cfg = ModelConfig.tiny()
    a, b = synthetic_features("img1", "cup", cfg), synthetic_features("img1", "cup", cfg)
    assert np.array_equal(a.image_features, b.image_features)
    assert np.array_equal(a.target_embedding, b.target_embedding)
    c = synthetic_features("img2", "cup", cfg)
    assert np.mean(a.image_features != c.image_features) > 0.99


def test_synthetic_blob_recoverable():
    cfg = ModelConfig.tiny(C=32)
    b = synthetic_features("img7", "car", cfg, noise=0.1)
    r, c = b.meta["blob"]
    energy = np.linalg.norm(b.image_features, axis=0)
    assert np.unravel_index(energy.argmax(), energy.shape) == (r, c)
    x, y = blob_center("img7", "car", cfg, 800, 400)
    assert x == (c + 0.5) / cfg.w * 800 and y == (r + 0.5) / cfg.h * 400


def test_synthetic_features_known_prefix():
    # cross-platform determinism: frozen values from the integer-hash seeding
    b = synthetic_features("img0", "cup", ModelConfig.tiny())
    assert b.image_features.shape == (16, 4, 8) and b.meta["blob"] == (1, 5)
    np.testing.assert_allclose(b.image_features.reshape(-1)[:3],
                               [1.22611736307034, 0.3704130491541324, -0.24416859211997144], rtol=1e-12)
    np.testing.assert_allclose(b.target_embedding[:2], [0.13249581454760612, 0.6514850802314578], rtol=1e-12)


def test_synthetic_dataset_paths_end_at_blob():
    cfg = ModelConfig.tiny()
    ds = synthetic_dataset(cfg, n_images=6, categories=("cup", "car", "fork"), subjects=("a", "b"))
    assert len(ds) == 12 and ds.categories == {"cup", "car", "fork"}
    for s in ds.samples:
        assert 2 <= len(s) <= cfg.L
        assert s.fixations[0][:2] == (512.0, 320.0)
        bx, by = blob_center(s.image_id, s.target, cfg, 1024, 640)
        assert s.x[-1] == pytest.approx(bx) and s.y[-1] == pytest.approx(by)


def test_synthetic_features_random_embed_variant():
    cfg = ModelConfig.tiny(variant="randomTargetEmbed")
    a = SyntheticFeatures(0)("img0", "cup", cfg)
    b = SyntheticFeatures(0)("img0", "cup", ModelConfig.tiny())
    assert not np.array_equal(a.target_embedding, b.target_embedding)
    assert np.array_equal(a.image_features, b.image_features)


# ---------------------------------------------------------------- feature files

def test_feature_file_roundtrip(tmp_path):
    cfg = ModelConfig.tiny()
    feats = np.random.default_rng(0).standard_normal((cfg.C, cfg.h, cfg.w)).astype(np.float32)
    write_feature_file(tmp_path / "im 1.gzf", "im 1", feats)
    image_id, got = read_feature_file(tmp_path / "im 1.gzf")
    assert image_id == "im 1" and got.tobytes() == feats.tobytes()
    bundle = FileFeatures(str(tmp_path), HashEmbedding(cfg.d_text))("im 1", "cup", cfg)
    assert bundle.image_features.tobytes() == feats.tobytes()


def test_feature_file_errors(tmp_path):
    cfg = ModelConfig.tiny()
    src = FileFeatures(str(tmp_path), HashEmbedding(cfg.d_text))
    with pytest.raises(DatasetError, match="no feature file"):
        src("missing", "cup", cfg)
    write_feature_file(tmp_path / "x.gzf", "x", np.zeros((1, 2, 3)))
    with pytest.raises(DatasetError, match="do not match"):
        src("x", "cup", cfg)
    (tmp_path / "y.gzf").write_bytes(b"garbage!")
    with pytest.raises(DatasetError, match="not a feature file"):
        read_feature_file(tmp_path / "y.gzf")


# ---------------------------------------------------------------- labels

def _grid():
    labels = np.zeros((4, 6), dtype=np.uint16)
    labels[:, 3:] = 2
    labels[3, :] = 7
    return LabelGrid(labels, {0: "wall", 2: "counter", 7: "floor"}, "img")


def test_labels_lookup_and_boundary():
    g = _grid()
    s = Scanpath([0.5, 2.999, 3.0, 5.9], [0.0, 1.0, 1.0, 3.5], [1, 1, 1, 1], "img", "c", img_w=6, img_h=4)
    assert fixations_to_labels(s, g) == ["wall", "wall", "counter", "floor"]


def test_labels_single_region():
    g = LabelGrid(np.full((3, 3), 2, dtype=np.uint16), {2: "counter"})
    s = Scanpath([0, 1, 2.5], [0, 2, 1], [1, 1, 1], "img", "c", img_w=3, img_h=3)
    assert fixations_to_labels(s, g) == ["counter"] * 3


def test_labels_clamp_counted():
    diag = {}
    s = Scanpath([6.0, 0.0], [4.0, 0.0], [1, 1], "img", "c", img_w=6, img_h=4)
    assert fixations_to_labels(s, _grid(), diag) == ["floor", "wall"]
    assert diag["clamped"] == 1


def test_label_file_roundtrip(tmp_path):
    g = _grid()
    write_label_file(tmp_path / "img.gzl", g)
    got = read_label_file(tmp_path / "img.gzl")
    assert got.image_id == "img" and got.class_names == g.class_names
    assert got.labels.tobytes() == g.labels.astype("<u2").tobytes()
    assert set(load_label_dir(tmp_path)) == {"img"}
