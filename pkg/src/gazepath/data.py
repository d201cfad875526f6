"""Scanpath datasets, feature sources, padding and leave-one-category-out splits."""
from __future__ import annotations

import json
import math
import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import T_MAX_MS, HashEmbedding, hash_seed
from .structs import FeatureBundle, Scanpath

FEATURE_MAGIC = b"GZPFEAT\x00"
LABEL_MAGIC = b"GZPLABL\x00"
REQUIRED_FIELDS = ("name", "subject", "task", "X", "Y", "T", "img_w", "img_h")


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    samples: list = field(default_factory=list)
    image_index: dict = field(default_factory=dict)

    @property
    def categories(self):
        return {s.target for s in self.samples}

    def __len__(self):
        return len(self.samples)

    def by_category(self):
        out = {}
        for s in self.samples:
            out.setdefault(s.target, []).append(s)
        return out

    def by_pair(self):
        """Samples grouped by (image_id, target) in first-seen order."""
        out = {}
        for s in self.samples:
            out.setdefault((s.image_id, s.target), []).append(s)
        return out


# ---------------------------------------------------------------- JSON dataset

def _check_record(i, rec):
    if not isinstance(rec, dict):
        raise DatasetError(f"record {i}: expected an object, got {type(rec).__name__}")
    missing = [k for k in REQUIRED_FIELDS if k not in rec]
    if missing:
        raise DatasetError(f"record {i}: missing field(s) {missing}")
    xs, ys, ts = rec["X"], rec["Y"], rec["T"]
    if not (isinstance(xs, list) and isinstance(ys, list) and isinstance(ts, list)):
        raise DatasetError(f"record {i}: X, Y, T must be arrays")
    if not (len(xs) == len(ys) == len(ts)):
        raise DatasetError(f"record {i}: X, Y, T lengths differ ({len(xs)}, {len(ys)}, {len(ts)})")
    if not xs:
        raise DatasetError(f"record {i}: empty scanpath")
    w, h = rec["img_w"], rec["img_h"]
    if not (isinstance(w, int) and isinstance(h, int)) or w <= 0 or h <= 0:
        raise DatasetError(f"record {i}: img_w/img_h must be positive integers")
    try:
        arr = np.array([xs, ys, ts], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"record {i}: non-numeric fixation value") from exc
    if not np.all(np.isfinite(arr)):
        raise DatasetError(f"record {i}: non-finite fixation value")
    for k, (x, y, t) in enumerate(arr.T):
        if not 0 <= x <= w:
            raise DatasetError(f"record {i}: fixation {k} x={x} outside image width {w}")
        if not 0 <= y <= h:
            raise DatasetError(f"record {i}: fixation {k} y={y} outside image height {h}")
        if t < 0:
            raise DatasetError(f"record {i}: fixation {k} has negative duration {t}")
    if not str(rec["task"]).strip():
        raise DatasetError(f"record {i}: empty task name")


def dataset_from_records(records):
    if not isinstance(records, list):
        raise DatasetError("dataset JSON must be an array of records")
    samples = []
    for i, rec in enumerate(records):
        _check_record(i, rec)
        samples.append(Scanpath(rec["X"], rec["Y"], rec["T"], str(rec["name"]), str(rec["task"]),
                                str(rec["subject"]), rec["img_w"], rec["img_h"]))
    return Dataset(samples)


def load_dataset(path):
    try:
        with open(path) as fh:
            records = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed JSON: {exc}") from exc
    return dataset_from_records(records)


def save_dataset(ds, path):
    with open(path, "w") as fh:
        json.dump([s.to_record() for s in ds.samples], fh)


def make_zerogaze_split(ds, held_out):
    """Train on every category except ``held_out``; test on ``held_out`` only."""
    if held_out not in ds.categories:
        raise DatasetError(f"unknown category {held_out!r}; available: {sorted(ds.categories)}")
    train = [s for s in ds.samples if s.target != held_out]
    test = [s for s in ds.samples if s.target == held_out]
    if not train:
        warnings.warn(f"holding out {held_out!r} leaves an empty training set", stacklevel=2)
    return Dataset(train, dict(ds.image_index)), Dataset(test, dict(ds.image_index))


# ---------------------------------------------------------------- padding

@dataclass
class PaddedSample:
    xs: np.ndarray
    ys: np.ndarray
    ts: np.ndarray
    valid: np.ndarray
    l: int


def pad_scanpath(s, L, img_w=None, img_h=None):
    """Normalize to [0, 1] units and pad to L slots (sentinel 0, valid 0)."""
    img_w = s.img_w if img_w is None else img_w
    img_h = s.img_h if img_h is None else img_h
    n = len(s)
    if n > L:
        warnings.warn(f"scanpath of length {n} truncated to {L}", stacklevel=2)
        n = L
    out = PaddedSample(np.zeros(L), np.zeros(L), np.zeros(L), np.zeros(L), n)
    out.xs[:n] = np.asarray(s.x[:n]) / img_w
    out.ys[:n] = np.asarray(s.y[:n]) / img_h
    out.ts[:n] = np.asarray(s.t[:n]) / T_MAX_MS
    out.valid[:n] = 1.0
    return out


def unpad(p, img_w, img_h, **meta):
    n = p.l
    return Scanpath(p.xs[:n] * img_w, p.ys[:n] * img_h, p.ts[:n] * T_MAX_MS, img_w=img_w, img_h=img_h, **meta)


# ---------------------------------------------------------------- synthetic features

def blob_location(image_id, target_name, cfg, seed=0):
    """Patch (row, col) where the target pattern is planted."""
    rng = np.random.default_rng(hash_seed("blob", image_id, target_name, seed))
    return int(rng.integers(cfg.h)), int(rng.integers(cfg.w))


def blob_center(image_id, target_name, cfg, img_w, img_h, seed=0):
    """Pixel coordinates of the planted blob's patch center."""
    r, c = blob_location(image_id, target_name, cfg, seed)
    return (c + 0.5) / cfg.w * img_w, (r + 0.5) / cfg.h * img_h


def synthetic_features(image_id, target_name, cfg, seed=0, noise=0.5, amplitude=2.0):
    """Deterministic stand-in for frozen backbone features.

    Noise grid keyed by ``(image_id, seed)``; target vector keyed by
    ``(target_name, seed)``; a Gaussian-weighted copy of a projection of the
    target vector is added around ``blob_location``.
    """
    rng = np.random.default_rng(hash_seed("image", image_id, seed))
    grid = noise * rng.standard_normal((cfg.C, cfg.h, cfg.w))
    emb = HashEmbedding(cfg.d_text, seed)(target_name)
    proj = np.random.default_rng(hash_seed("proj", seed)).standard_normal((cfg.C, cfg.d_text))
    pattern = proj @ emb
    pattern *= amplitude / (np.linalg.norm(pattern) / math.sqrt(cfg.C))
    r, c = blob_location(image_id, target_name, cfg, seed)
    rows, cols = np.mgrid[0:cfg.h, 0:cfg.w]
    weight = np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / (2 * 0.8 ** 2))
    grid += pattern[:, None, None] * weight[None]
    return FeatureBundle(grid, emb, image_id, target_name, {"blob": (r, c), "seed": seed})


def synthetic_dataset(cfg, n_images=8, categories=("cup", "car"), subjects=("s0",), seed=0,
                      img_w=1024, img_h=640, jitter=0.0):
    """Planted-blob scanpaths: start at the image center, walk to the blob.

    Image ``i`` is searched for ``categories[i % len(categories)]``. Lengths
    vary between 2 and ``cfg.L``; ``jitter`` is the per-fixation noise as a
    fraction of the image size.
    """
    samples = []
    for i in range(n_images):
        image_id = f"syn{i:04d}"
        target = categories[i % len(categories)]
        bx, by = blob_center(image_id, target, cfg, img_w, img_h, seed)
        for subj in subjects:
            rng = np.random.default_rng(hash_seed("path", image_id, subj, seed))
            n = 2 + int(rng.integers(max(cfg.L - 1, 1))) if cfg.L > 1 else 1
            xs, ys, ts = [img_w / 2], [img_h / 2], [float(200 + rng.integers(100))]
            for k in range(1, n):
                frac = k / (n - 1)
                jx, jy = (rng.standard_normal(2) * jitter) if jitter else (0.0, 0.0)
                xs.append(float(np.clip(img_w / 2 + frac * (bx - img_w / 2) + jx * img_w, 0, img_w)))
                ys.append(float(np.clip(img_h / 2 + frac * (by - img_h / 2) + jy * img_h, 0, img_h)))
                ts.append(float(150 + 50 * k + rng.integers(100)))
            samples.append(Scanpath(xs, ys, ts, image_id, target, subj, img_w, img_h))
    return Dataset(samples, {s.image_id: "synthetic" for s in samples})


# ---------------------------------------------------------------- feature files

def write_feature_file(path, image_id, features):
    features = np.ascontiguousarray(features, dtype="<f4")
    if features.ndim != 3:
        raise ValueError("features must be (C, h, w)")
    nb = image_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<H", len(nb)))
        fh.write(nb)
        fh.write(struct.pack("<III", *features.shape))
        fh.write(features.tobytes())


def read_feature_file(path):
    """Returns ``(image_id, features)`` with features shaped (C, h, w)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != FEATURE_MAGIC:
        raise DatasetError(f"{path}: not a feature file")
    (ln,) = struct.unpack_from("<H", buf, 8)
    image_id = buf[10:10 + ln].decode("utf-8")
    pos = 10 + ln
    C, h, w = struct.unpack_from("<III", buf, pos)
    pos += 12
    data = np.frombuffer(buf, dtype="<f4", count=C * h * w, offset=pos).reshape(C, h, w).copy()
    return image_id, data


class FileFeatures:
    """Features from ``<directory>/<image_id>.gzf`` plus a target-embedding provider."""

    def __init__(self, directory, embedder):
        self.directory = directory
        self.embedder = embedder

    def __call__(self, image_id, target_name, cfg):
        from .model import embed_target

        path = os.path.join(self.directory, f"{image_id}.gzf")
        if not os.path.exists(path):
            raise DatasetError(f"no feature file for image {image_id!r} at {path}")
        _, feats = read_feature_file(path)
        if feats.shape != (cfg.C, cfg.h, cfg.w):
            raise DatasetError(f"{path}: features {feats.shape} do not match config {(cfg.C, cfg.h, cfg.w)}")
        return FeatureBundle(feats, embed_target(target_name, self.embedder, cfg), image_id, target_name)

    def describe(self):
        return {"kind": "files", "directory": self.directory, "embeddings": self.embedder.describe()}


class SyntheticFeatures:
    def __init__(self, seed=0):
        self.seed = seed

    def __call__(self, image_id, target_name, cfg):
        from .model import embed_target

        b = synthetic_features(image_id, target_name, cfg, self.seed)
        if cfg.variant == "randomTargetEmbed":
            b.target_embedding = embed_target(target_name, HashEmbedding(cfg.d_text, self.seed + 1), cfg)
        return b

    def describe(self):
        return {"kind": "synthetic", "seed": self.seed}


# ---------------------------------------------------------------- semantic label grids

@dataclass
class LabelGrid:
    labels: np.ndarray  # (H, W) uint16 class ids
    class_names: dict
    image_id: str = ""


def fixations_to_labels(s, grid, diagnostics=None):
    """Class name under each fixation (floor of pixel coordinates).

    Fixations outside the grid are clamped to the border and counted in
    ``diagnostics["clamped"]`` when a dict is passed.
    """
    H, W = grid.labels.shape
    out = []
    for x, y in zip(s.x, s.y):
        col, row = int(math.floor(x)), int(math.floor(y))
        if not (0 <= col < W and 0 <= row < H):
            col = min(max(col, 0), W - 1)
            row = min(max(row, 0), H - 1)
            if diagnostics is not None:
                diagnostics["clamped"] = diagnostics.get("clamped", 0) + 1
        cid = int(grid.labels[row, col])
        out.append(grid.class_names.get(cid, str(cid)))
    return out


def write_label_file(path, grid):
    labels = np.ascontiguousarray(grid.labels, dtype="<u2")
    nb = grid.image_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(LABEL_MAGIC)
        fh.write(struct.pack("<H", len(nb)))
        fh.write(nb)
        fh.write(struct.pack("<II", *labels.shape))
        fh.write(labels.tobytes())
        fh.write(struct.pack("<I", len(grid.class_names)))
        for cid, name in sorted(grid.class_names.items()):
            enc = name.encode("utf-8")
            fh.write(struct.pack("<HH", cid, len(enc)))
            fh.write(enc)


def read_label_file(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != LABEL_MAGIC:
        raise DatasetError(f"{path}: not a label file")
    (ln,) = struct.unpack_from("<H", buf, 8)
    image_id = buf[10:10 + ln].decode("utf-8")
    pos = 10 + ln
    H, W = struct.unpack_from("<II", buf, pos)
    pos += 8
    labels = np.frombuffer(buf, dtype="<u2", count=H * W, offset=pos).reshape(H, W).copy()
    pos += 2 * H * W
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    names = {}
    for _ in range(n):
        cid, nl = struct.unpack_from("<HH", buf, pos)
        pos += 4
        names[cid] = buf[pos:pos + nl].decode("utf-8")
        pos += nl
    return LabelGrid(labels, names, image_id)


def load_label_dir(directory):
    """All ``*.gzl`` label files in a directory, keyed by image id."""
    grids = {}
    for fn in sorted(os.listdir(directory)):
        if fn.endswith(".gzl"):
            g = read_label_file(os.path.join(directory, fn))
            grids[g.image_id] = g
    return grids
