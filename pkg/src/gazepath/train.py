"""Multitask loss, Adam and the training loop."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .data import pad_scanpath
from .model import Model, ModelConfig, forward, load_checkpoint, save_checkpoint
from .tensor import Tensor

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


@dataclass
class TrainConfig:
    batch_size: int = 8
    lr: float = 1e-4
    steps: int = 1000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dtype: str = "float32"
    checkpoint_every: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


# ---------------------------------------------------------------- losses

def _arr(x, like):
    return np.asarray(x, dtype=like.dtype)


def reparameterize(mu, logvar, eps):
    """mu + eps * exp(logvar / 2); gradients reach both mu and logvar."""
    return mu + T.exp(logvar * 0.5) * _arr(eps, mu.data)


def xyt_loss(px, py, pt, gx, gy, gt, valid):
    """Per-sample masked L1 term, shape (B,).

    ``p*`` are (B, L) tensors (``pt`` may be None for no-duration models);
    ``g*`` and ``valid`` are (B, L) arrays. Padded ground-truth slots are
    zeroed before use so their contents can never reach the result.
    """
    valid = _arr(valid, px.data)
    lengths = valid.sum(axis=1)
    if np.any(lengths == 0):
        raise ValueError("ground-truth scanpaths must be non-empty")
    keep = valid > 0
    err = T.tabs(px - _arr(np.where(keep, gx, 0.0), px.data)) + T.tabs(py - _arr(np.where(keep, gy, 0.0), py.data))
    if pt is not None:
        err = err + T.tabs(pt - _arr(np.where(keep, gt, 0.0), pt.data))
    return T.tsum(err * valid, axis=1) * _arr(1.0 / lengths, px.data)


def patch_loss(patch_prob, pt, gx, gy, gt, valid, cfg):
    """Classification counterpart of ``xyt_loss`` for the grid-head variant:
    negative log-probability of the ground-truth patch plus the L1 duration
    term, averaged over valid steps."""
    valid = _arr(valid, patch_prob.data)
    lengths = valid.sum(axis=1)
    if np.any(lengths == 0):
        raise ValueError("ground-truth scanpaths must be non-empty")
    keep = valid > 0
    col = np.clip(np.floor(np.where(keep, gx, 0.0) * cfg.w), 0, cfg.w - 1).astype(int)
    row = np.clip(np.floor(np.where(keep, gy, 0.0) * cfg.h), 0, cfg.h - 1).astype(int)
    onehot = np.zeros(patch_prob.shape, dtype=patch_prob.dtype)
    B, L = valid.shape
    onehot[np.arange(B)[:, None], np.arange(L)[None, :], row * cfg.w + col] = 1.0
    picked = T.tsum(patch_prob * onehot, axis=-1)
    err = -T.log(T.clamp(picked, PROB_CLAMP, 1.0))
    if pt is not None:
        err = err + T.tabs(pt - _arr(np.where(keep, gt, 0.0), pt.data))
    return T.tsum(err * valid, axis=1) * _arr(1.0 / lengths, patch_prob.data)


def val_loss(valid_prob, valid_gt):
    """Per-sample binary NLL averaged over all L steps, shape (B,)."""
    v = T.clamp(valid_prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = _arr(valid_gt, v.data)
    ll = T.log(v) * y + T.log(1.0 - v) * (1.0 - y)
    return T.mean(ll, axis=-1) * -1.0


def _as_2d(x):
    x = T.as_tensor(x)
    return x if x.ndim == 2 else T.reshape(x, (1,) + x.shape)


def loss_xyt(pred, gt):
    """Single-sample form: ``pred`` is (x, y, t) each of length L (t may be None)."""
    x, y, t = pred
    t = None if t is None else _as_2d(t)
    return xyt_loss(_as_2d(x), _as_2d(y), t, gt.xs[None], gt.ys[None], gt.ts[None], gt.valid[None])[0]


def loss_val(valid_prob, valid_gt):
    return val_loss(_as_2d(valid_prob), np.asarray(valid_gt)[None])[0]


@dataclass
class LossParts:
    total: Tensor
    xyt: float
    val: float


def total_loss(out, cfg, padded, eps):
    """Batch-mean of the per-sample regression and validity terms.

    ``out`` is the model's FixationOutput for M samples, ``padded`` a list of
    M PaddedSamples and ``eps`` an (M, L, 3) array of noise draws.
    """
    if not padded:
        raise ValueError("empty batch")
    gx = np.stack([p.xs for p in padded])
    gy = np.stack([p.ys for p in padded])
    gt = np.stack([p.ts for p in padded])
    valid = np.stack([p.valid for p in padded])
    pt = None
    if cfg.predicts_duration:
        pt = reparameterize(out.mu_t, out.lambda_t, eps[..., 2])
    if cfg.regresses_xy:
        px = reparameterize(out.mu_x, out.lambda_x, eps[..., 0])
        py = reparameterize(out.mu_y, out.lambda_y, eps[..., 1])
        lx = xyt_loss(px, py, pt, gx, gy, gt, valid)
    else:
        lx = patch_loss(out.patch_prob, pt, gx, gy, gt, valid, cfg)
    lv = val_loss(out.valid_prob, valid)
    total = T.mean(lx + lv)
    return LossParts(total, float(np.mean(lx.data)), float(np.mean(lv.data)))


# ---------------------------------------------------------------- optimizer

class Adam:
    """Bias-corrected adaptive moments."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, params, grads=None):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = p.grad if grads is None else grads[k]
            if g is None:
                continue
            g = np.asarray(g, dtype=p.data.dtype)
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {k} {p.data.shape}")
            m = self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            v = self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data = (p.data - update).astype(p.data.dtype, copy=False)

    def state_blocks(self):
        out = {f"adam.m.{k}": v for k, v in self.m.items()}
        out.update({f"adam.v.{k}": v for k, v in self.v.items()})
        return out

    def load_blocks(self, blocks, t):
        self.t = t
        for k in self.m:
            self.m[k] = blocks[f"adam.m.{k}"].astype(self.m[k].dtype)
            self.v[k] = blocks[f"adam.v.{k}"].astype(self.v[k].dtype)


# ---------------------------------------------------------------- loop

def batch_indices(n, batch_size, step, seed):
    """Sample indices for ``step``: a seeded permutation per pass over the data."""
    idx = []
    for k in range(step * batch_size, (step + 1) * batch_size):
        epoch, pos = divmod(k, n)
        perm = np.random.default_rng([seed, epoch]).permutation(n)
        idx.append(int(perm[pos]))
    return idx


def step_noise(seed, step, shape):
    return np.random.default_rng([seed, 0x5EED, step]).standard_normal(shape)


class Trainer:
    """Holds model, optimizer and cached inputs; ``run`` advances ``steps``."""

    def __init__(self, ds, cfg, tcfg, features, model=None):
        if len(ds) == 0:
            raise ValueError("training set is empty")
        self.ds, self.cfg, self.tcfg, self.features = ds, cfg, tcfg, features
        dtype = np.dtype(tcfg.dtype)
        self.model = model if model is not None else Model.create(cfg, tcfg.init_seed, dtype)
        self.opt = Adam(self.model.params, tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.eps)
        self.step = 0
        self.history = []
        self._cache = {}
        self.padded = [pad_scanpath(s, cfg.L) for s in ds.samples]

    def _bundle(self, s):
        key = (s.image_id, s.target)
        if key not in self._cache:
            self._cache[key] = self.features(s.image_id, s.target, self.cfg)
        return self._cache[key]

    def batch(self, idx):
        dtype = next(iter(self.model.params.values())).dtype
        bundles = [self._bundle(self.ds.samples[i]) for i in idx]
        raw = np.stack([b.image_features for b in bundles]).astype(dtype)
        tgt = np.stack([b.target_embedding for b in bundles]).astype(dtype)
        padded = [self.padded[i] for i in idx]
        init = np.array([[p.xs[0], p.ys[0]] for p in padded])
        return raw, tgt, init, padded

    def loss_at(self, step):
        """Loss of the batch for ``step`` under the current weights (no update)."""
        idx = batch_indices(len(self.ds), self.tcfg.batch_size, step, self.tcfg.seed)
        raw, tgt, init, padded = self.batch(idx)
        out = forward(self.model.params, self.cfg, raw, tgt, init)
        eps = step_noise(self.tcfg.seed, step, (len(idx), self.cfg.L, 3))
        return total_loss(out, self.cfg, padded, eps)

    def train_step(self):
        parts = self.loss_at(self.step)
        T.backward(parts.total)
        self.opt.step(self.model.params)
        row = (self.step, parts.xyt, parts.val, float(parts.total.data))
        self.history.append(row)
        self.step += 1
        return row

    def run(self, steps, callback=None, checkpoint_path=None):
        for _ in range(steps):
            row = self.train_step()
            if callback is not None:
                callback(self, row)
            every = self.tcfg.checkpoint_every
            if checkpoint_path and every and self.step % every == 0:
                self.save(checkpoint_path)
            if self.step % 100 == 0:
                log.info("step %d total %.5f", row[0], row[3])
        return self.history

    def save(self, path, header=None):
        head = {"train_config": asdict(self.tcfg), "step": self.step, "adam_t": self.opt.t,
                "features": self.features.describe() if hasattr(self.features, "describe") else None}
        head.update(header or {})
        save_checkpoint(path, self.cfg, self.model.params, head, self.opt.state_blocks())

    @classmethod
    def resume(cls, path, ds, features, tcfg=None):
        cfg, params, header, extra = load_checkpoint(path)
        tcfg = tcfg or TrainConfig.from_dict(header["train_config"])
        tr = cls(ds, cfg, tcfg, features, Model(cfg, params))
        tr.opt.load_blocks(extra, header["adam_t"])
        tr.step = header["step"]
        return tr


def write_loss_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss_xyt", "loss_val", "total"])
        for step, lx, lv, tot in history:
            w.writerow([step, repr(lx), repr(lv), repr(tot)])


def train(ds, cfg, tcfg, features, out_dir=None, callback=None):
    """Run ``tcfg.steps`` steps; write ``checkpoint.gzc`` and ``loss.csv`` to ``out_dir``."""
    tr = Trainer(ds, cfg, tcfg, features)
    ckpt = os.path.join(out_dir, "checkpoint.gzc") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    tr.run(tcfg.steps, callback, ckpt)
    if out_dir:
        tr.save(ckpt)
        write_loss_csv(os.path.join(out_dir, "loss.csv"), tr.history)
    return tr


__all__ = ["Adam", "ModelConfig", "TrainConfig", "Trainer", "loss_val", "loss_xyt", "total_loss",
           "train", "val_loss", "xyt_loss", "write_loss_csv"]
