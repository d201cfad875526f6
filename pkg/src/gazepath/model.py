"""Scanpath transformer: image encoder, target joint embedding, parallel
fixation-query decoder, per-step prediction heads and sampling.

All forward functions take a leading batch axis. Parameters live in a flat
``dict[str, Tensor]`` so the optimizer and checkpoint code can walk them by
name.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import tensor as T
from .structs import FeatureBundle, Scanpath
from .tensor import Tensor

VARIANTS = ("full", "noDur", "noReg", "randomTargetEmbed")
T_MAX_MS = 5000.0
LN_EPS = 1e-5
CHECKPOINT_MAGIC = b"GZPCKPT\x00"
CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    pass


class UnknownTargetError(KeyError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d: int = 512
    n_enc: int = 6
    n_dec: int = 6
    heads: int = 8
    L: int = 7
    h: int = 20
    w: int = 32
    C: int = 2048
    d_text: int = 768
    variant: str = "full"

    def __post_init__(self):
        if self.d % self.heads:
            raise ConfigError(f"d={self.d} not divisible by heads={self.heads}")
        if self.d % 4:
            raise ConfigError(f"d={self.d} must be divisible by 4 for 2-D positional encoding")
        if self.L < 1:
            raise ConfigError("L must be >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @classmethod
    def tiny(cls, **kw):
        base = dict(d=32, n_enc=1, n_dec=1, heads=4, L=7, h=4, w=8, C=16, d_text=16)
        base.update(kw)
        return cls(**base)

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def to_dict(self):
        return asdict(self)

    def with_variant(self, variant):
        return replace(self, variant=variant)

    @property
    def predicts_duration(self):
        return self.variant != "noDur"

    @property
    def regresses_xy(self):
        return self.variant != "noReg"

    def head_dims(self):
        dims = {"valid": 2}
        if self.regresses_xy:
            dims.update(mu_x=1, mu_y=1, lv_x=1, lv_y=1)
        else:
            dims["patch"] = self.h * self.w
        if self.predicts_duration:
            dims.update(mu_t=1, lv_t=1)
        return dims


# ---------------------------------------------------------------- positional encodings

def _sincos(pos, n, temperature=10000.0):
    """Interleaved sin/cos of ``pos`` at ``n // 2`` geometric frequencies."""
    k = np.arange(n // 2, dtype=np.float64)
    freq = 1.0 / temperature ** (2.0 * k / n)
    ang = np.asarray(pos, dtype=np.float64)[..., None] * freq
    out = np.empty(ang.shape[:-1] + (n,))
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang)
    return out


def positional_encoding_2d(h, w, d):
    """(h*w, d) table: first d/2 channels encode the row, last d/2 the column."""
    if d % 4:
        raise ConfigError(f"d={d} must be divisible by 4")
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return np.concatenate([_sincos(rows.ravel(), d // 2), _sincos(cols.ravel(), d // 2)], axis=1)


def point_encoding(x, y, cfg):
    """Encoding of a normalized location, on the same scale as the patch grid."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    row = y * cfg.h - 0.5
    col = x * cfg.w - 0.5
    return np.concatenate([_sincos(row, cfg.d // 2), _sincos(col, cfg.d // 2)], axis=-1)


# ---------------------------------------------------------------- parameters

def _attn_shapes(prefix, d):
    out = {}
    for p in ("q", "k", "v", "o"):
        out[f"{prefix}.w{p}"] = (d, d)
        out[f"{prefix}.b{p}"] = (d,)
    return out


def param_shapes(cfg):
    d = cfg.d
    s = {"input_proj.w": (cfg.C, d), "input_proj.b": (d,)}
    for i in range(cfg.n_enc):
        p = f"enc{i}"
        s.update(_attn_shapes(f"{p}.attn", d))
        s.update({f"{p}.ln1.g": (d,), f"{p}.ln1.b": (d,),
                  f"{p}.ff1.w": (d, d), f"{p}.ff1.b": (d,),
                  f"{p}.ff2.w": (d, d), f"{p}.ff2.b": (d,),
                  f"{p}.ln2.g": (d,), f"{p}.ln2.b": (d,)})
    s.update({"joint.img.w": (d, d), "joint.img.b": (d,),
              "joint.tgt.w": (cfg.d_text, d), "joint.tgt.b": (d,),
              "joint.fuse.w": (2 * d, d), "joint.fuse.b": (d,),
              "queries": (cfg.L, d)})
    for i in range(cfg.n_dec):
        p = f"dec{i}"
        s.update(_attn_shapes(f"{p}.self", d))
        s.update(_attn_shapes(f"{p}.cross", d))
        for n in (1, 2, 3):
            s.update({f"{p}.ln{n}.g": (d,), f"{p}.ln{n}.b": (d,)})
        s.update({f"{p}.ff1.w": (d, d), f"{p}.ff1.b": (d,),
                  f"{p}.ff2.w": (d, d), f"{p}.ff2.b": (d,)})
    for name, out in cfg.head_dims().items():
        s.update({f"head.{name}.w1": (d, d), f"head.{name}.b1": (d,),
                  f"head.{name}.w2": (d, out), f"head.{name}.b2": (out,)})
    return s


def init_params(cfg, seed=0, dtype=np.float32):
    """Xavier-uniform weights, zero biases, unit LayerNorm gains.

    Output layers of the heads start small so the validity head is close to
    uniform and log-variances start near zero.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "queries":
            arr = rng.standard_normal(shape)
        elif leaf == "g":
            arr = np.ones(shape)
        elif len(shape) == 1:
            arr = np.zeros(shape)
        else:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            arr = rng.uniform(-limit, limit, size=shape)
            if leaf == "w2" and name.startswith("head."):
                arr *= 0.01
        params[name] = Tensor(arr, dtype=dtype, requires_grad=True)
    for name in ("head.mu_x.b2", "head.mu_y.b2"):
        if name in params:
            params[name].data[...] = 0.5
    return params


# ---------------------------------------------------------------- building blocks

def _attn_weights(params, prefix):
    return {k: params[f"{prefix}.{k}"] for k in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")}


def _ln(params, prefix, x):
    return T.layer_norm(x, params[f"{prefix}.g"], params[f"{prefix}.b"], LN_EPS)


def _ffn(params, prefix, x):
    hid = T.relu(T.linear(x, params[f"{prefix}.ff1.w"], params[f"{prefix}.ff1.b"]))
    return T.linear(hid, params[f"{prefix}.ff2.w"], params[f"{prefix}.ff2.b"])


def _const(arr, like):
    return Tensor(np.asarray(arr, dtype=like.dtype))


def _batched(x, rank):
    x = T.as_tensor(x)
    return (x, False) if x.ndim == rank else (T.reshape(x, (1,) + x.shape), True)


def encode_image(raw, params, cfg):
    """(B, C, h, w) backbone features -> (B, h*w, d) contextual features."""
    raw, squeeze = _batched(raw, 4)
    B, C, h, w = raw.shape
    if (C, h, w) != (cfg.C, cfg.h, cfg.w):
        raise ConfigError(f"image features {raw.shape[1:]} do not match config {(cfg.C, cfg.h, cfg.w)}")
    x = T.swapaxes(T.reshape(raw, (B, C, h * w)), 1, 2)
    x = T.linear(x, params["input_proj.w"], params["input_proj.b"])
    pos = _const(positional_encoding_2d(h, w, cfg.d), x)
    for i in range(cfg.n_enc):
        p = f"enc{i}"
        qk = x + pos
        x = _ln(params, f"{p}.ln1", x + T.multi_head_attention(qk, qk, x, cfg.heads, _attn_weights(params, f"{p}.attn")))
        x = _ln(params, f"{p}.ln2", x + _ffn(params, p, x))
    return T.reshape(x, x.shape[1:]) if squeeze else x


def joint_embed(f_image, f_target, params, cfg):
    """Fuse (B, hw, d) image features with (B, d_text) target vectors."""
    f_image, squeeze = _batched(f_image, 3)
    f_target = T.as_tensor(f_target)
    if f_target.ndim == 1:
        f_target = T.reshape(f_target, (1,) + f_target.shape)
    if f_target.shape[-1] != cfg.d_text:
        raise ConfigError(f"target embedding has {f_target.shape[-1]} dims, config expects {cfg.d_text}")
    B, hw, d = f_image.shape
    img = T.linear(f_image, params["joint.img.w"], params["joint.img.b"])
    tgt = T.linear(f_target, params["joint.tgt.w"], params["joint.tgt.b"])
    tgt = T.broadcast_to(T.reshape(tgt, (B, 1, d)), (B, hw, d))
    fused = T.relu(T.linear(T.concat([img, tgt], axis=-1), params["joint.fuse.w"], params["joint.fuse.b"]))
    return T.reshape(fused, fused.shape[1:]) if squeeze else fused


def query_positions(params, cfg, init_xy, queries=None):
    """Learned queries with the initial-fixation encoding added to step 0 only."""
    q = params["queries"] if queries is None else queries
    init_xy = np.atleast_2d(np.asarray(init_xy, dtype=np.float64))
    B = init_xy.shape[0]
    extra = np.zeros((B,) + q.shape, dtype=q.dtype)
    extra[:, 0, :] = point_encoding(init_xy[:, 0], init_xy[:, 1], cfg)
    return q + _const(extra, q)


def _decoder_layers(tgt, qpos, memory, mem_pos, params, cfg):
    mem_k = memory + mem_pos
    for i in range(cfg.n_dec):
        p = f"dec{i}"
        qk = tgt + qpos
        tgt = _ln(params, f"{p}.ln1", tgt + T.multi_head_attention(qk, qk, tgt, cfg.heads, _attn_weights(params, f"{p}.self")))
        tgt = _ln(params, f"{p}.ln2", tgt + T.multi_head_attention(tgt + qpos, mem_k, memory, cfg.heads, _attn_weights(params, f"{p}.cross")))
        tgt = _ln(params, f"{p}.ln3", tgt + _ffn(params, p, tgt))
    return tgt


def decode_fixations(f_joint, params, cfg, init_xy=(0.5, 0.5), queries=None):
    """All L fixation embeddings in one pass; self-attention is unmasked."""
    f_joint, squeeze = _batched(f_joint, 3)
    init_xy = np.atleast_2d(np.asarray(init_xy, dtype=np.float64))
    if init_xy.shape[0] == 1 and f_joint.shape[0] > 1:
        init_xy = np.repeat(init_xy, f_joint.shape[0], axis=0)
    qpos = query_positions(params, cfg, init_xy, queries)
    mem_pos = _const(positional_encoding_2d(cfg.h, cfg.w, cfg.d), f_joint)
    out = _decoder_layers(qpos, qpos, f_joint, mem_pos, params, cfg)
    return T.reshape(out, out.shape[1:]) if squeeze else out


@dataclass
class FixationOutput:
    """Per-step head outputs; every field is a Tensor of shape (B, L) except
    ``patch_prob`` which is (B, L, h*w). Fields a variant lacks are None."""

    valid_prob: Tensor
    mu_x: Tensor = None
    mu_y: Tensor = None
    mu_t: Tensor = None
    lambda_x: Tensor = None
    lambda_y: Tensor = None
    lambda_t: Tensor = None
    patch_prob: Tensor = None

    def numpy(self, b=0):
        """Plain arrays for batch element ``b``."""
        out = {}
        for k in ("valid_prob", "mu_x", "mu_y", "mu_t", "lambda_x", "lambda_y", "lambda_t", "patch_prob"):
            v = getattr(self, k)
            out[k] = None if v is None else np.asarray(v.data[b], dtype=np.float64)
        return out


def _mlp(params, name, x):
    hid = T.relu(T.linear(x, params[f"head.{name}.w1"], params[f"head.{name}.b1"]))
    return T.linear(hid, params[f"head.{name}.w2"], params[f"head.{name}.b2"])


def predict_heads(f_dec, params, cfg):
    f_dec, _ = _batched(f_dec, 3)
    scalar = lambda name: T.reshape(_mlp(params, name, f_dec), f_dec.shape[:2])  # noqa: E731
    out = FixationOutput(valid_prob=T.softmax(_mlp(params, "valid", f_dec), axis=-1)[..., 1])
    if cfg.regresses_xy:
        out.mu_x, out.mu_y = scalar("mu_x"), scalar("mu_y")
        out.lambda_x, out.lambda_y = scalar("lv_x"), scalar("lv_y")
    else:
        out.patch_prob = T.softmax(_mlp(params, "patch", f_dec), axis=-1)
    if cfg.predicts_duration:
        out.mu_t, out.lambda_t = scalar("mu_t"), scalar("lv_t")
    return out


def forward(params, cfg, image_features, target_embedding, init_xy=(0.5, 0.5)):
    f_image = encode_image(image_features, params, cfg)
    f_joint = joint_embed(f_image, target_embedding, params, cfg)
    f_dec = decode_fixations(f_joint, params, cfg, init_xy)
    return predict_heads(f_dec, params, cfg)


# ---------------------------------------------------------------- target embeddings

def hash_seed(*parts):
    """Integer seed from a SHA-256 of the parts; platform independent."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:16], "little")


class HashEmbedding:
    """Fixed random vector per target string."""

    def __init__(self, d_text, seed=0):
        self.d_text = d_text
        self.seed = seed

    def __call__(self, name):
        rng = np.random.default_rng(hash_seed("target", name, self.seed))
        return rng.standard_normal(self.d_text)

    def describe(self):
        return {"kind": "hash", "seed": self.seed}


class TableEmbedding:
    """Precomputed language-model vectors loaded from a JSON ``{name: [...]}`` table."""

    def __init__(self, table, fallback=None):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.fallback = fallback

    @classmethod
    def from_file(cls, path, fallback=None):
        with open(path) as fh:
            return cls(json.load(fh), fallback)

    def __call__(self, name):
        if name in self.table:
            return self.table[name]
        if self.fallback is not None:
            return self.fallback(name)
        raise UnknownTargetError(f"unknown target {name!r}; available: {sorted(self.table)}")

    def describe(self):
        return {"kind": "table", "targets": sorted(self.table),
                "fallback": None if self.fallback is None else self.fallback.describe()}


def embed_target(name, provider, cfg):
    if not name or not name.strip():
        raise ValueError("target name must be non-empty")
    if cfg.variant == "randomTargetEmbed" and not isinstance(provider, HashEmbedding):
        provider = HashEmbedding(cfg.d_text, getattr(provider, "seed", 0))
    vec = np.asarray(provider(name), dtype=np.float64)
    if vec.shape != (cfg.d_text,):
        raise ConfigError(f"embedding for {name!r} has shape {vec.shape}, expected ({cfg.d_text},)")
    return vec


# ---------------------------------------------------------------- sampling

def draw(mu, logvar, eps):
    """Unclamped reparameterized sample ``mu + eps * exp(logvar / 2)``."""
    return np.asarray(mu) + np.asarray(eps) * np.exp(0.5 * np.asarray(logvar))


def sample_scanpath(out, eps, img_w, img_h, cfg, deterministic=False, init_xy=(0.5, 0.5),
                    rng=None, force_length=None, image_id="", target=""):
    """Turn one sample's head outputs (see ``FixationOutput.numpy``) into pixels.

    ``eps`` is an (L, 3) array of standard normals for (x, y, t). The sequence
    stops before the first step whose validity probability is below 0.5;
    ``force_length`` overrides that (benchmarking).
    """
    v = out["valid_prob"]
    L = v.shape[0]
    if force_length is not None:
        n = int(force_length)
    else:
        below = np.flatnonzero(v < 0.5)
        n = int(below[0]) if below.size else L
    if deterministic:
        eps = np.zeros((L, 3))
    eps = np.asarray(eps, dtype=np.float64)

    if n == 0:
        x0, y0 = init_xy
        return Scanpath([x0 * img_w], [y0 * img_h], [0.0], image_id, target, "model", img_w, img_h,
                        empty_prediction=True)

    if cfg.regresses_xy:
        xs = draw(out["mu_x"][:n], out["lambda_x"][:n], eps[:n, 0])
        ys = draw(out["mu_y"][:n], out["lambda_y"][:n], eps[:n, 1])
    else:
        probs = out["patch_prob"][:n]
        if deterministic:
            idx = probs.argmax(axis=1)
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            idx = np.array([rng.choice(p.size, p=p / p.sum()) for p in probs])
        xs = (idx % cfg.w + 0.5) / cfg.w
        ys = (idx // cfg.w + 0.5) / cfg.h
    if cfg.predicts_duration:
        ts = draw(out["mu_t"][:n], out["lambda_t"][:n], eps[:n, 2])
    else:
        ts = np.zeros(n)
    xs = np.clip(xs, 0.0, 1.0) * img_w
    ys = np.clip(ys, 0.0, 1.0) * img_h
    ts = np.maximum(ts, 0.0) * T_MAX_MS
    return Scanpath(xs, ys, ts, image_id, target, "model", img_w, img_h)


@dataclass
class Model:
    cfg: ModelConfig
    params: dict

    @classmethod
    def create(cls, cfg, seed=0, dtype=np.float32):
        return cls(cfg, init_params(cfg, seed, dtype))

    def cast(self, dtype):
        return Model(self.cfg, {k: Tensor(v.data.astype(dtype), requires_grad=True) for k, v in self.params.items()})


def _bundle_inputs(model, bundle):
    dtype = next(iter(model.params.values())).dtype
    raw = np.asarray(bundle.image_features, dtype=dtype)[None]
    tgt = np.asarray(bundle.target_embedding, dtype=dtype)[None]
    return raw, tgt


def predict(model, bundle, n_samples=10, seed=0, img_w=1680, img_h=1050, deterministic=False,
            init_xy=(0.5, 0.5), force_length=None):
    """One forward pass, ``n_samples`` reparameterized draws."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cfg = model.cfg
    raw, tgt = _bundle_inputs(model, bundle)
    with T.no_grad():
        out = forward(model.params, cfg, raw, tgt, [init_xy]).numpy(0)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n_samples, cfg.L, 3))
    return [sample_scanpath(out, eps[i], img_w, img_h, cfg, deterministic, init_xy, rng,
                            force_length, bundle.image_id, bundle.target_name)
            for i in range(n_samples)]


def predict_autoregressive(model, bundle, seed=0, img_w=1680, img_h=1050, deterministic=False,
                           init_xy=(0.5, 0.5), force_length=None):
    """Sequential reference decoder for latency comparison.

    Emits one fixation per decoder run: step i decodes the query prefix
    0..i, where query j >= 1 carries the encoding of fixation j-1 emitted
    earlier, and reads the heads at the last position.
    """
    cfg = model.cfg
    params = model.params
    raw, tgt = _bundle_inputs(model, bundle)
    rng = np.random.default_rng(seed)
    eps = np.zeros((cfg.L, 3)) if deterministic else rng.standard_normal((cfg.L, 3))
    limit = cfg.L if force_length is None else int(force_length)
    with T.no_grad():
        f_joint = joint_embed(encode_image(raw, params, cfg), tgt, params, cfg)
        mem_pos = _const(positional_encoding_2d(cfg.h, cfg.w, cfg.d), f_joint)
        q = params["queries"].data
        prev = [tuple(init_xy)]
        xs, ys, ts = [], [], []
        for i in range(limit):
            extra = point_encoding(np.array([p[0] for p in prev]), np.array([p[1] for p in prev]), cfg)
            qpos = Tensor((q[: i + 1] + extra[: i + 1]).astype(q.dtype)[None])
            dec = _decoder_layers(qpos, qpos, f_joint, mem_pos, params, cfg)
            step = predict_heads(dec[:, i:i + 1, :], params, cfg).numpy(0)
            if force_length is None and step["valid_prob"][0] < 0.5:
                break
            path = sample_scanpath(step, eps[i:i + 1], 1, 1, _single_step(cfg), deterministic,
                                   prev[-1], rng, 1)
            xs.append(path.x[0])
            ys.append(path.y[0])
            ts.append(path.t[0])
            prev.append((path.x[0], path.y[0]))
    if not xs:
        x0, y0 = init_xy
        return Scanpath([x0 * img_w], [y0 * img_h], [0.0], bundle.image_id, bundle.target_name,
                        "model", img_w, img_h, empty_prediction=True)
    return Scanpath(np.array(xs) * img_w, np.array(ys) * img_h, ts, bundle.image_id,
                    bundle.target_name, "model", img_w, img_h)


def _single_step(cfg):
    return replace(cfg, L=1)


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path, cfg, params, header=None, extra=None):
    """Binary checkpoint: magic, version, JSON header, named float32 blocks.

    ``extra`` holds additional named arrays (optimizer moments).
    """
    head = {"format_version": CHECKPOINT_VERSION, "model_config": cfg.to_dict()}
    head.update(header or {})
    head_bytes = json.dumps(head, sort_keys=True).encode("utf-8")
    blocks = [(k, v.data if isinstance(v, Tensor) else v) for k, v in params.items()]
    blocks += [(k, v) for k, v in (extra or {}).items()]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(head_bytes)))
        fh.write(head_bytes)
        fh.write(struct.pack("<I", len(blocks)))
        for name, arr in blocks:
            arr = np.ascontiguousarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path, dtype=np.float32):
    """Returns ``(cfg, params, header, extra)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack_from("<II", buf, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    header = json.loads(buf[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    arrays = {}
    for _ in range(n):
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + ln].decode("utf-8")
        pos += ln
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(buf, dtype="<f4", count=count, offset=pos).reshape(shape).copy()
        pos += 4 * count
    cfg = ModelConfig.from_dict(header["model_config"])
    names = set(param_shapes(cfg))
    params = {k: Tensor(arrays[k].astype(dtype), requires_grad=True) for k in param_shapes(cfg)}
    extra = {k: v for k, v in arrays.items() if k not in names}
    return cfg, params, header, extra


__all__ = [
    "ConfigError", "FeatureBundle", "FixationOutput", "HashEmbedding", "Model", "ModelConfig",
    "TableEmbedding", "UnknownTargetError", "decode_fixations", "draw", "embed_target", "encode_image",
    "forward", "init_params", "joint_embed", "load_checkpoint", "point_encoding",
    "positional_encoding_2d", "predict", "predict_autoregressive", "predict_heads",
    "sample_scanpath", "save_checkpoint",
]
