"""Command line: synth, train, split, eval, predict, bench.

Exit codes: 0 success, 2 usage error, 3 data error, 4 compute error.
Every command writes a ``*.manifest.json`` next to its main output.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .data import (Dataset, DatasetError, FileFeatures, LabelGrid, SyntheticFeatures, blob_location,
                   load_dataset, load_label_dir, make_zerogaze_split, read_feature_file, save_dataset,
                   synthetic_dataset, synthetic_features, write_label_file)
from .metrics import EvalConfig, MetricError, evaluate
from .model import (ConfigError, HashEmbedding, Model, ModelConfig, TableEmbedding, UnknownTargetError,
                    embed_target, hash_seed, load_checkpoint, predict, predict_autoregressive)
from .plot import write_svg
from .structs import FeatureBundle
from .tensor import ContractError
from .train import TrainConfig, Trainer, write_loss_csv

log = logging.getLogger("gazepath")

EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 2, 3, 4
CONFIG_ENV = "GAZEPATH_CONFIG"
VARIANT_FLAGS = {"full": "full", "noDur": "noDur", "noReg": "noReg", "randEmbed": "randomTargetEmbed"}
PRESETS = {
    "tiny": {"model": asdict(ModelConfig.tiny()), "train": {"steps": 500, "lr": 1e-4, "batch_size": 8}},
    "default": {"model": asdict(ModelConfig()), "train": {}},
}


class UsageError(Exception):
    pass


def load_config(source):
    """Preset name or JSON file with optional ``model`` and ``train`` blocks."""
    source = source or os.environ.get(CONFIG_ENV) or "tiny"
    if source in PRESETS:
        blob = json.loads(json.dumps(PRESETS[source]))
    elif os.path.exists(source):
        with open(source) as fh:
            blob = json.load(fh)
    else:
        raise UsageError(f"config {source!r} is neither a preset {sorted(PRESETS)} nor a file")
    return blob.get("model", {}), blob.get("train", {})


def write_manifest(path, command, args, outputs, started, extra=None):
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "args": {k: v for k, v in vars(args).items() if k != "func"},
        "seed": getattr(args, "seed", None),
        "inputs": {k: getattr(args, k) for k in ("data", "checkpoint", "labels", "config",
                                                  "features_dir", "embeddings", "image_features")
                   if getattr(args, k, None)},
        "outputs": outputs,
        "version": __version__,
        "wall_clock_s": time.time() - started,
    }
    manifest.update(extra or {})
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)


def _embedder(args, d_text, seed=0):
    if getattr(args, "embeddings", None):
        fallback = HashEmbedding(d_text, seed) if getattr(args, "hash_fallback", False) else None
        return TableEmbedding.from_file(args.embeddings, fallback)
    return HashEmbedding(d_text, seed)


def features_from_args(args, d_text, recorded=None):
    kind = getattr(args, "features", None) or (recorded or {}).get("kind", "synthetic")
    if kind == "synthetic":
        seed = getattr(args, "feature_seed", None)
        if seed is None:
            seed = (recorded or {}).get("seed", 0)
        return SyntheticFeatures(seed)
    directory = getattr(args, "features_dir", None) or (recorded or {}).get("directory")
    if not directory:
        raise UsageError("--features files requires --features-dir")
    return FileFeatures(directory, _embedder(args, d_text))


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    started = time.time()
    model_cfg, _ = load_config(args.config)
    cfg = ModelConfig.from_dict(model_cfg)
    cats = [c.strip() for c in args.categories.split(",") if c.strip()]
    subjects = [s.strip() for s in args.subjects.split(",") if s.strip()]
    ds = synthetic_dataset(cfg, args.n_images, cats, subjects, args.seed, args.img_w, args.img_h, args.jitter)
    save_dataset(ds, args.out)
    outputs = [args.out]
    if args.labels_dir:
        os.makedirs(args.labels_dir, exist_ok=True)
        for image_id, target in sorted({(s.image_id, s.target) for s in ds.samples}):
            r, c = blob_location(image_id, target, cfg, args.seed)
            labels = np.zeros((args.img_h, args.img_w), dtype=np.uint16)
            ph, pw = args.img_h / cfg.h, args.img_w / cfg.w
            labels[int(r * ph):int((r + 1) * ph), int(c * pw):int((c + 1) * pw)] = 1
            path = os.path.join(args.labels_dir, f"{image_id}.gzl")
            write_label_file(path, LabelGrid(labels, {0: "background", 1: target}, image_id))
            outputs.append(path)
    write_manifest(args.out + ".manifest.json", "synth", args, outputs, started)
    print(f"wrote {len(ds)} scanpaths to {args.out}")


def cmd_train(args):
    started = time.time()
    model_cfg, train_cfg = load_config(args.config)
    model_cfg["variant"] = VARIANT_FLAGS[args.variant]
    cfg = ModelConfig.from_dict(model_cfg)
    for flag in ("steps", "lr", "batch_size"):
        if getattr(args, flag) is not None:
            train_cfg[flag] = getattr(args, flag)
    train_cfg["seed"] = args.seed
    train_cfg.setdefault("init_seed", args.seed)
    tcfg = TrainConfig.from_dict(train_cfg)
    if args.features == "files" and not args.features_dir:
        raise UsageError("--features files requires --features-dir")
    ds = load_dataset(args.data)
    features = features_from_args(args, cfg.d_text)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.gzc")
    loss_csv = os.path.join(args.out, "loss.csv")
    if args.resume:
        tr = Trainer.resume(args.resume, ds, features, tcfg)
    else:
        tr = Trainer(ds, cfg, tcfg, features)
    tr.run(tcfg.steps - tr.step if args.resume else tcfg.steps, checkpoint_path=ckpt)
    tr.save(ckpt)
    write_loss_csv(loss_csv, tr.history)
    write_manifest(os.path.join(args.out, "manifest.json"), "train", args, [ckpt, loss_csv], started,
                   {"config_snapshot": {"model": cfg.to_dict(), "train": asdict(tcfg)}})
    print(f"final loss {tr.history[-1][3]:.6f}; checkpoint {ckpt}")


def cmd_split(args):
    started = time.time()
    ds = load_dataset(args.data)
    os.makedirs(args.out_dir, exist_ok=True)
    cats = sorted(ds.categories) if args.all else [args.leave_out]
    outputs = []
    for cat in cats:
        train, test = make_zerogaze_split(ds, cat)
        safe = cat.replace(" ", "_").replace("/", "_")
        for part, sub in (("train", train), ("test", test)):
            path = os.path.join(args.out_dir, f"{part}_{safe}.json")
            save_dataset(sub, path)
            outputs.append(path)
        print(f"{cat}: train {len(train)} test {len(test)}")
    write_manifest(os.path.join(args.out_dir, "manifest.json"), "split", args, outputs, started)


def _load_model(path):
    cfg, params, header, _ = load_checkpoint(path)
    return Model(cfg, params), header


def _pair_seed(seed, image_id, target):
    return hash_seed("eval", seed, image_id, target) % (2 ** 63)


def cmd_eval(args):
    started = time.time()
    model, header = _load_model(args.checkpoint)
    cfg = model.cfg
    ds = load_dataset(args.data)
    features = features_from_args(args, cfg.d_text, header.get("features"))
    grids = {}
    if args.labels:
        if os.path.isdir(args.labels):
            grids = load_label_dir(args.labels)
        else:
            log.warning("label directory %s not found; semantic metrics skipped", args.labels)
    else:
        log.warning("no --labels given; semantic metrics skipped")
    humans, preds = [], []
    for (image_id, target), paths in ds.by_pair().items():
        bundle = features(image_id, target, cfg)
        w, h = paths[0].img_w, paths[0].img_h
        if args.self_test:
            own = predict(model, bundle, 1, 0, w, h, deterministic=True)[0]
            own.subject = "self"
            humans.append(own)
            preds.extend(predict(model, bundle, args.n_samples, 0, w, h, deterministic=True))
        else:
            humans.extend(paths)
            preds.extend(predict(model, bundle, args.n_samples, _pair_seed(args.seed, image_id, target), w, h))
    report = evaluate(preds, humans, grids, EvalConfig(workers=args.workers), cfg.predicts_duration)
    report.to_json(args.report)
    csv_path = os.path.splitext(args.report)[0] + ".csv"
    report.to_csv(csv_path)
    write_manifest(args.report + ".manifest.json", "eval", args, [args.report, csv_path], started)
    agg = report.aggregate
    print(" ".join(f"{k}={agg[k]:.4f}" for k in ("ss", "fed", "mm", "cc", "nss") if agg.get(k) is not None))


def _bundle_for(args, cfg, recorded=None):
    if getattr(args, "image_features", None):
        image_id, feats = read_feature_file(args.image_features)
        embedder = _embedder(args, cfg.d_text)
        return FeatureBundle(feats, embed_target(args.target, embedder, cfg), image_id, args.target)
    image_id = getattr(args, "synthetic", None) or "bench"
    seed = (recorded or {}).get("seed", 0) if (recorded or {}).get("kind") == "synthetic" else 0
    b = synthetic_features(image_id, args.target, cfg, seed)
    if getattr(args, "embeddings", None):
        b.target_embedding = embed_target(args.target, _embedder(args, cfg.d_text), cfg)
    return b


def cmd_predict(args):
    started = time.time()
    if bool(args.image_features) == bool(args.synthetic):
        raise UsageError("give exactly one of --image-features or --synthetic")
    model, header = _load_model(args.checkpoint)
    bundle = _bundle_for(args, model.cfg, header.get("features"))
    paths = predict(model, bundle, args.n, args.seed, args.img_w, args.img_h, args.deterministic)
    with open(args.out, "w") as fh:
        json.dump([p.to_record() for p in paths], fh, indent=1)
    outputs = [args.out]
    if args.svg:
        write_svg(args.svg, paths, title=f"{bundle.image_id}: {args.target}")
        outputs.append(args.svg)
    write_manifest(args.out + ".manifest.json", "predict", args, outputs, started)
    print(f"wrote {len(paths)} scanpaths to {args.out}")


def time_calls(fns, repeats, warmup=3):
    """Wall-clock ms per call for each function in ``fns``.

    Calls are interleaved round-robin so slow drifts in machine load hit
    every variant equally instead of whichever block happened to run then.
    """
    for _ in range(warmup):
        for fn in fns.values():
            fn()
    out = {k: np.empty(repeats) for k in fns}
    for i in range(repeats):
        for k, fn in fns.items():
            t0 = time.perf_counter()
            fn()
            out[k][i] = time.perf_counter() - t0
    return {k: v * 1000.0 for k, v in out.items()}


def latency_stats(ms):
    return {"mean_ms": float(ms.mean()), "median_ms": float(np.median(ms)),
            "p95_ms": float(np.percentile(ms, 95))}


def _call(model, bundle, mode, length):
    if mode == "parallel":
        return lambda: predict(model, bundle, 1, 0, force_length=length)
    return lambda: predict_autoregressive(model, bundle, 0, force_length=length)


def run_bench(model, bundle, modes, repeats, length=None):
    """Single-case latency per mode at a forced scanpath length (default L)."""
    length = model.cfg.L if length is None else length
    ms = time_calls({m: _call(model, bundle, m, length) for m in modes}, repeats)
    return {m: latency_stats(v) for m, v in ms.items()}


def run_sweep(model, bundle, modes, repeats):
    """Latency stats keyed by (mode, length) for lengths 1..L, all interleaved."""
    fns = {(m, k): _call(model, bundle, m, k) for k in range(1, model.cfg.L + 1) for m in modes}
    return {key: latency_stats(v) for key, v in time_calls(fns, repeats).items()}


def cmd_bench(args):
    started = time.time()
    if args.repeats < 10:
        raise UsageError("--repeats must be at least 10")
    if args.checkpoint:
        model, header = _load_model(args.checkpoint)
    else:
        model_cfg, _ = load_config(args.config)
        model, header = Model.create(ModelConfig.from_dict(model_cfg), args.seed), {}
    bundle = _bundle_for(args, model.cfg, header.get("features"))
    modes = ["parallel", "autoregressive"] if args.mode == "both" else [args.mode]
    stats = run_bench(model, bundle, modes, args.repeats)
    ratio = None
    if len(stats) == 2:
        ratio = stats["autoregressive"]["median_ms"] / stats["parallel"]["median_ms"]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "length", "repeats", "mean_ms", "median_ms", "p95_ms", "speedup"])
        for m, s in stats.items():
            w.writerow([m, model.cfg.L, args.repeats, f"{s['mean_ms']:.4f}", f"{s['median_ms']:.4f}",
                        f"{s['p95_ms']:.4f}", "" if ratio is None else f"{ratio:.3f}"])
    outputs = [args.out]
    if args.sweep_lengths:
        sweep = os.path.splitext(args.out)[0] + "_sweep.csv"
        with open(sweep, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "length", "repeats", "mean_ms", "median_ms", "p95_ms"])
            for (m, k), s in run_sweep(model, bundle, modes, args.repeats).items():
                w.writerow([m, k, args.repeats, f"{s['mean_ms']:.4f}", f"{s['median_ms']:.4f}",
                            f"{s['p95_ms']:.4f}"])
        outputs.append(sweep)
    write_manifest(args.out + ".manifest.json", "bench", args, outputs, started)
    for m, s in stats.items():
        print(f"{m}: median {s['median_ms']:.2f} ms (mean {s['mean_ms']:.2f}, p95 {s['p95_ms']:.2f})")
    if ratio is not None:
        print(f"speedup parallel vs autoregressive: {ratio:.2f}x")


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="gazepath", description=__doc__.splitlines()[0])
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def feature_flags(sp, default=None):
        sp.add_argument("--features", choices=("files", "synthetic"), default=default)
        sp.add_argument("--features-dir")
        sp.add_argument("--embeddings", help="JSON table {target: [d_text floats]}")
        sp.add_argument("--hash-fallback", action="store_true",
                        help="embed targets missing from --embeddings with the hash provider")
        sp.add_argument("--feature-seed", type=int)

    s = sub.add_parser("synth", help="write a planted-blob synthetic dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--n-images", type=int, default=8)
    s.add_argument("--categories", default="cup,car")
    s.add_argument("--subjects", default="s0")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--img-w", type=int, default=1024)
    s.add_argument("--img-h", type=int, default=640)
    s.add_argument("--jitter", type=float, default=0.0)
    s.add_argument("--labels-dir")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--data", required=True)
    feature_flags(s, "synthetic")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--variant", choices=tuple(VARIANT_FLAGS), default="full")
    s.add_argument("--steps", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--resume")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("split", help="leave-one-category-out split")
    s.add_argument("--data", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--leave-out")
    g.add_argument("--all", action="store_true", help="one split per category")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("eval", help="predict and score against human scanpaths")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    feature_flags(s)
    s.add_argument("--labels")
    s.add_argument("--n-samples", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--self-test", action="store_true",
                   help="score deterministic predictions against themselves")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("predict", help="sample scanpaths for one image and target")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--image-features")
    s.add_argument("--synthetic", metavar="IMAGE_ID")
    s.add_argument("--target", required=True)
    s.add_argument("--embeddings")
    s.add_argument("--hash-fallback", action="store_true")
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--img-w", type=int, default=1024)
    s.add_argument("--img-h", type=int, default=640)
    s.add_argument("--deterministic", action="store_true")
    s.add_argument("--out", default="scanpaths.json")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("bench", help="single-case latency, parallel vs autoregressive")
    s.add_argument("--checkpoint")
    s.add_argument("--config")
    s.add_argument("--mode", choices=("parallel", "autoregressive", "both"), default="both")
    s.add_argument("--repeats", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--target", default="cup")
    s.add_argument("--synthetic", metavar="IMAGE_ID")
    s.add_argument("--image-features")
    s.add_argument("--embeddings")
    s.add_argument("--sweep-lengths", action="store_true")
    s.add_argument("--out", default="bench.csv")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "target", None) is not None and not args.target.strip():
        parser.error("--target must be non-empty")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, UnknownTargetError, FileNotFoundError, ConfigError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (MetricError, ContractError, FloatingPointError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return 0


if __name__ == "__main__":
    sys.exit(main())
