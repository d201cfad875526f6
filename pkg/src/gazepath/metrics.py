"""Scanpath similarity metrics and the per-category evaluation report.

String metrics (SS, FED and their semantic forms) turn scanpaths into
symbol strings, either mean-shift cluster ids or the object class under each
fixation, optionally repeating each symbol per 50 ms of fixation. MultiMatch
compares saccade vectors and fixation positions geometrically. CC and NSS
compare Gaussian-blurred fixation maps.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .data import fixations_to_labels


class MetricError(ValueError):
    """A metric is undefined for its inputs (empty strings, flat maps)."""


STRING_METRICS = ("ss", "semss", "fed", "semfed")
MM_PARTS = ("shape", "direction", "length", "position")
COLUMNS = ("ss", "ss_dur", "semss", "semss_dur", "fed", "fed_dur", "semfed", "semfed_dur",
           "mm", "mm_shape", "mm_direction", "mm_length", "mm_position", "cc", "nss")
DURATION_COLUMNS = tuple(c for c in COLUMNS if c.endswith("_dur"))


@dataclass(frozen=True)
class FixationString:
    symbols: tuple
    source: str = "cluster"
    duration_expanded: bool = False

    def __len__(self):
        return len(self.symbols)


def _symbols(s):
    return s.symbols if isinstance(s, FixationString) else tuple(s)


def _encode_pair(a, b):
    """Map two symbol sequences onto shared int64 codes for the kernels."""
    table = {}
    ea = np.array([table.setdefault(x, len(table)) for x in a], dtype=np.int64)
    eb = np.array([table.setdefault(x, len(table)) for x in b], dtype=np.int64)
    return ea, eb


# ---------------------------------------------------------------- clustering

def cluster_fixations(paths, bandwidth=60.0, max_iter=300):
    """Mean-shift over the pooled fixations of ``paths``.

    Returns one int array of cluster ids per path. Modes closer than
    ``bandwidth`` are merged; ids are assigned in order of increasing x,
    then y, of the merged centers.
    """
    pts = np.concatenate([p.xy() for p in paths]) if paths else np.zeros((0, 2))
    if len(pts) == 0:
        raise MetricError("clustering needs at least one fixation")
    modes = np.asarray(kernels.mean_shift(np.ascontiguousarray(pts), float(bandwidth), max_iter, 1e-3 * bandwidth))
    order = np.lexsort((modes[:, 1], modes[:, 0]))
    centers = []
    label = np.empty(len(modes), dtype=np.int64)
    for i in order:
        for cid, c in enumerate(centers):
            if np.hypot(*(modes[i] - c)) < bandwidth:
                label[i] = cid
                break
        else:
            label[i] = len(centers)
            centers.append(modes[i])
    # renumber so ids follow the lexicographic order of their centers
    rank = np.lexsort((np.array([c[1] for c in centers]), np.array([c[0] for c in centers])))
    remap = np.empty(len(centers), dtype=np.int64)
    remap[rank] = np.arange(len(centers))
    label = remap[label]
    out, start = [], 0
    for p in paths:
        out.append(label[start:start + len(p)])
        start += len(p)
    return out


def cluster_strings(paths, bandwidth=60.0):
    return [FixationString(tuple(int(v) for v in ids), "cluster") for ids in cluster_fixations(paths, bandwidth)]


def semantic_string(path, grid, diagnostics=None):
    return FixationString(tuple(fixations_to_labels(path, grid, diagnostics)), "semantic")


def expand_duration(path, string, bin_ms=50.0, cap=20):
    """Repeat each symbol ceil(t / bin_ms) times (at least once, at most ``cap``)."""
    if bin_ms <= 0:
        raise ValueError("bin_ms must be positive")
    syms = []
    for sym, t in zip(_symbols(string), path.t):
        reps = min(cap, max(1, int(math.ceil(t / bin_ms))))
        syms.extend([sym] * reps)
    src = string.source if isinstance(string, FixationString) else "cluster"
    return FixationString(tuple(syms), src, True)


# ---------------------------------------------------------------- string metrics

def sequence_score(a, b, match=1.0, mismatch=0.0, gap=0.0):
    """Global-alignment score normalized by the longer string; in [0, 1] with the defaults."""
    a, b = _symbols(a), _symbols(b)
    if not a or not b:
        raise MetricError("sequence score needs two non-empty strings")
    ea, eb = _encode_pair(a, b)
    return float(kernels.nw_score(ea, eb, float(match), float(mismatch), float(gap))) / max(len(a), len(b))


def edit_distance(a, b):
    """Unit-cost Levenshtein distance."""
    a, b = _symbols(a), _symbols(b)
    ea, eb = _encode_pair(a, b)
    return int(kernels.levenshtein(ea, eb))


# ---------------------------------------------------------------- MultiMatch

def _resample(seq, n):
    seq = np.asarray(seq, dtype=np.float64)
    if len(seq) == n:
        return seq
    src = np.linspace(0.0, 1.0, len(seq)) if len(seq) > 1 else np.zeros(1)
    dst = np.linspace(0.0, 1.0, n)
    return np.column_stack([np.interp(dst, src, seq[:, k]) for k in range(seq.shape[1])])


def multimatch(a, b, img_w=None, img_h=None):
    """Shape, direction, length and position similarity in [0, 1].

    Sequences of unequal length are linearly resampled to the longer one.
    Vector components need two fixations in both paths; otherwise they are
    None and left out of ``mean``.
    """
    img_w = a.img_w if img_w is None else img_w
    img_h = a.img_h if img_h is None else img_h
    diag = math.hypot(img_w, img_h)
    pa, pb = a.xy(), b.xy()
    n = max(len(pa), len(pb))
    dpos = np.linalg.norm(_resample(pa, n) - _resample(pb, n), axis=1)
    res = {"shape": None, "direction": None, "length": None,
           "position": float(np.clip(1.0 - dpos.mean() / diag, 0.0, 1.0))}
    if len(pa) >= 2 and len(pb) >= 2:
        va, vb = np.diff(pa, axis=0), np.diff(pb, axis=0)
        k = max(len(va), len(vb))
        va, vb = _resample(va, k), _resample(vb, k)
        res["shape"] = float(np.clip(1.0 - np.linalg.norm(va - vb, axis=1).mean() / (2 * diag), 0.0, 1.0))
        ang = np.abs(np.arctan2(va[:, 1], va[:, 0]) - np.arctan2(vb[:, 1], vb[:, 0]))
        ang = np.where(ang > np.pi, 2 * np.pi - ang, ang)
        res["direction"] = float(np.clip(1.0 - ang.mean() / np.pi, 0.0, 1.0))
        dlen = np.abs(np.linalg.norm(va, axis=1) - np.linalg.norm(vb, axis=1))
        res["length"] = float(np.clip(1.0 - dlen.mean() / diag, 0.0, 1.0))
    vals = [v for v in res.values() if v is not None]
    res["mean"] = float(np.mean(vals))
    return res


# ---------------------------------------------------------------- fixation maps

@dataclass
class FixationMap:
    grid: np.ndarray
    sigma: float


def _pixels(xs, ys, H, W):
    px = np.clip(np.floor(np.asarray(xs, dtype=np.float64)), 0, W - 1).astype(np.int64)
    py = np.clip(np.floor(np.asarray(ys, dtype=np.float64)), 0, H - 1).astype(np.int64)
    return px, py


def fixation_map(paths, H, W, sigma=30.0):
    """Unit impulse per fixation blurred with a unit-mass Gaussian cut at 4 sigma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xs = [x for p in paths for x in p.x]
    ys = [y for p in paths for y in p.y]
    if not xs:
        raise MetricError("fixation map needs at least one fixation")
    px, py = _pixels(xs, ys, H, W)
    taps, radius = kernels.gaussian_taps(sigma)
    grid = kernels.splat(np.zeros((H, W)), px, py, taps, radius)
    return FixationMap(grid, sigma)


def _zscore(grid):
    grid = np.asarray(grid, dtype=np.float64)
    std = grid.std()
    if not std > 0:
        raise MetricError("map has zero variance")
    return (grid - grid.mean()) / std


def cc(pred, human):
    """Pearson correlation between two maps."""
    a = pred.grid if isinstance(pred, FixationMap) else pred
    b = human.grid if isinstance(human, FixationMap) else human
    if np.shape(a) != np.shape(b):
        raise MetricError(f"map shapes differ: {np.shape(a)} vs {np.shape(b)}")
    return float(np.mean(_zscore(a) * _zscore(b)))


def nss(pred, fixations):
    """Mean z-scored map value at the given (x, y) pixel locations."""
    grid = pred.grid if isinstance(pred, FixationMap) else np.asarray(pred)
    if len(fixations) == 0:
        raise MetricError("NSS needs at least one fixation")
    z = _zscore(grid)
    xs, ys = zip(*[(f[0], f[1]) for f in fixations])
    px, py = _pixels(xs, ys, *z.shape)
    return float(z[py, px].mean())


# ---------------------------------------------------------------- evaluation

@dataclass
class EvalConfig:
    bandwidth: float = 60.0
    bin_ms: float = 50.0
    max_repeat: int = 20
    sigma: float = 30.0
    workers: int = 1


@dataclass
class MetricReport:
    per_pair: list = field(default_factory=list)
    per_category: dict = field(default_factory=dict)
    aggregate: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    with_duration: bool = True
    config: dict = field(default_factory=dict)

    def to_json(self, path=None):
        blob = {"aggregate": self.aggregate, "per_category": self.per_category,
                "per_pair": self.per_pair, "diagnostics": self.diagnostics,
                "with_duration": self.with_duration, "config": self.config}
        text = json.dumps(blob, indent=2, sort_keys=True)
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_csv(self, path):
        """One row per metric column; overall first, then one column per category."""
        cats = sorted(self.per_category)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "duration", "overall"] + cats)
            for col in COLUMNS:
                name = col.removesuffix("_dur")
                if col.endswith("_dur"):
                    tag = "w/ Dur"
                else:
                    tag = "w/o Dur" if name in STRING_METRICS else ""
                vals = [self.aggregate.get(col)] + [self.per_category[c].get(col) for c in cats]
                w.writerow([name, tag] + ["-" if v is None else repr(v) for v in vals])


def pairwise_sum(values):
    """Sum with a fixed balanced tree so the result does not depend on scheduling."""
    values = list(values)
    if not values:
        return 0.0
    while len(values) > 1:
        nxt = [values[i] + values[i + 1] for i in range(0, len(values) - 1, 2)]
        if len(values) % 2:
            nxt.append(values[-1])
        values = nxt
    return values[0]


def weighted_mean(values, weights):
    pairs = [(v, w) for v, w in zip(values, weights) if v is not None and w > 0]
    if not pairs:
        return None
    return pairwise_sum([v * w for v, w in pairs]) / pairwise_sum([w for _, w in pairs])


def _mean_or_none(vals):
    vals = [v for v in vals if v is not None]
    return pairwise_sum(vals) / len(vals) if vals else None


def score_pair(models, humans, grid, cfg, with_duration):
    """All metrics for one image-target pair, averaged over model x human."""
    acc = {c: [] for c in COLUMNS}
    diag = {"clamped": 0}
    for m in models:
        for h in humans:
            sm, sh = cluster_strings([m, h], cfg.bandwidth)
            acc["ss"].append(sequence_score(sm, sh))
            acc["fed"].append(float(edit_distance(sm, sh)))
            if with_duration:
                dm = expand_duration(m, sm, cfg.bin_ms, cfg.max_repeat)
                dh = expand_duration(h, sh, cfg.bin_ms, cfg.max_repeat)
                acc["ss_dur"].append(sequence_score(dm, dh))
                acc["fed_dur"].append(float(edit_distance(dm, dh)))
            if grid is not None:
                gm, gh = semantic_string(m, grid, diag), semantic_string(h, grid, diag)
                acc["semss"].append(sequence_score(gm, gh))
                acc["semfed"].append(float(edit_distance(gm, gh)))
                if with_duration:
                    gdm = expand_duration(m, gm, cfg.bin_ms, cfg.max_repeat)
                    gdh = expand_duration(h, gh, cfg.bin_ms, cfg.max_repeat)
                    acc["semss_dur"].append(sequence_score(gdm, gdh))
                    acc["semfed_dur"].append(float(edit_distance(gdm, gdh)))
            mm = multimatch(m, h, h.img_w, h.img_h)
            acc["mm"].append(mm["mean"])
            for part in MM_PARTS:
                acc[f"mm_{part}"].append(mm[part])
    H, W = humans[0].img_h, humans[0].img_w
    pred_map = fixation_map(models, H, W, cfg.sigma)
    human_map = fixation_map(humans, H, W, cfg.sigma)
    try:
        acc["cc"].append(cc(pred_map, human_map))
        acc["nss"].append(nss(pred_map, [f for h in humans for f in h.fixations]))
    except MetricError:
        pass
    return {c: _mean_or_none(v) for c, v in acc.items()}, diag


def _score_job(job):
    return score_pair(*job)


def evaluate(model_paths, human_paths, label_grids=None, cfg=None, with_duration=True):
    """Score model scanpaths against human scanpaths of the same image and target.

    Per-category values average over image-target pairs; the overall value
    weights each category by its number of pairs.
    """
    cfg = cfg or EvalConfig()
    label_grids = label_grids or {}
    humans, models = {}, {}
    for h in human_paths:
        humans.setdefault((h.image_id, h.target), []).append(h)
    for m in model_paths:
        models.setdefault((m.image_id, m.target), []).append(m)
    unmatched = [{"image_id": k[0], "target": k[1]} for k in models if k not in humans]
    keys = [k for k in models if k in humans]
    missing_grids = sorted({k[0] for k in keys if k[0] not in label_grids})
    jobs = [(models[k], humans[k], label_grids.get(k[0]), cfg, with_duration) for k in keys]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_score_job, jobs))
    else:
        results = [score_pair(*j) for j in jobs]

    report = MetricReport(with_duration=with_duration, config=asdict(cfg))
    by_cat = {}
    clamped = 0
    for k, (scores, diag) in zip(keys, results):
        clamped += diag["clamped"]
        row = {"image_id": k[0], "target": k[1], "n_model": len(models[k]), "n_human": len(humans[k])}
        row.update(scores)
        report.per_pair.append(row)
        by_cat.setdefault(k[1], []).append(scores)
    counts = {}
    for cat in sorted(by_cat):
        rows = by_cat[cat]
        counts[cat] = len(rows)
        block = {"n": len(rows)}
        for c in COLUMNS:
            block[c] = _mean_or_none([r[c] for r in rows])
        report.per_category[cat] = block
    cats = sorted(report.per_category)
    for c in COLUMNS:
        report.aggregate[c] = weighted_mean([report.per_category[k][c] for k in cats], [counts[k] for k in cats])
    report.aggregate["n"] = sum(counts.values())
    warnings_ = []
    if missing_grids:
        warnings_.append(f"no label grid for {len(missing_grids)} image(s); semantic metrics skipped there")
    report.diagnostics = {"unmatched": unmatched, "missing_label_grids": missing_grids,
                          "clamped_fixations": clamped, "warnings": warnings_}
    return report
