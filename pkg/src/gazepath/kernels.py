"""Inner loops of the metric suite.

Each kernel has two implementations with identical contracts:

* ``*_loop``: scalar loops, compiled with numba when it is installed.
* ``*_numpy``: vectorized numpy, no compilation.

The unsuffixed names dispatch on ``GAZEPATH_NUMBA`` (see ``_accel``).
``benchmarks/bench_kernels.py`` times one against the other.
"""
import numpy as np

from ._accel import USE_NUMBA, jit


# ---------------------------------------------------------------- Levenshtein

@jit
def levenshtein_loop(a, b):
    n, m = a.shape[0], b.shape[0]
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = prev[j - 1] + cost
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def levenshtein_numpy(a, b):
    # Row recurrence D[i,j] = min(t[j], D[i,j-1] + 1) with
    # t = min(up + 1, diag + cost) unrolls to a running minimum of t[k] - k.
    a = np.asarray(a)
    b = np.asarray(b)
    m = b.shape[0]
    offs = np.arange(m + 1)
    prev = offs.copy()
    for i in range(1, a.shape[0] + 1):
        t = np.empty(m + 1, dtype=np.int64)
        t[0] = i
        t[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i - 1]))
        prev = np.minimum.accumulate(t - offs) + offs
    return int(prev[m])


# ---------------------------------------------------------------- Needleman-Wunsch

@jit
def nw_score_loop(a, b, match, mismatch, gap):
    n, m = a.shape[0], b.shape[0]
    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    for j in range(m + 1):
        prev[j] = gap * j
    for i in range(1, n + 1):
        cur[0] = gap * i
        for j in range(1, m + 1):
            s = match if a[i - 1] == b[j - 1] else mismatch
            best = prev[j - 1] + s
            if prev[j] + gap > best:
                best = prev[j] + gap
            if cur[j - 1] + gap > best:
                best = cur[j - 1] + gap
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def nw_score_numpy(a, b, match, mismatch, gap):
    a = np.asarray(a)
    b = np.asarray(b)
    m = b.shape[0]
    ramp = gap * np.arange(m + 1, dtype=np.float64)
    prev = ramp.copy()
    for i in range(1, a.shape[0] + 1):
        t = np.empty(m + 1)
        t[0] = gap * i
        s = np.where(b == a[i - 1], match, mismatch)
        t[1:] = np.maximum(prev[1:] + gap, prev[:-1] + s)
        prev = np.maximum.accumulate(t - ramp) + ramp
    return float(prev[m])


# ---------------------------------------------------------------- mean shift

@jit
def mean_shift_loop(points, bandwidth, max_iter, tol):
    """Flat-kernel mean shift; returns the converged mode of every point."""
    n = points.shape[0]
    modes = np.empty_like(points)
    bw2 = bandwidth * bandwidth
    for p in range(n):
        cx, cy = points[p, 0], points[p, 1]
        for _ in range(max_iter):
            sx = 0.0
            sy = 0.0
            cnt = 0
            for q in range(n):
                dx = points[q, 0] - cx
                dy = points[q, 1] - cy
                if dx * dx + dy * dy <= bw2:
                    sx += points[q, 0]
                    sy += points[q, 1]
                    cnt += 1
            nx = sx / cnt
            ny = sy / cnt
            shift = (nx - cx) * (nx - cx) + (ny - cy) * (ny - cy)
            cx, cy = nx, ny
            if shift <= tol * tol:
                break
        modes[p, 0] = cx
        modes[p, 1] = cy
    return modes


def mean_shift_numpy(points, bandwidth, max_iter, tol):
    points = np.asarray(points, dtype=np.float64)
    cur = points.copy()
    active = np.ones(len(points), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        c = cur[active]
        d2 = ((c[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        w = (d2 <= bandwidth * bandwidth).astype(np.float64)
        new = (w @ points) / w.sum(1, keepdims=True)
        shift = ((new - c) ** 2).sum(1)
        cur[active] = new
        idx = np.flatnonzero(active)
        active[idx[shift <= tol * tol]] = False
    return cur


# ---------------------------------------------------------------- Gaussian splatting

def gaussian_taps(sigma):
    """Normalized 1-D Gaussian truncated at 4 sigma; returns (taps, radius)."""
    radius = max(1, int(np.ceil(4.0 * sigma)))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (k / sigma) ** 2)
    return taps / taps.sum(), radius


@jit
def splat_loop(grid, xs, ys, taps, radius):
    """Add one separable Gaussian per point (pixel indices) into ``grid``."""
    h, w = grid.shape
    for n in range(xs.shape[0]):
        cx, cy = xs[n], ys[n]
        for dy in range(-radius, radius + 1):
            y = cy + dy
            if y < 0 or y >= h:
                continue
            gy = taps[dy + radius]
            for dx in range(-radius, radius + 1):
                x = cx + dx
                if x < 0 or x >= w:
                    continue
                grid[y, x] += gy * taps[dx + radius]
    return grid


def splat_numpy(grid, xs, ys, taps, radius):
    h, w = grid.shape
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    col = np.arange(w)[None, :] - xs[:, None] + radius
    row = np.arange(h)[None, :] - ys[:, None] + radius
    ntap = 2 * radius + 1
    gx = np.where((col >= 0) & (col < ntap), taps[np.clip(col, 0, ntap - 1)], 0.0)
    gy = np.where((row >= 0) & (row < ntap), taps[np.clip(row, 0, ntap - 1)], 0.0)
    grid += gy.T @ gx
    return grid


if USE_NUMBA:
    levenshtein = levenshtein_loop
    nw_score = nw_score_loop
    mean_shift = mean_shift_loop
    splat = splat_loop
else:
    levenshtein = levenshtein_numpy
    nw_score = nw_score_numpy
    mean_shift = mean_shift_numpy
    splat = splat_numpy
