"""Small shared helpers: worker pool sizing, ordered parallel map, xlogx."""

import os
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def worker_count():
    """Number of workers for multistart batches.

    Controlled by the SPINLAB_WORKERS environment variable; defaults to 1.
    Results never depend on this value, only wall-clock time does.
    """
    raw = os.environ.get("SPINLAB_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn, items, workers=None):
    """Map fn over items, preserving order; threads only when workers > 1."""
    if workers is None:
        workers = worker_count()
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def xlogx(v):
    """Elementwise x*ln(x) with the 0*ln(0) = 0 convention."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def rel_change(old, new):
    """Symmetric relative change, safe at exact zeros."""
    old = np.asarray(old, dtype=float)
    new = np.asarray(new, dtype=float)
    denom = np.maximum(np.maximum(np.abs(old), np.abs(new)), 1e-300)
    diff = np.abs(new - old)
    out = np.where(diff == 0.0, 0.0, diff / denom)
    return float(np.max(out)) if out.size else 0.0


def largest_remainder_round(weights, total):
    """Round weights*total to integers summing to total.

    Deterministic largest-remainder rule; ties go to the smaller index.
    """
    weights = np.asarray(weights, dtype=float)
    raw = weights * total
    base = np.floor(raw).astype(int)
    short = int(round(total - base.sum()))
    if short < 0 or short > len(weights):
        raise ValueError("weights do not sum to 1 within rounding slack")
    if short:
        rema = raw - base
        order = sorted(range(len(weights)), key=lambda i: (-rema[i], i))
        for i in order[:short]:
            base[i] += 1
    return base


def simplex_grid(q, step):
    """All points of the q-simplex with coordinates a multiple of step."""
    m = int(round(1.0 / step))
    out = []

    def rec(prefix, left):
        if len(prefix) == q - 1:
            out.append(prefix + [left])
            return
        for k in range(left + 1):
            rec(prefix + [k], left - k)

    rec([], m)
    return np.array(out, dtype=float) / m


def math_inf_to_str(x):
    """JSON-safe rendering of floats (inf/-inf/nan become strings)."""
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x
