"""Seeding, chunked execution and formatting helpers.

All samplers derive their generators through :func:`substream` so that a run
is a pure function of (seed, logical chunk index), independent of how many
worker threads execute the chunks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

WORKERS_ENV = "QUADRICINT_WORKERS"


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (seed, key...)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_ordered(fn: Callable, items: Sequence) -> list:
    """Apply fn to items, preserving order; threads only if workers > 1.

    Results are combined by the caller in list order, so the output is
    byte-identical for any worker count.
    """
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Split total into fixed-size chunks (last one may be short)."""
    total = int(total)
    chunk = max(1, int(chunk))
    out = [chunk] * (total // chunk)
    if total % chunk:
        out.append(total % chunk)
    return out


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal form, stable across runs."""
    return format(float(x), ".17g")


def as_batch(z: np.ndarray, width: int) -> tuple[np.ndarray, bool]:
    """Coerce a point or batch of points to shape (n, width)."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        if z.shape[0] != width:
            raise ValueError(f"expected point of dimension {width}, got {z.shape}")
        return z[None, :], True
    if z.ndim != 2 or z.shape[1] != width:
        raise ValueError(f"expected batch of shape (n, {width}), got {z.shape}")
    return z, False
