"""Sorting-quality and pipeline metrics: VAD, PSNR, benchmark harness."""

import csv
import io
import math
import time
from dataclasses import dataclass

import numpy as np

BENCH_CSV_FIELDS = ("side", "channels", "seed", "time_s", "reorders", "vad_initial", "vad_final")


@dataclass(frozen=True)
class SortReport:
    initial_vad: float
    final_vad: float
    reorders: int
    wall_time_s: float
    # One (radius, distances) entry per radius level; distances[0] is the
    # mean L2 to the freshly built target, followed by one value per pass.
    radius_trace: tuple


def vad(grid):
    """Variance of the absolute differences between 4-neighbors, all channels.

    Population variance over the pooled multiset of |g[p,c] - g[q,c]| for
    every horizontally or vertically adjacent cell pair (p, q), counted once.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 2:
        grid = grid[..., None]
    if grid.ndim != 3 or grid.shape[0] < 2 or grid.shape[1] < 2:
        raise ValueError("vad needs an (H, W[, C]) grid with H, W >= 2")
    diffs = np.concatenate([
        np.abs(np.diff(grid, axis=0)).reshape(-1),
        np.abs(np.diff(grid, axis=1)).reshape(-1),
    ])
    return float(diffs.var())


def attribute_psnr(a, b, peak):
    """PSNR in dB between two planes; math.inf for identical planes."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("plane shapes must match")
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def bench_sort(sides, channels=3, seeds=(0,), config=None, threads=1):
    """Time the sorter on shuffled uniform grids; one result row per (side, seed)."""
    from . import plas

    rows = []
    for side in sides:
        if side < 2:
            raise ValueError("bench sides must be >= 2")
        for seed in seeds:
            rng = np.random.default_rng(seed)
            data = rng.uniform(0.0, 255.0, (side * side, channels))
            cfg = config or plas.SortConfig()
            cfg = plas.SortConfig(
                improvement_threshold=cfg.improvement_threshold,
                radius_decay=cfg.radius_decay,
                min_block_size=cfg.min_block_size,
                rng_seed=seed,
                weights=cfg.weights,
            )
            started = time.perf_counter()
            perm, report = plas.sort_grid_report(data / 255.0, cfg, threads=threads)
            elapsed = time.perf_counter() - started
            sorted_grid = data[perm].reshape(side, side, channels)
            rows.append({
                "side": side,
                "channels": channels,
                "seed": seed,
                "time_s": round(elapsed, 4),
                "reorders": report.reorders,
                "vad_initial": round(vad(data.reshape(side, side, channels)), 4),
                "vad_final": round(vad(sorted_grid), 4),
            })
    return rows


def bench_rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
