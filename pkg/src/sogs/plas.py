"""Parallel block-wise grid sorting toward a low-pass-filtered target.

The grid is initialized with a random permutation and repeatedly improved:
blur the grid to build a target, split it into shifted blocks, and inside
every block re-assign randomly grouped quadruples of cells to the
arrangement closest to the target. The blur radius decays geometrically
until it would fall below one.

Randomness comes from a counter-based Philox generator with a fixed draw
order: (1) the initial permutation, then per pass (2) the block offsets
``dy`` and ``dx`` and (3) the master grouping permutation of size beta**2.
This makes results bit-identical for a given seed, independent of the
number of worker threads (block writes never overlap within a pass).
"""

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .blur import renormalized_blur
from .metrics import SortReport, vad
from .splats import DEFAULT_SORT_WEIGHTS

# All permutations of k elements, lexicographic; ties in cost resolve to
# the earliest entry, so the identity arrangement wins exact ties.
PERMUTATIONS = {
    k: np.array(list(itertools.permutations(range(k))), dtype=np.int64)
    for k in (1, 2, 3, 4)
}


@dataclass(frozen=True)
class SortConfig:
    improvement_threshold: float = 1e-4
    radius_decay: float = 0.95
    min_block_size: int = 16
    rng_seed: int = 0
    weights: dict = field(default_factory=lambda: dict(DEFAULT_SORT_WEIGHTS))

    def __post_init__(self):
        if not (0.0 < self.radius_decay < 1.0):
            raise ValueError("radius_decay must be in (0, 1)")
        if self.improvement_threshold <= 0.0:
            raise ValueError("improvement_threshold must be positive")
        if self.min_block_size < 2:
            raise ValueError("min_block_size must be >= 2")


def initial_radius(side):
    # side/2 - 1 freezes tiny grids (the distance-1 blur weight is too
    # small to ever unseat a cell), so the start radius is floored at 2.
    return max(side / 2.0 - 1.0, 2.0)


def block_size(side, radius, min_block_size=16):
    return min(max(min_block_size, int(radius) + 1), side)


def blur_target(grid, radius):
    """Low-pass-filtered copy of the grid: sigma = radius/2, half-width ceil(radius)."""
    if radius <= 0:
        raise ValueError("blur radius must be positive")
    return renormalized_blur(grid, radius / 2.0, int(math.ceil(radius)))


def grid_distance(grid, target, weights=None):
    """Mean Euclidean distance between grid and target cells.

    Accepts (n, D) matrices or (H, W, D) grids; the last axis is the
    feature dimension. ``weights`` optionally scales each feature channel.
    """
    grid = np.asarray(grid, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if grid.shape != target.shape:
        raise ValueError("grid and target shapes must match")
    diff = (grid - target).reshape(-1, grid.shape[-1])
    if weights is not None:
        diff = diff * np.asarray(weights, dtype=np.float64)
    return float(np.sqrt((diff ** 2).sum(axis=1)).mean())


def _segments(side, beta, delta):
    bounds = [0]
    x = delta if delta > 0 else beta
    while x < side:
        bounds.append(x)
        x += beta
    bounds.append(side)
    return list(zip(bounds[:-1], bounds[1:]))


def partition_blocks(side, radius, dy, dx, min_block_size=16):
    """Tile the grid into blocks of (at most) beta = max(min_block, floor(radius)+1).

    Blocks are shifted by (dy, dx); border blocks may be smaller. Every cell
    lands in exactly one block. Returns (y0, y1, x0, x1) index ranges.
    """
    beta = block_size(side, radius, min_block_size)
    if not (0 <= dy < beta and 0 <= dx < beta):
        raise ValueError("offsets must satisfy 0 <= delta < block size")
    return [
        (y0, y1, x0, x1)
        for y0, y1 in _segments(side, beta, dy)
        for x0, x1 in _segments(side, beta, dx)
    ]


@njit(cache=True, nogil=True)
def _assign_groups(feat, point_idx, target, groups, perms):
    """Re-assign each group of cells to its cost-minimizing arrangement.

    ``groups`` is (G, k) flat cell indices; ``perms`` enumerates all k!
    arrangements. Cost is the sum of Euclidean feature-to-target distances.
    Groups touch disjoint cells, so the loop is safe to run concurrently
    over row ranges of ``groups``.
    """
    G, k = groups.shape
    D = feat.shape[1]
    nperm = perms.shape[0]
    cost = np.empty((k, k), np.float32)
    held_feat = np.empty((k, D), np.float32)
    held_idx = np.empty(k, np.int64)
    for g in range(G):
        for i in range(k):
            pi = groups[g, i]
            for j in range(k):
                pj = groups[g, j]
                s = 0.0
                for d in range(D):
                    delta = feat[pi, d] - target[pj, d]
                    s += delta * delta
                cost[i, j] = math.sqrt(s)
        best = 0
        best_cost = np.inf
        for p in range(nperm):
            c = 0.0
            for i in range(k):
                c += cost[i, perms[p, i]]
            if c < best_cost:
                best_cost = c
                best = p
        for i in range(k):
            pi = groups[g, i]
            for d in range(D):
                held_feat[i, d] = feat[pi, d]
            held_idx[i] = point_idx[pi]
        for i in range(k):
            pj = groups[g, perms[best, i]]
            for d in range(D):
                feat[pj, d] = held_feat[i, d]
            point_idx[pj] = held_idx[i]


def _run_groups(feat, point_idx, target, groups, perms, executor, threads):
    if executor is None or threads <= 1 or groups.shape[0] < 4 * threads:
        _assign_groups(feat, point_idx, target, groups, perms)
        return
    chunks = np.array_split(np.arange(groups.shape[0]), threads)
    futures = [
        executor.submit(_assign_groups, feat, point_idx, target,
                        np.ascontiguousarray(groups[c]), perms)
        for c in chunks if len(c)
    ]
    for f in futures:
        f.result()


def reassign_block(feat, point_idx, target, positions, grouping):
    """Re-assign one block's cells in place.

    ``positions`` are the block's flat cell indices (row-major within the
    block); ``grouping`` is a permutation of at least len(positions) local
    indices (entries >= len(positions) are skipped). Cells are grouped in
    fours; a leftover group of fewer cells is permuted exhaustively over
    its own arrangements.
    """
    m = len(positions)
    grouping = np.asarray(grouping, dtype=np.int64)
    local = grouping[grouping < m]
    ordered = np.asarray(positions, dtype=np.int64)[local]
    g4 = (m // 4) * 4
    if g4:
        _assign_groups(feat, point_idx, target,
                       np.ascontiguousarray(ordered[:g4].reshape(-1, 4)), PERMUTATIONS[4])
    rest = m - g4
    if rest >= 2:
        _assign_groups(feat, point_idx, target,
                       np.ascontiguousarray(ordered[g4:].reshape(1, rest)), PERMUTATIONS[rest])


def _reassign_pass(feat, point_idx, target, cell_grid, beta, dy, dx, master_perm,
                   executor, threads):
    side = cell_grid.shape[0]
    classes = {}
    for y0, y1 in _segments(side, beta, dy):
        for x0, x1 in _segments(side, beta, dx):
            classes.setdefault((y1 - y0, x1 - x0), []).append(
                cell_grid[y0:y1, x0:x1].reshape(-1))
    quads = []
    leftovers = {2: [], 3: []}
    for (h, w), blocks in sorted(classes.items()):
        m = h * w
        stacked = np.stack(blocks)
        stacked = stacked[:, master_perm[master_perm < m]]
        g4 = (m // 4) * 4
        if g4:
            quads.append(stacked[:, :g4].reshape(-1, 4))
        if m - g4 >= 2:
            leftovers[m - g4].append(stacked[:, g4:])
    if quads:
        _run_groups(feat, point_idx, target,
                    np.ascontiguousarray(np.concatenate(quads)), PERMUTATIONS[4],
                    executor, threads)
    for rest, blocks in leftovers.items():
        if blocks:
            _run_groups(feat, point_idx, target,
                        np.ascontiguousarray(np.concatenate(blocks)), PERMUTATIONS[rest],
                        executor, threads)


def _sort(features, config, threads):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a (side**2, D) matrix")
    n = features.shape[0]
    side = math.isqrt(n)
    if side * side != n:
        raise ValueError("feature count must be a perfect square")
    if side < 2:
        raise ValueError("grid side must be at least 2")
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")

    started = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(config.rng_seed))
    point_idx = rng.permutation(n)
    feat = np.ascontiguousarray(features[point_idx], dtype=np.float32)
    cell_grid = np.arange(n, dtype=np.int64).reshape(side, side)

    initial_vad = vad(feat.reshape(side, side, -1)) if side >= 2 else 0.0
    radius = initial_radius(side)
    reorders = 0
    traces = []
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while radius >= 1.0:
            target = np.ascontiguousarray(
                blur_target(feat.reshape(side, side, -1), radius).reshape(n, -1),
                dtype=np.float32)
            beta = block_size(side, radius, config.min_block_size)
            previous = grid_distance(feat, target)
            trace = [previous]
            strikes = 0
            while strikes < 2:
                dy = int(rng.integers(0, beta))
                dx = int(rng.integers(0, beta))
                master_perm = rng.permutation(beta * beta)
                _reassign_pass(feat, point_idx, target, cell_grid, beta, dy, dx,
                               master_perm, executor, threads)
                reorders += 1
                current = grid_distance(feat, target)
                trace.append(current)
                if previous <= 0.0 or (previous - current) / previous < config.improvement_threshold:
                    strikes += 1
                else:
                    strikes = 0
                previous = current
            traces.append((radius, tuple(trace)))
            radius *= config.radius_decay
    finally:
        if executor is not None:
            executor.shutdown()

    report = SortReport(
        initial_vad=initial_vad,
        final_vad=vad(feat.reshape(side, side, -1)),
        reorders=reorders,
        wall_time_s=time.perf_counter() - started,
        radius_trace=tuple(traces),
    )
    return point_idx, report


def sort_grid(features, config=None, threads=1):
    """Sort features into a locality-preserving square grid.

    Returns the permutation ``perm`` such that ``features[perm]`` reshaped
    row-major is the sorted grid.
    """
    perm, _ = _sort(features, config or SortConfig(), threads)
    return perm


def sort_grid_report(features, config=None, threads=1):
    """Like sort_grid, but also returns a SortReport with quality statistics."""
    return _sort(features, config or SortConfig(), threads)
