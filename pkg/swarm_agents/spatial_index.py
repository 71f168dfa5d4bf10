"""
Spatial Index - Uniform-grid domain decomposition for neighbor queries
=====================================================================

Agents are registered in square cells of side >= the interaction cutoff, so
a neighbor query only inspects the 3x3 block of cells around each agent.
`brute_force_pairs` is the exhaustive oracle and `bench_scaling` measures
both methods at constant density.
"""

from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import GridError
from .models import BenchRow
from .settings import get_logger

logger = get_logger("spatial_index")

Cell = Tuple[int, int]
PairList = List[Tuple[int, int]]

_NEIGHBOR_OFFSETS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]


@dataclass
class UniformGrid:
    cell_size: float
    cells: Dict[Cell, List[int]]
    bounds: Tuple[float, float, float, float]
    positions: np.ndarray

    def cell_of(self, point) -> Cell:
        return (int(math.floor(point[0] / self.cell_size)), int(math.floor(point[1] / self.cell_size)))

    def occupancy(self) -> Dict[Cell, int]:
        return {cell: len(members) for cell, members in self.cells.items()}


def build(positions, cell_size: float, radii: Optional[Sequence[float]] = None) -> UniformGrid:
    """Register every agent in exactly one cell."""
    if cell_size <= 0:
        raise GridError(f"cell_size must be positive, got {cell_size}")
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if radii is not None and len(radii) and cell_size < 2.0 * float(np.max(radii)) - 1e-12:
        raise GridError(f"cell_size {cell_size} smaller than the largest agent diameter")

    keys = np.floor(positions / cell_size).astype(np.int64)
    cells: Dict[Cell, List[int]] = defaultdict(list)
    for idx, (cx, cy) in enumerate(keys.tolist()):
        cells[(cx, cy)].append(idx)

    if len(positions):
        low = positions.min(axis=0)
        high = positions.max(axis=0)
        bounds = (float(low[0]), float(low[1]), float(high[0]), float(high[1]))
    else:
        bounds = (0.0, 0.0, 0.0, 0.0)
    return UniformGrid(cell_size=cell_size, cells=dict(cells), bounds=bounds, positions=positions)


def near_pairs(grid: UniformGrid, cutoff: float) -> PairList:
    """Sorted pairs (i < j) whose center distance is at most cutoff."""
    if cutoff > grid.cell_size:
        raise GridError(f"cutoff {cutoff} exceeds cell size {grid.cell_size}")

    positions = grid.positions
    cutoff_sq = cutoff * cutoff
    found: List[np.ndarray] = []
    for (cx, cy), members in grid.cells.items():
        own = np.asarray(members)
        neighbors = [
            grid.cells[(cx + dx, cy + dy)]
            for dx, dy in _NEIGHBOR_OFFSETS
            if (cx + dx, cy + dy) in grid.cells
        ]
        others = np.concatenate([np.asarray(n) for n in neighbors])
        diff = positions[own][:, None, :] - positions[others][None, :, :]
        dist_sq = np.einsum("ijk,ijk->ij", diff, diff)
        ii, jj = np.nonzero((dist_sq <= cutoff_sq) & (own[:, None] < others[None, :]))
        if ii.size:
            found.append(np.stack([own[ii], others[jj]], axis=1))

    if not found:
        return []
    pairs = np.concatenate(found)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return [(int(i), int(j)) for i, j in pairs[order]]


def brute_force_pairs(positions, cutoff: float, block: int = 256) -> PairList:
    """Exhaustive O(N^2) pair test, blocked to bound memory."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = positions.shape[0]
    cutoff_sq = cutoff * cutoff
    found: List[np.ndarray] = []
    for start in range(0, n, block):
        rows = positions[start:start + block]
        diff = rows[:, None, :] - positions[None, :, :]
        dist_sq = np.einsum("ijk,ijk->ij", diff, diff)
        row_idx = np.arange(start, start + rows.shape[0])
        ii, jj = np.nonzero((dist_sq <= cutoff_sq) & (row_idx[:, None] < np.arange(n)[None, :]))
        if ii.size:
            found.append(np.stack([row_idx[ii], jj], axis=1))
    if not found:
        return []
    pairs = np.concatenate(found)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return [(int(i), int(j)) for i, j in pairs[order]]


def loglog_slope(sizes: Iterable[int], times: Iterable[float]) -> float:
    """Least-squares slope of log(time) against log(N)."""
    x = np.log(np.asarray(list(sizes), dtype=float))
    y = np.log(np.asarray(list(times), dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def _median_ns(fn, repetitions: int) -> int:
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return int(np.median(samples))


def bench_scaling(
    sizes: Sequence[int],
    repetitions: int = 3,
    density: float = 0.5,
    radius: float = 0.5,
    seed: int = 0,
) -> List[BenchRow]:
    """
    Median wall time of grid and naive pair search per N.

    The arena side grows as sqrt(N / density) so the number of neighbors per
    agent stays constant.
    """
    if list(sizes) != sorted(sizes):
        raise GridError("sizes must be ascending")
    rng = np.random.default_rng(seed)
    cutoff = 2.0 * radius
    rows: List[BenchRow] = []
    for n in sizes:
        side = math.sqrt(n / density)
        positions = rng.uniform(radius, side - radius, size=(n, 2))
        grid_ns = _median_ns(lambda: near_pairs(build(positions, cutoff), cutoff), repetitions)
        naive_ns = _median_ns(lambda: brute_force_pairs(positions, cutoff), repetitions)
        logger.info(f"N={n}: grid {grid_ns / 1e6:.1f} ms, naive {naive_ns / 1e6:.1f} ms")
        rows.append(BenchRow(n=n, method="grid", median_ns=grid_ns))
        rows.append(BenchRow(n=n, method="naive", median_ns=naive_ns))
    return rows


def slopes(rows: Sequence[BenchRow]) -> Dict[str, float]:
    by_method: Dict[str, List[BenchRow]] = defaultdict(list)
    for row in rows:
        by_method[row.method].append(row)
    return {
        method: loglog_slope([r.n for r in method_rows], [r.median_ns for r in method_rows])
        for method, method_rows in by_method.items()
        if len(method_rows) >= 2
    }
