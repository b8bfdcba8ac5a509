"""Uniform node placement into bucket-contiguous storage.

Bucket counts come from one exact multinomial draw so the coordinate
arrays are allocated once; buckets then fill independently (and in
parallel) by rejection sampling inside their own cells.  Coordinates
are drawn in 64-bit, rounded to 32-bit for storage, and the containment
tests run on the rounded values, so every stored point satisfies the
cell and region invariants exactly as stored.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError
from .geometry import BucketGrid, Region, region_contains
from .rng import RngState, next_uniform

MAX_NODES = 1 << 32


@dataclass
class NodeStore:
    """Coordinates of all nodes, grouped by bucket.

    Node ids are implicit array indices; bucket b owns the index range
    [offsets[b], offsets[b] + counts[b]).  Exactly 8 bytes per node.
    """

    x: np.ndarray            # float32, length n
    y: np.ndarray            # float32, length n
    counts: np.ndarray       # int64, one per bucket
    offsets: np.ndarray      # int64, prefix sums of counts

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    def bucket_slice(self, b: int) -> slice:
        off = int(self.offsets[b])
        return slice(off, off + int(self.counts[b]))

    @property
    def payload_bytes(self) -> int:
        return self.x.nbytes + self.y.nbytes


def allocate_counts(grid: BucketGrid, n: int, rng: RngState) -> np.ndarray:
    """Exact Multinomial(n, cell areas / total area) bucket counts."""
    n = int(n)
    if n < 0:
        raise ParameterError(f"node count must be nonnegative, got {n}")
    if n == 0:
        return np.zeros(grid.n_buckets, dtype=np.int64)
    return rng.multinomial(n, grid.probs)


@njit(cache=True, nogil=True)
def _fill_range(state, rcode, rparams, poly_x, poly_y, ox, oy, cell, my,
                interior, counts, offsets, b_start, b_end, xs, ys):
    """Fill buckets [b_start, b_end); returns candidates drawn."""
    attempts = 0
    for b in range(b_start, b_end):
        cnt = counts[b]
        if cnt == 0:
            continue
        i = b // my
        j = b - i * my
        x0 = ox + i * cell
        y0 = oy + j * cell
        x1 = x0 + cell
        y1 = y0 + cell
        inner = interior[b]
        off = offsets[b]
        placed = 0
        while placed < cnt:
            attempts += 1
            cx = x0 + next_uniform(state) * cell
            cy = y0 + next_uniform(state) * cell
            xf = np.float32(cx)
            yf = np.float32(cy)
            fx = np.float64(xf)
            fy = np.float64(yf)
            if fx < x0 or fx > x1 or fy < y0 or fy > y1:
                continue  # 32-bit rounding escaped the cell; redraw
            if not inner and not region_contains(rcode, rparams, poly_x, poly_y, fx, fy):
                continue
            xs[off + placed] = xf
            ys[off + placed] = yf
            placed += 1
    return attempts


def _empty_store(n_buckets: int) -> NodeStore:
    return NodeStore(
        x=np.empty(0, dtype=np.float32),
        y=np.empty(0, dtype=np.float32),
        counts=np.zeros(n_buckets, dtype=np.int64),
        offsets=np.zeros(n_buckets, dtype=np.int64),
    )


def fill_bucket(region: Region, grid: BucketGrid, bucket: int, count: int,
                store: NodeStore, rng: RngState) -> int:
    """Fill one bucket's reserved range; returns candidates drawn."""
    rcode, rparams, px, py = region.kernel_args()
    return int(_fill_range(
        rng.state, rcode, rparams, px, py, grid.ox, grid.oy, grid.cell,
        grid.my, grid.interior.ravel(), store.counts, store.offsets,
        bucket, bucket + 1, store.x, store.y))


def _partition_buckets(counts: np.ndarray, workers: int) -> list[tuple[int, int]]:
    """Contiguous bucket ranges with roughly equal node totals."""
    nb = counts.shape[0]
    total = int(counts.sum())
    if workers <= 1 or total == 0:
        return [(0, nb)]
    ranges = []
    start = 0
    acc = 0
    done = 0
    for w in range(workers - 1):
        target = (total - done) / (workers - w)
        end = start
        acc = 0
        while end < nb - (workers - 1 - w) and acc < target:
            acc += int(counts[end])
            end += 1
        ranges.append((start, end))
        done += acc
        start = end
    ranges.append((start, nb))
    return ranges


def generate_nodes(region: Region, grid: BucketGrid, n: int, master_seed: int,
                   workers: int = 1) -> tuple[NodeStore, int]:
    """All node positions for one graph; returns (store, candidates).

    Counts are drawn from a dedicated stream, then each worker fills a
    contiguous bucket range with its own stream, so output slices are
    disjoint and the result is reproducible per (seed, workers).
    """
    n = int(n)
    if n >= MAX_NODES:
        raise ParameterError(f"node count {n} exceeds the 2^32 limit")
    if n == 0:
        return _empty_store(grid.n_buckets), 0

    counts = allocate_counts(grid, n, RngState.for_worker(master_seed, 0, 0))
    offsets = np.zeros_like(counts)
    np.cumsum(counts[:-1], out=offsets[1:])
    store = NodeStore(
        x=np.empty(n, dtype=np.float32),
        y=np.empty(n, dtype=np.float32),
        counts=counts,
        offsets=offsets,
    )

    rcode, rparams, px, py = region.kernel_args()
    interior = grid.interior.ravel()
    ranges = _partition_buckets(counts, int(workers))

    def run(w: int, b0: int, b1: int) -> int:
        state = RngState.for_worker(master_seed, 1, w).state
        return int(_fill_range(state, rcode, rparams, px, py, grid.ox, grid.oy,
                               grid.cell, grid.my, interior, counts, offsets,
                               b0, b1, store.x, store.y))

    if len(ranges) == 1:
        candidates = run(0, *ranges[0])
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            futures = [pool.submit(run, w, b0, b1)
                       for w, (b0, b1) in enumerate(ranges)]
            candidates = sum(f.result() for f in futures)
    return store, candidates
