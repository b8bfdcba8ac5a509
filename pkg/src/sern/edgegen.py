"""Edge sampling: naive, geometric-jumping and bucket-walk algorithms.

All three produce the same distribution: conditioned on the node set,
every pair (i, j) is linked independently with probability p(d_ij).

The naive path draws one uniform per pair.  The jumping paths enumerate
Bernoulli hits with geometric skips and thin each hit by an acceptance
test, so work is proportional to hits, not pairs.  The bucket walk does
this per bucket pair with the skip probability taken from the Q table
at the pair's offset, then maps flat pair indices back to node ids with
the two decoders below.

Kernels write accepted edges into caller-owned buffers and return when
the buffer fills, carrying a resume cursor (task index, position) so a
walk continues exactly where it stopped.  The engine module drives the
same kernels concurrently; entry points here are single-threaded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import ParameterError, ResourceError
from .geometry import BucketGrid
from .model import Deterrence, Metric, QTable, dist_eval, link_prob_eval
from .nodegen import NodeStore
from .rng import RngState, fill_uniform, geometric_skip, next_uniform

DEFAULT_BUFFER = 16384
NAIVE_MAX_NODES = 100_000
# same-bucket decoding needs 8k+1 to fit in an int64
MAX_BUCKET_COUNT = 1 << 30


@dataclass
class EdgeStore:
    """Undirected edge list with from < to; 8 bytes/edge, 12 with distances."""

    from_ids: np.ndarray            # uint32
    to_ids: np.ndarray              # uint32
    dist: Optional[np.ndarray] = None   # float32, aligned with from/to

    @property
    def e(self) -> int:
        return int(self.from_ids.shape[0])

    @property
    def payload_bytes(self) -> int:
        total = self.from_ids.nbytes + self.to_ids.nbytes
        if self.dist is not None:
            total += self.dist.nbytes
        return total


def empty_edges(want_distances: bool = False) -> EdgeStore:
    return EdgeStore(
        from_ids=np.empty(0, dtype=np.uint32),
        to_ids=np.empty(0, dtype=np.uint32),
        dist=np.empty(0, dtype=np.float32) if want_distances else None,
    )


# ---------------------------------------------------------------------------
# pair decoders

def decode_pair_cross(k: int, c1: int) -> tuple[int, int]:
    """Flat index over the c1 x c2 pair grid -> (local i, local j)."""
    if c1 <= 0:
        raise ParameterError("decode_pair_cross needs a positive bucket count")
    return (int(k) % int(c1), int(k) // int(c1))


def decode_pair_same(k: int, c: int | None = None) -> tuple[int, int]:
    """Flat index over the triangle {(i,j): i < j} -> (i, j).

    Exact integer arithmetic; the optional c only validates the range.
    """
    k = int(k)
    if k < 0 or (c is not None and k >= c * (c - 1) // 2):
        raise ParameterError(f"pair index {k} out of range")
    j = 1 + (math.isqrt(8 * k + 1) - 1) // 2
    i = k - j * (j - 1) // 2
    return (i, j)


@njit(cache=True, nogil=True)
def _isqrt64(v):
    """Floor square root of a nonnegative int64, exact via adjustment."""
    t = np.int64(math.sqrt(np.float64(v)))
    while t > 0 and t * t > v:
        t -= 1
    while (t + 1) * (t + 1) <= v:
        t += 1
    return t


@njit(cache=True, nogil=True)
def _decode_same_i(k):
    j = 1 + (_isqrt64(8 * k + 1) - 1) // 2
    return k - j * (j - 1) // 2, j


# ---------------------------------------------------------------------------
# walk kernel over bucket-pair tasks
#
# Tasks enumerate pairs (a, b), a <= b, of the nonempty-bucket list nzb,
# row-major in a then b.  Task t decodes through the strict-pair
# decoder over K+1. A resume cursor [task, position] lets the walk
# stop at a full buffer and continue seamlessly.

@njit(cache=True, nogil=True)
def _task_pair(t):
    i, j = _decode_same_i(t)
    return i, j - 1


@njit(cache=True, nogil=True)
def walk_tasks(state, counts, offsets, nzb, qvals, my,
               t_end, stride, resume,
               xs, ys, mcode, kcode, mq, ms, mr, mt1, mt2, mL,
               want_dist, buf_from, buf_to, buf_d, counters):
    """Walk tasks t_start, t_start+stride, ... below t_end.

    Returns the number of edges placed in the buffers.  resume[0] is
    the task index to continue from (>= t_end when everything in this
    worker's share is done) and resume[1] the position inside it.
    """
    cap = buf_from.shape[0]
    fill = 0
    t = resume[0]
    pos = resume[1]
    while t < t_end:
        a, b = _task_pair(t)
        b1 = nzb[a]
        b2 = nzb[b]
        i1 = b1 // my
        j1 = b1 - i1 * my
        i2 = b2 // my
        j2 = b2 - i2 * my
        di = i1 - i2
        if di < 0:
            di = -di
        dj = j1 - j2
        if dj < 0:
            dj = -dj
        q = qvals[di, dj]
        same = b1 == b2
        c1 = counts[b1]
        if same:
            npairs = c1 * (c1 - 1) // 2
        else:
            npairs = c1 * counts[b2]
        if q <= 0.0 or npairs <= 0:
            t += stride
            pos = -1
            continue
        log1m = -np.inf if q >= 1.0 else math.log1p(-q)
        off1 = offsets[b1]
        off2 = offsets[b2]
        if same:
            while True:
                k = geometric_skip(state, log1m)
                rem = npairs - pos - 1
                if k >= rem:
                    break
                pos += k + 1
                counters[0] += 1
                li, lj = _decode_same_i(pos)
                gi = off1 + li
                gj = off1 + lj
                x1 = np.float64(xs[gi])
                y1 = np.float64(ys[gi])
                d = dist_eval(mcode, x1, y1, np.float64(xs[gj]), np.float64(ys[gj]))
                p = link_prob_eval(kcode, mq, ms, mr, mt1, mt2, mL, d)
                u = next_uniform(state)
                if u * q <= p:
                    counters[1] += 1
                    buf_from[fill] = np.uint32(gi)
                    buf_to[fill] = np.uint32(gj)
                    if want_dist:
                        buf_d[fill] = np.float32(d)
                    fill += 1
                    if fill == cap:
                        resume[0] = t
                        resume[1] = pos
                        return fill
        else:
            while True:
                k = geometric_skip(state, log1m)
                rem = npairs - pos - 1
                if k >= rem:
                    break
                pos += k + 1
                counters[0] += 1
                li = pos % c1
                lj = pos // c1
                gi = off1 + li
                gj = off2 + lj
                x1 = np.float64(xs[gi])
                y1 = np.float64(ys[gi])
                d = dist_eval(mcode, x1, y1, np.float64(xs[gj]), np.float64(ys[gj]))
                p = link_prob_eval(kcode, mq, ms, mr, mt1, mt2, mL, d)
                u = next_uniform(state)
                if u * q <= p:
                    counters[1] += 1
                    if gi < gj:
                        buf_from[fill] = np.uint32(gi)
                        buf_to[fill] = np.uint32(gj)
                    else:
                        buf_from[fill] = np.uint32(gj)
                        buf_to[fill] = np.uint32(gi)
                    if want_dist:
                        buf_d[fill] = np.float32(d)
                    fill += 1
                    if fill == cap:
                        resume[0] = t
                        resume[1] = pos
                        return fill
        t += stride
        pos = -1
    resume[0] = t_end
    resume[1] = -1
    return fill


@njit(cache=True, nogil=True)
def walk_naive(state, xs, ys, mcode, kcode, mq, ms, mr, mt1, mt2, mL,
               resume, want_dist, buf_from, buf_to, buf_d, counters):
    """One uniform per pair (i, j), i < j, in nested-loop order."""
    n = xs.shape[0]
    cap = buf_from.shape[0]
    fill = 0
    i = resume[0]
    j = resume[1]
    while i < n - 1:
        if j >= n:
            i += 1
            j = i + 1
            continue
        u = next_uniform(state)
        counters[0] += 1
        x1 = np.float64(xs[i])
        y1 = np.float64(ys[i])
        d = dist_eval(mcode, x1, y1, np.float64(xs[j]), np.float64(ys[j]))
        p = link_prob_eval(kcode, mq, ms, mr, mt1, mt2, mL, d)
        if u <= p:
            counters[1] += 1
            buf_from[fill] = np.uint32(i)
            buf_to[fill] = np.uint32(j)
            if want_dist:
                buf_d[fill] = np.float32(d)
            fill += 1
            if fill == cap:
                resume[0] = i
                resume[1] = j + 1
                return fill
        j += 1
    resume[0] = n
    resume[1] = 0
    return fill


@njit(cache=True, nogil=True)
def collect_hits(state, npairs, log1m, start_pos, out_pos):
    """Geometric hit positions only (for models evaluated in Python).

    Returns (count, last position); last position is npairs when the
    walk is finished.
    """
    cap = out_pos.shape[0]
    fill = 0
    pos = start_pos
    while True:
        k = geometric_skip(state, log1m)
        rem = npairs - pos - 1
        if k >= rem:
            return fill, npairs
        pos += k + 1
        out_pos[fill] = pos
        fill += 1
        if fill == cap:
            return fill, pos


# ---------------------------------------------------------------------------
# helpers shared by the sequential entry points and the engine

def nonempty_buckets(counts: np.ndarray) -> np.ndarray:
    return np.flatnonzero(counts > 0).astype(np.int64)


def task_count(counts: np.ndarray) -> int:
    k = int((counts > 0).sum())
    return k * (k + 1) // 2


def check_bucket_limits(counts: np.ndarray):
    cmax = int(counts.max()) if counts.size else 0
    if cmax > MAX_BUCKET_COUNT:
        raise ResourceError(
            f"a bucket holds {cmax} nodes (> 2^30); increase the grid size")


def expected_hits(counts: np.ndarray, qtable: QTable, my: int) -> float:
    """Sum of N_ab * Q_ab over bucket pairs (the walk's expected hits)."""
    nzb = nonempty_buckets(counts)
    c = counts[nzb].astype(np.float64)
    i = nzb // my
    j = nzb % my
    qv = qtable.values
    total = 0.0
    for a in range(nzb.size):
        qrow = qv[np.abs(i[a] - i[a:]), np.abs(j[a] - j[a:])]
        npair = c[a] * c[a:]
        npair[0] = c[a] * (c[a] - 1) / 2.0
        total += float(npair @ qrow)
    return total


class ListCollector:
    """Accumulates flushed buffer slices; concatenates at the end."""

    def __init__(self, want_distances: bool):
        self.want = want_distances
        self._from: list[np.ndarray] = []
        self._to: list[np.ndarray] = []
        self._d: list[np.ndarray] = []

    def emit(self, bf, bt, bd, fill):
        self._from.append(bf[:fill].copy())
        self._to.append(bt[:fill].copy())
        if self.want:
            self._d.append(bd[:fill].copy())

    def emit_arrays(self, fr, to, d):
        self._from.append(np.ascontiguousarray(fr, dtype=np.uint32))
        self._to.append(np.ascontiguousarray(to, dtype=np.uint32))
        if self.want:
            self._d.append(np.ascontiguousarray(d, dtype=np.float32))

    def build(self) -> EdgeStore:
        if not self._from:
            return empty_edges(self.want)
        return EdgeStore(
            from_ids=np.concatenate(self._from),
            to_ids=np.concatenate(self._to),
            dist=np.concatenate(self._d) if self.want else None,
        )


def _metric_code(metric) -> int | None:
    """Code for a built-in metric, None for a custom callable."""
    if isinstance(metric, Metric):
        return metric.code
    if callable(metric):
        return None
    raise ParameterError(f"metric must be a Metric or callable, got {metric!r}")


def _coords64(nodes: NodeStore, ids: np.ndarray):
    return (nodes.x[ids].astype(np.float64), nodes.y[ids].astype(np.float64))


def _eval_pairs(nodes, metric, model, gi, gj):
    """(distances, probabilities) for id pairs, metric/model in Python."""
    x1, y1 = _coords64(nodes, gi)
    x2, y2 = _coords64(nodes, gj)
    mcode = _metric_code(metric)
    if mcode is None:
        d = np.asarray(metric(x1, y1, x2, y2), dtype=np.float64)
    else:
        if mcode == Metric.L2.code:
            d = np.hypot(x1 - x2, y1 - y2)
        elif mcode == Metric.L1.code:
            d = np.abs(x1 - x2) + np.abs(y1 - y2)
        elif mcode == Metric.L0.code:
            d = (x1 != x2).astype(np.float64) + (y1 != y2).astype(np.float64)
        else:
            d = np.maximum(np.abs(x1 - x2), np.abs(y1 - y2))
    p = np.clip(np.asarray(model.p(d), dtype=np.float64), 0.0, 1.0)
    return d, p


def _decode_same_np(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.floor(np.sqrt(8.0 * k + 1.0)).astype(np.int64)
    v = 8 * k + 1
    while True:
        over = t * t > v
        if not over.any():
            break
        t[over] -= 1
    while True:
        under = (t + 1) * (t + 1) <= v
        if not under.any():
            break
        t[under] += 1
    j = 1 + (t - 1) // 2
    i = k - j * (j - 1) // 2
    return i, j


# ---------------------------------------------------------------------------
# sequential entry points

def _builtin_ok(model: Deterrence, metric) -> bool:
    return model.kind != "custom" and isinstance(metric, Metric)


def _require_monotone(model: Deterrence, algo: str):
    if not model.is_monotone:
        raise ParameterError(
            f"the {model.kind} model is not non-increasing on [0, L]; "
            f"{algo} needs a sound upper bound, use the naive algorithm")


def _drive_builtin(kernel_call, collector: ListCollector, bf, bt, bd, resume, t_end):
    while True:
        fill = kernel_call()
        if fill:
            collector.emit(bf, bt, bd, fill)
        if resume[0] >= t_end:
            break


def generate_edges_naive(nodes: NodeStore, model: Deterrence, rng: RngState,
                         metric=Metric.L2, want_distances: bool = False,
                         allow_large: bool = False,
                         buffer_edges: int = DEFAULT_BUFFER,
                         counters: Optional[dict] = None) -> EdgeStore:
    """Reference O(n^2) sampler: one Bernoulli draw per pair."""
    n = nodes.n
    if n > NAIVE_MAX_NODES and not allow_large:
        raise ParameterError(
            f"naive algorithm refuses n={n} > {NAIVE_MAX_NODES}; "
            "pass allow_large to override")
    cnt = np.zeros(2, dtype=np.int64)
    collector = ListCollector(want_distances)
    if n >= 2:
        if _builtin_ok(model, metric):
            bf = np.empty(buffer_edges, dtype=np.uint32)
            bt = np.empty(buffer_edges, dtype=np.uint32)
            bd = np.empty(buffer_edges if want_distances else 0, dtype=np.float32)
            resume = np.array([0, 1], dtype=np.int64)
            kcode, mq, ms, mr, mt1, mt2, mL = model.kernel_params()
            mcode = metric.code
            _drive_builtin(
                lambda: walk_naive(rng.state, nodes.x, nodes.y, mcode, kcode,
                                   mq, ms, mr, mt1, mt2, mL, resume,
                                   want_distances, bf, bt, bd, cnt),
                collector, bf, bt, bd, resume, n)
        else:
            _naive_custom(nodes, model, metric, rng, want_distances,
                          buffer_edges, collector, cnt)
    if counters is not None:
        counters["hits"] = int(cnt[0])
        counters["edges"] = int(cnt[1])
    return collector.build()


def _naive_custom(nodes, model, metric, rng, want_distances, chunk, collector, cnt):
    n = nodes.n
    total = n * (n - 1) // 2
    start = 0
    while start < total:
        k = np.arange(start, min(start + chunk, total), dtype=np.int64)
        li, lj = _decode_same_np(k)
        d, p = _eval_pairs(nodes, metric, model, li, lj)
        u = rng.uniforms(k.size)
        acc = u <= p
        cnt[0] += k.size
        cnt[1] += int(acc.sum())
        if acc.any():
            collector.emit_arrays(li[acc], lj[acc],
                                  d[acc].astype(np.float32) if want_distances else None)
        start += chunk


def _qjump_synthetic(nodes: NodeStore):
    """Single synthetic bucket covering all nodes (the global triangle)."""
    counts = np.array([nodes.n], dtype=np.int64)
    offsets = np.array([0], dtype=np.int64)
    nzb = np.array([0], dtype=np.int64)
    return counts, offsets, nzb


def generate_edges_qjump(nodes: NodeStore, model: Deterrence, rng: RngState,
                         metric=Metric.L2, want_distances: bool = False,
                         buffer_edges: int = DEFAULT_BUFFER,
                         counters: Optional[dict] = None) -> EdgeStore:
    """Geometric skips over the global pair space at p_max = p(0)."""
    n = nodes.n
    _require_monotone(model, "qjump")
    if n > MAX_BUCKET_COUNT:
        raise ResourceError(
            f"qjump is limited to n <= 2^30 (pair space indexing), got {n}")
    p_max = float(model.p(0.0))
    cnt = np.zeros(2, dtype=np.int64)
    collector = ListCollector(want_distances)
    if n >= 2 and p_max > 0.0:
        counts, offsets, nzb = _qjump_synthetic(nodes)
        qvals = np.array([[p_max]], dtype=np.float64)
        if _builtin_ok(model, metric):
            bf = np.empty(buffer_edges, dtype=np.uint32)
            bt = np.empty(buffer_edges, dtype=np.uint32)
            bd = np.empty(buffer_edges if want_distances else 0, dtype=np.float32)
            resume = np.array([0, -1], dtype=np.int64)
            kcode, mq, ms, mr, mt1, mt2, mL = model.kernel_params()
            mcode = metric.code
            _drive_builtin(
                lambda: walk_tasks(rng.state, counts, offsets, nzb, qvals, 1,
                                   1, 1, resume, nodes.x, nodes.y, mcode,
                                   kcode, mq, ms, mr, mt1, mt2, mL,
                                   want_distances, bf, bt, bd, cnt),
                collector, bf, bt, bd, resume, 1)
        else:
            _jump_custom_task(nodes, model, metric, rng, want_distances,
                              buffer_edges, collector, cnt,
                              npairs=n * (n - 1) // 2, q=p_max,
                              off1=0, c1=n, off2=0, same=True)
    if counters is not None:
        counters["hits"] = int(cnt[0])
        counters["edges"] = int(cnt[1])
    return collector.build()


def _jump_custom_task(nodes, model, metric, rng, want_distances, chunk,
                      collector, cnt, *, npairs, q, off1, c1, off2, same):
    """Hit positions from the kernel, evaluation in Python, batched."""
    log1m = -np.inf if q >= 1.0 else math.log1p(-q)
    out_pos = np.empty(chunk, dtype=np.int64)
    pos = -1
    while pos < npairs:
        fill, pos = collect_hits(rng.state, npairs, log1m, pos, out_pos)
        if fill == 0:
            break
        k = out_pos[:fill]
        if same:
            li, lj = _decode_same_np(k)
            gi = off1 + li
            gj = off1 + lj
        else:
            gi = off1 + k % c1
            gj = off2 + k // c1
        d, p = _eval_pairs(nodes, metric, model, gi, gj)
        u = rng.uniforms(fill)
        acc = u * q <= p
        cnt[0] += fill
        na = int(acc.sum())
        cnt[1] += na
        if na:
            fr = np.minimum(gi[acc], gj[acc])
            to = np.maximum(gi[acc], gj[acc])
            collector.emit_arrays(fr, to,
                                  d[acc].astype(np.float32) if want_distances else None)


def generate_edges_bucket(nodes: NodeStore, grid: BucketGrid, model: Deterrence,
                          qtable: QTable, rng: RngState, metric=Metric.L2,
                          want_distances: bool = False,
                          buffer_edges: int = DEFAULT_BUFFER,
                          counters: Optional[dict] = None) -> EdgeStore:
    """Bucket-pair walk; equivalent to qjump when the grid is one cell."""
    _require_monotone(model, "bucket")
    if not isinstance(metric, Metric):
        raise ParameterError(
            "the bucket algorithm needs a built-in metric; the inter-bucket "
            "distance bound is not available for custom callables")
    check_bucket_limits(nodes.counts)
    cnt = np.zeros(2, dtype=np.int64)
    collector = ListCollector(want_distances)
    nzb = nonempty_buckets(nodes.counts)
    kk = nzb.size
    t_end = kk * (kk + 1) // 2
    if nodes.n >= 2 and t_end:
        if model.kind != "custom":
            bf = np.empty(buffer_edges, dtype=np.uint32)
            bt = np.empty(buffer_edges, dtype=np.uint32)
            bd = np.empty(buffer_edges if want_distances else 0, dtype=np.float32)
            resume = np.array([0, -1], dtype=np.int64)
            kcode, mq, ms, mr, mt1, mt2, mL = model.kernel_params()
            mcode = metric.code
            _drive_builtin(
                lambda: walk_tasks(rng.state, nodes.counts, nodes.offsets, nzb,
                                   qtable.values, grid.my, t_end, 1, resume,
                                   nodes.x, nodes.y, mcode, kcode, mq, ms, mr,
                                   mt1, mt2, mL, want_distances, bf, bt, bd, cnt),
                collector, bf, bt, bd, resume, t_end)
        else:
            my = grid.my
            for t in range(t_end):
                a, b = decode_pair_same(t)  # (a, b) over pairs with a <= b
                b = b - 1
                b1 = int(nzb[a])
                b2 = int(nzb[b])
                di = abs(b1 // my - b2 // my)
                dj = abs(b1 % my - b2 % my)
                q = qtable.upper_bound(di, dj)
                c1 = int(nodes.counts[b1])
                same = b1 == b2
                npairs = c1 * (c1 - 1) // 2 if same else c1 * int(nodes.counts[b2])
                if q <= 0.0 or npairs <= 0:
                    continue
                _jump_custom_task(nodes, model, metric, rng, want_distances,
                                  buffer_edges, collector, cnt, npairs=npairs,
                                  q=q, off1=int(nodes.offsets[b1]), c1=c1,
                                  off2=int(nodes.offsets[b2]), same=same)
    if counters is not None:
        counters["hits"] = int(cnt[0])
        counters["edges"] = int(cnt[1])
    return collector.build()
