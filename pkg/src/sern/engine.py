"""End-to-end orchestration: nodes, then edges, into contiguous stores.

Two phases.  Node placement allocates once from multinomial counts and
fills buckets (in parallel when workers > 1).  Edge generation walks
bucket-pair tasks; with several workers, tasks are assigned statically
round-robin (worker w takes tasks w, w+T, ...), each worker owns a
private RNG stream and flush buffer, and full buffers are committed to
a shared sink under a cursor lock.  Single-worker runs bypass all
synchronization, so output is byte-identical per seed.

Reproducibility contract: identical (seed, workers) gives identical
output; different worker counts give the same distribution but not the
same bits.
"""
from __future__ import annotations

import math
import threading
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import edgegen
from .edgegen import (DEFAULT_BUFFER, EdgeStore, ListCollector, collect_hits,
                      empty_edges, expected_hits, nonempty_buckets, task_count,
                      walk_naive, walk_tasks)
from .errors import ParameterError, ResourceError
from .geometry import BucketGrid, Region, cover_with_grid
from .model import (Deterrence, Metric, QTable, build_q_table, deterrence,
                    metric_diameter)
from .nodegen import MAX_NODES, NodeStore, generate_nodes
from .rng import RngState

DEFAULT_GRID = 20
ALGORITHMS = ("naive", "qjump", "bucket")

# purpose tags for stream derivation (see rng module docstring)
_PURPOSE_EDGES = 2
_PURPOSE_ESTIMATE = 3

_MEAN_P_SAMPLES = 20_000


@dataclass
class GenConfig:
    """Validated inputs for one generation run."""

    n: int
    model: Deterrence
    region: Region
    metric: Union[Metric, Callable] = Metric.L2
    m: int = DEFAULT_GRID
    algorithm: str = "bucket"
    workers: int = 1
    buffer_edges: int = DEFAULT_BUFFER
    seed: int = 0
    want_distances: bool = False
    store_edges: bool = True
    allow_large_naive: bool = False
    stats_bins: int = 64

    def __post_init__(self):
        self.n = int(self.n)
        if self.n < 0 or self.n >= MAX_NODES:
            raise ParameterError(f"n must be in [0, 2^32), got {self.n}")
        if not isinstance(self.model, Deterrence):
            raise ParameterError("model must be a Deterrence (see sern.deterrence)")
        if not isinstance(self.region, Region):
            raise ParameterError("region must be a Region instance")
        if not (isinstance(self.metric, Metric) or callable(self.metric)):
            raise ParameterError("metric must be a Metric or a callable")
        self.m = int(self.m)
        if self.m < 1:
            raise ParameterError(f"grid size must be >= 1, got {self.m}")
        self.workers = int(self.workers)
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")
        self.buffer_edges = int(self.buffer_edges)
        if self.buffer_edges < 1:
            raise ParameterError(f"buffer must be >= 1, got {self.buffer_edges}")
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(
                f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.algorithm == "bucket" and not isinstance(self.metric, Metric):
            raise ParameterError(
                "the bucket algorithm needs a built-in metric "
                "(no distance lower bound exists for custom callables)")
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        if int(self.stats_bins) < 1:
            raise ParameterError("stats_bins must be >= 1")
        self.stats_bins = int(self.stats_bins)


def build_config(*, n: int, region: Region, model_kind: str = "waxman",
                 q: float = 1.0, s: float = 0.0, r: float = 0.0,
                 theta1: float = 0.0, theta2: float = 0.0,
                 metric: Union[Metric, str] = Metric.L2,
                 func: Optional[Callable] = None, **kwargs) -> GenConfig:
    """GenConfig from plain parameters; derives L from region and metric."""
    if isinstance(metric, str):
        metric = Metric.parse(metric)
    bx0, by0, bx1, by1 = region.bbox()
    L = metric_diameter(metric, bx1 - bx0, by1 - by0) if isinstance(metric, Metric) else 1.0
    model = deterrence(model_kind, q=q, s=s, r=r, theta1=theta1, theta2=theta2,
                       L=L, func=func)
    return GenConfig(n=n, model=model, region=region, metric=metric, **kwargs)


@dataclass
class GenStats:
    """Instrumentation for one run."""

    n: int = 0
    e: int = 0
    algorithm: str = ""
    fallback: bool = False
    hits: int = 0
    rejects: int = 0
    candidates: int = 0
    draws: int = 0
    tasks_total: int = 0
    expected_hit_count: float = 0.0
    node_seconds: float = 0.0
    edge_seconds: float = 0.0
    total_seconds: float = 0.0
    payload_bytes: int = 0
    overhead_bytes: int = 0
    sink_slack_bytes: int = 0
    workers: int = 1
    seed: int = 0
    degrees: Optional[np.ndarray] = field(default=None, repr=False)
    length_hist: Optional[np.ndarray] = field(default=None, repr=False)
    length_hist_edges: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.e / self.n if self.n else 0.0

    def as_dict(self) -> dict:
        out = {
            "n": self.n, "e": self.e, "mean_degree": self.mean_degree,
            "algorithm": self.algorithm, "fallback": self.fallback,
            "hits": self.hits, "rejects": self.rejects,
            "candidates": self.candidates, "draws": self.draws,
            "tasks_total": self.tasks_total,
            "expected_hit_count": self.expected_hit_count,
            "node_seconds": self.node_seconds,
            "edge_seconds": self.edge_seconds,
            "total_seconds": self.total_seconds,
            "payload_bytes": self.payload_bytes,
            "overhead_bytes": self.overhead_bytes,
            "sink_slack_bytes": self.sink_slack_bytes,
            "workers": self.workers, "seed": self.seed,
        }
        return out


@dataclass
class GenResult:
    nodes: NodeStore
    edges: Optional[EdgeStore]
    stats: GenStats


class SharedEdgeSink:
    """Growable contiguous edge arrays shared by all workers.

    Commits reserve a range by bumping a cursor under a lock and copy
    the buffer in; capacity grows by 1.5x preserving everything already
    committed.  The committed prefix is always dense and complete.
    """

    def __init__(self, capacity: int, want_distances: bool):
        capacity = max(int(capacity), 1)
        self.want = want_distances
        try:
            self.from_ids = np.empty(capacity, dtype=np.uint32)
            self.to_ids = np.empty(capacity, dtype=np.uint32)
            self.dist = np.empty(capacity if want_distances else 0, dtype=np.float32)
        except MemoryError as exc:
            raise ResourceError(f"cannot allocate edge sink ({capacity} edges)") from exc
        self.cursor = 0
        self.peak_capacity = capacity
        self.lock = threading.Lock()

    @property
    def capacity(self) -> int:
        return int(self.from_ids.shape[0])

    def _grow_to(self, need: int):
        new_cap = max(need, int(self.capacity * 1.5) + 1)
        try:
            nf = np.empty(new_cap, dtype=np.uint32)
            nt = np.empty(new_cap, dtype=np.uint32)
            nd = np.empty(new_cap if self.want else 0, dtype=np.float32)
        except MemoryError as exc:
            raise ResourceError(
                f"edge sink growth to {new_cap} edges failed") from exc
        nf[:self.cursor] = self.from_ids[:self.cursor]
        nt[:self.cursor] = self.to_ids[:self.cursor]
        if self.want:
            nd[:self.cursor] = self.dist[:self.cursor]
        self.from_ids, self.to_ids, self.dist = nf, nt, nd
        self.peak_capacity = max(self.peak_capacity, new_cap)

    def commit(self, bf, bt, bd, fill: int):
        """Reserve + copy one flushed buffer; thread-safe."""
        with self.lock:
            end = self.cursor + fill
            if end > self.capacity:
                self._grow_to(end)
            self.from_ids[self.cursor:end] = bf[:fill]
            self.to_ids[self.cursor:end] = bt[:fill]
            if self.want:
                self.dist[self.cursor:end] = bd[:fill]
            self.cursor = end

    def finish(self) -> EdgeStore:
        """Trim to the exact committed length and hand over the arrays."""
        e = self.cursor
        self.from_ids.resize(e, refcheck=False)
        self.to_ids.resize(e, refcheck=False)
        if self.want:
            self.dist.resize(e, refcheck=False)
        return EdgeStore(from_ids=self.from_ids, to_ids=self.to_ids,
                         dist=self.dist if self.want else None)


class StatsAccumulator:
    """Consumes flushed buffers into degree counts and a length histogram."""

    def __init__(self, n: int, bins: int, big_l: float):
        self.degrees = np.zeros(n, dtype=np.int64)
        self.hist = np.zeros(bins, dtype=np.int64)
        self.edges = np.linspace(0.0, max(big_l, 1e-300), bins + 1)
        self.bins = bins
        self.big_l = max(big_l, 1e-300)
        self.count = 0
        self.lock = threading.Lock()

    def commit(self, bf, bt, bd, fill: int):
        deg_f = np.bincount(bf[:fill], minlength=self.degrees.shape[0])
        deg_t = np.bincount(bt[:fill], minlength=self.degrees.shape[0])
        idx = np.minimum((bd[:fill] / self.big_l * self.bins).astype(np.int64),
                         self.bins - 1)
        h = np.bincount(idx, minlength=self.bins)
        with self.lock:
            self.degrees += deg_f
            self.degrees += deg_t
            self.hist += h
            self.count += fill


def _mean_link_probability(region: Region, metric, model: Deterrence,
                           seed: int) -> float:
    """Monte Carlo mean of p(d) over independent uniform point pairs."""
    rng = RngState.for_worker(seed, _PURPOSE_ESTIMATE, 0)
    xs, ys = region.sample(rng, 2 * _MEAN_P_SAMPLES)
    x1, x2 = xs[:_MEAN_P_SAMPLES], xs[_MEAN_P_SAMPLES:]
    y1, y2 = ys[:_MEAN_P_SAMPLES], ys[_MEAN_P_SAMPLES:]
    # distances from f32-rounded coordinates, matching generation
    x1 = x1.astype(np.float32).astype(np.float64)
    x2 = x2.astype(np.float32).astype(np.float64)
    y1 = y1.astype(np.float32).astype(np.float64)
    y2 = y2.astype(np.float32).astype(np.float64)
    if isinstance(metric, Metric):
        if metric is Metric.L2:
            d = np.hypot(x1 - x2, y1 - y2)
        elif metric is Metric.L1:
            d = np.abs(x1 - x2) + np.abs(y1 - y2)
        elif metric is Metric.L0:
            d = (x1 != x2).astype(np.float64) + (y1 != y2).astype(np.float64)
        else:
            d = np.maximum(np.abs(x1 - x2), np.abs(y1 - y2))
    else:
        d = np.asarray(metric(x1, y1, x2, y2), dtype=np.float64)
    p = np.clip(np.asarray(model.p(d), dtype=np.float64), 0.0, 1.0)
    return float(p.mean())


class Generator:
    """Reusable handle: grid, Q table and estimates amortized across runs.

    Build once per (region, metric, model, M, algorithm) and call
    :meth:`run` repeatedly with different n/seed.
    """

    def __init__(self, config: GenConfig):
        self.config = config
        self.grid: BucketGrid = cover_with_grid(config.region, config.m)
        self.algorithm = config.algorithm
        self.fallback = False
        if config.algorithm in ("qjump", "bucket") and not config.model.is_monotone:
            warnings.warn(
                f"{config.model.kind} model is not non-increasing; "
                f"falling back from {config.algorithm} to the naive algorithm",
                stacklevel=2)
            self.algorithm = "naive"
            self.fallback = True
        self.qtable: Optional[QTable] = None
        if self.algorithm == "bucket":
            self.qtable = build_q_table(config.model, self.grid, config.metric)
        self._mean_p: Optional[float] = None
        # fixed precomputed overhead, in bytes, reported with every run
        self.fixed_overhead = (
            self.grid.areas.nbytes + self.grid.probs.nbytes
            + self.grid.interior.nbytes
            + (self.qtable.values.nbytes if self.qtable is not None else 0))

    def mean_link_probability(self) -> float:
        if self._mean_p is None:
            self._mean_p = _mean_link_probability(
                self.config.region, self.config.metric, self.config.model,
                self.config.seed)
        return self._mean_p

    def expected_edges(self, n: int) -> float:
        return n * (n - 1) / 2.0 * self.mean_link_probability()

    def run(self, n: Optional[int] = None, seed: Optional[int] = None) -> GenResult:
        cfg = self.config
        n = cfg.n if n is None else int(n)
        seed = cfg.seed if seed is None else int(seed) & 0xFFFFFFFFFFFFFFFF
        if n < 0 or n >= MAX_NODES:
            raise ParameterError(f"n must be in [0, 2^32), got {n}")
        stats = GenStats(n=n, algorithm=self.algorithm, fallback=self.fallback,
                         workers=cfg.workers, seed=seed)
        t_start = time.perf_counter()

        nodes, candidates = generate_nodes(cfg.region, self.grid, n, seed,
                                           cfg.workers)
        stats.candidates = candidates
        stats.node_seconds = time.perf_counter() - t_start

        t_edges = time.perf_counter()
        edges = self._edge_phase(nodes, seed, stats)
        stats.edge_seconds = time.perf_counter() - t_edges
        stats.total_seconds = time.perf_counter() - t_start

        stats.payload_bytes = nodes.payload_bytes + (
            edges.payload_bytes if edges is not None else 0)
        stats.overhead_bytes += self.fixed_overhead
        stats.rejects = stats.hits - stats.e
        return GenResult(nodes=nodes, edges=edges, stats=stats)

    # -- edge phase ---------------------------------------------------

    def _edge_phase(self, nodes: NodeStore, seed: int,
                    stats: GenStats) -> Optional[EdgeStore]:
        cfg = self.config
        algo = self.algorithm
        n = nodes.n
        want_d = cfg.want_distances or not cfg.store_edges
        acc: Optional[StatsAccumulator] = None
        if not cfg.store_edges:
            acc = StatsAccumulator(n, cfg.stats_bins, cfg.model.L)

        if algo == "bucket":
            stats.tasks_total = task_count(nodes.counts)
            stats.expected_hit_count = (
                expected_hits(nodes.counts, self.qtable, self.grid.my)
                if n and self.qtable is not None else 0.0)
            edges = self._run_bucket(nodes, seed, stats, want_d, acc)
        else:
            rng = RngState.for_worker(seed, _PURPOSE_EDGES, 0)
            counters: dict = {}
            if algo == "naive":
                store = edgegen.generate_edges_naive(
                    nodes, cfg.model, rng, metric=cfg.metric,
                    want_distances=want_d, allow_large=cfg.allow_large_naive,
                    buffer_edges=cfg.buffer_edges, counters=counters)
            else:
                store = edgegen.generate_edges_qjump(
                    nodes, cfg.model, rng, metric=cfg.metric,
                    want_distances=want_d, buffer_edges=cfg.buffer_edges,
                    counters=counters)
            stats.hits = counters.get("hits", 0)
            stats.tasks_total = 1
            stats.draws += rng.draws
            stats.overhead_bytes += cfg.buffer_edges * (12 if want_d else 8)
            if acc is not None:
                if store.e:
                    acc.commit(store.from_ids, store.to_ids, store.dist, store.e)
                edges = None
            else:
                edges = store
        stats.e = acc.count if acc is not None else (edges.e if edges is not None else 0)
        if acc is not None:
            stats.degrees = acc.degrees
            stats.length_hist = acc.hist
            stats.length_hist_edges = acc.edges
            if want_d and not cfg.want_distances:
                pass  # distances were only needed for the histogram
        return edges

    def _run_bucket(self, nodes: NodeStore, seed: int, stats: GenStats,
                    want_d: bool, acc: Optional[StatsAccumulator]):
        cfg = self.config
        n = nodes.n
        edgegen.check_bucket_limits(nodes.counts)
        nzb = nonempty_buckets(nodes.counts)
        kk = nzb.size
        t_end = kk * (kk + 1) // 2
        sink: Optional[SharedEdgeSink] = None
        if acc is None:
            est = self.expected_edges(n)
            capacity = int(1.25 * (est + 4.0 * math.sqrt(max(est, 1.0)))) + 64
            sink = SharedEdgeSink(capacity, want_d)
        if n < 2 or t_end == 0:
            stats.overhead_bytes += cfg.buffer_edges * (12 if want_d else 8)
            if sink is not None:
                return sink.finish()
            return None

        if cfg.model.kind == "custom":
            return self._run_bucket_custom(nodes, seed, stats, want_d, acc, sink)

        kcode, mq, ms, mr, mt1, mt2, mL = cfg.model.kernel_params()
        mcode = cfg.metric.code
        qvals = self.qtable.values
        workers = min(cfg.workers, t_end)
        cnt_all = np.zeros((workers, 2), dtype=np.int64)
        sink_or_acc = acc if acc is not None else sink

        def run_worker(w: int) -> int:
            rng = RngState.for_worker(seed, _PURPOSE_EDGES, w)
            bf = np.empty(cfg.buffer_edges, dtype=np.uint32)
            bt = np.empty(cfg.buffer_edges, dtype=np.uint32)
            bd = np.empty(cfg.buffer_edges if want_d else 0, dtype=np.float32)
            resume = np.array([w, -1], dtype=np.int64)
            cnt = cnt_all[w]
            while True:
                fill = walk_tasks(rng.state, nodes.counts, nodes.offsets, nzb,
                                  qvals, self.grid.my, t_end, workers, resume,
                                  nodes.x, nodes.y, mcode, kcode, mq, ms, mr,
                                  mt1, mt2, mL, want_d, bf, bt, bd, cnt)
                if fill:
                    sink_or_acc.commit(bf, bt, bd, fill)
                if resume[0] >= t_end:
                    return rng.draws

        if workers == 1:
            stats.draws += run_worker(0)
        else:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for draws in pool.map(run_worker, range(workers)):
                    stats.draws += draws
        stats.hits = int(cnt_all[:, 0].sum())
        stats.overhead_bytes += workers * cfg.buffer_edges * (12 if want_d else 8)
        if sink is not None:
            stats.sink_slack_bytes = (sink.peak_capacity - sink.cursor) * (12 if want_d else 8)
            return sink.finish()
        return None

    def _run_bucket_custom(self, nodes, seed, stats, want_d, acc, sink):
        """Custom deterrence with a built-in metric, single worker."""
        cfg = self.config
        rng = RngState.for_worker(seed, _PURPOSE_EDGES, 0)
        counters: dict = {}
        store = edgegen.generate_edges_bucket(
            nodes, self.grid, cfg.model, self.qtable, rng, metric=cfg.metric,
            want_distances=want_d, buffer_edges=cfg.buffer_edges,
            counters=counters)
        stats.hits = counters.get("hits", 0)
        stats.draws += rng.draws
        stats.overhead_bytes += cfg.buffer_edges * (12 if want_d else 8)
        if acc is not None:
            if store.e:
                acc.commit(store.from_ids, store.to_ids, store.dist, store.e)
            return None
        if sink is not None and store.e:
            sink.commit(store.from_ids, store.to_ids, store.dist, store.e)
        if sink is not None:
            stats.sink_slack_bytes = (sink.peak_capacity - sink.cursor) * (12 if want_d else 8)
            return sink.finish()
        return None


def generate(config: GenConfig) -> GenResult:
    """One-shot generation; build a Generator directly to amortize setup."""
    return Generator(config).run()
