"""Validation statistics: degree/length summaries and Eq.-style predictions.

The mean degree of the exponential-decay model on a region follows
(n-1) * q * Gt(s), where Gt(s) is the Laplace transform of the density
of the distance between two independent uniform points (the
line-picking density).  Gt is estimated here by Monte Carlo, which
works uniformly across regions and metrics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .edgegen import EdgeStore
from .errors import IntegrityError, ParameterError
from .geometry import Region
from .model import Metric
from .nodegen import NodeStore
from .rng import RngState

DEFAULT_BINS = 64


@dataclass(frozen=True)
class LaplaceEstimate:
    """Monte Carlo estimate of E[e^{-s d}] over random point pairs."""

    s: float
    value: float
    se: float
    samples: int


def _pair_distances(region: Region, metric: Metric, samples: int,
                    rng: RngState) -> np.ndarray:
    xs, ys = region.sample(rng, 2 * samples)
    x1, x2 = xs[:samples], xs[samples:]
    y1, y2 = ys[:samples], ys[samples:]
    if metric is Metric.L2:
        return np.hypot(x1 - x2, y1 - y2)
    if metric is Metric.L1:
        return np.abs(x1 - x2) + np.abs(y1 - y2)
    if metric is Metric.L0:
        return (x1 != x2).astype(np.float64) + (y1 != y2).astype(np.float64)
    return np.maximum(np.abs(x1 - x2), np.abs(y1 - y2))


def estimate_gtilde(region: Region, metric: Metric, s: float, samples: int,
                    rng: RngState) -> LaplaceEstimate:
    """Estimate Gt(s) = E[e^{-s d}] from `samples` uniform point pairs."""
    samples = int(samples)
    if samples < 1:
        raise ParameterError(f"samples must be >= 1, got {samples}")
    d = _pair_distances(region, metric, samples, rng)
    vals = np.exp(-float(s) * d)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return LaplaceEstimate(s=float(s), value=mean, se=se, samples=samples)


def expected_degree(n: int, q: float, gtilde: float) -> float:
    """(n-1) * q * Gt(s); expected edge count is n times this over 2."""
    return (int(n) - 1) * float(q) * float(gtilde) if n >= 1 else 0.0


@dataclass(frozen=True)
class GraphStats:
    n: int
    e: int
    mean_degree: float
    degrees: np.ndarray          # int64, per node
    degree_hist: np.ndarray      # int64, counts of each degree value
    length_hist: np.ndarray      # int64, DEFAULT_BINS bins over [0, L]
    length_bin_edges: np.ndarray


def compute_stats(nodes: NodeStore, edges: EdgeStore, bins: int = DEFAULT_BINS,
                  metric: Metric = Metric.L2,
                  big_l: Optional[float] = None) -> GraphStats:
    """Exact degrees and an edge-length histogram for one graph."""
    n = nodes.n
    e = edges.e
    if e and (int(edges.from_ids.max()) >= n or int(edges.to_ids.max()) >= n):
        raise IntegrityError("edge references a node id beyond the store")
    degrees = (np.bincount(edges.from_ids, minlength=n)
               + np.bincount(edges.to_ids, minlength=n)).astype(np.int64)
    if edges.dist is not None and e:
        lengths = edges.dist.astype(np.float64)
    elif e:
        x = nodes.x.astype(np.float64)
        y = nodes.y.astype(np.float64)
        dx = x[edges.from_ids] - x[edges.to_ids]
        dy = y[edges.from_ids] - y[edges.to_ids]
        if metric is Metric.L2:
            lengths = np.hypot(dx, dy)
        elif metric is Metric.L1:
            lengths = np.abs(dx) + np.abs(dy)
        elif metric is Metric.L0:
            lengths = (dx != 0).astype(np.float64) + (dy != 0).astype(np.float64)
        else:
            lengths = np.maximum(np.abs(dx), np.abs(dy))
    else:
        lengths = np.empty(0, dtype=np.float64)
    if big_l is None:
        big_l = float(lengths.max()) if e else 1.0
    big_l = max(big_l, 1e-300)
    hist, edges_arr = np.histogram(lengths, bins=int(bins), range=(0.0, big_l))
    # anything beyond the last edge (recomputation jitter) lands in the top bin
    hist[-1] += int((lengths > big_l).sum())
    return GraphStats(
        n=n, e=e, mean_degree=2.0 * e / n if n else 0.0,
        degrees=degrees,
        degree_hist=np.bincount(degrees).astype(np.int64) if n else np.zeros(1, np.int64),
        length_hist=hist.astype(np.int64),
        length_bin_edges=edges_arr,
    )
