"""Timing sweeps over n, s, grid size, or thread count, emitted as CSV.

Each sweep point runs R times (default 10) and keeps the minimum wall
time, the usual way to suppress scheduler noise.  An n-sweep holds the
expected mean degree fixed by solving q from kbar = (n-1) q Gt(s), with
Gt estimated once by Monte Carlo, so runtime scales with the graph and
not with a drifting edge density.

CSV schema: sweep_name,param,n,e,M,threads,seconds
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .analysis import estimate_gtilde
from .engine import ALGORITHMS, Generator, build_config
from .errors import ParameterError
from .geometry import Rectangle, Region, parse_region
from .model import Metric
from .rng import RngState

SWEEP_DIMENSIONS = ("n", "s", "M", "threads")
CSV_FIELDS = ("sweep_name", "param", "n", "e", "M", "threads", "seconds")


@dataclass(frozen=True)
class SweepRow:
    sweep_name: str
    param: float
    n: int
    e: int
    m: int
    threads: int
    seconds: float


def _solve_q(kbar: float, n: int, gtilde: float) -> float:
    if n < 2:
        raise ParameterError("need n >= 2 to target a mean degree")
    q = kbar / ((n - 1) * gtilde)
    if not 0.0 < q <= 1.0:
        raise ParameterError(
            f"target mean degree {kbar} needs q={q:.3g}, outside (0, 1]")
    return q


def _best_of(gen: Generator, repeats: int, seed: int) -> tuple:
    best = float("inf")
    e = 0
    for rep in range(repeats):
        t0 = time.perf_counter()
        result = gen.run(seed=seed)
        dt = time.perf_counter() - t0
        if dt < best:
            best = dt
        e = result.stats.e
    return best, e


def sweep(dimension: str, points: Sequence[float], *,
          n: int = 10**5, kbar: Optional[float] = 1.0,
          q: Optional[float] = None, s: float = 0.1, m: int = 10,
          threads: int = 1, algorithm: str = "bucket",
          model_kind: str = "waxman", region: Optional[Region] = None,
          metric: Metric = Metric.L2, repeats: int = 10,
          seed: int = 1234, gtilde_samples: int = 10**6) -> List[SweepRow]:
    """Time the generator at each point of one swept dimension."""
    if dimension not in SWEEP_DIMENSIONS:
        raise ParameterError(f"unknown sweep dimension {dimension!r}")
    if not points:
        raise ParameterError("points must be non-empty")
    if repeats < 1:
        raise ParameterError("repeats must be >= 1")
    if algorithm not in ALGORITHMS:
        raise ParameterError(f"unknown algorithm {algorithm!r}")
    if region is None:
        region = Rectangle(1.0, 1.0)

    solve = q is None
    if solve and model_kind != "waxman":
        raise ParameterError(
            "solving q for a target mean degree is supported for the "
            "waxman model only; pass q explicitly")

    gt_cache: dict = {}

    def gtilde_at(s_val: float) -> float:
        if s_val not in gt_cache:
            gt_cache[s_val] = estimate_gtilde(
                region, metric, s_val, gtilde_samples,
                RngState(seed ^ 0x9E3779B97F4A7C15)).value
        return gt_cache[s_val]

    def config_for(point: float):
        pn, ps, pm, pt = n, s, m, threads
        if dimension == "n":
            pn = int(point)
        elif dimension == "s":
            ps = float(point)
        elif dimension == "M":
            pm = int(point)
        else:
            pt = int(point)
        pq = _solve_q(kbar, pn, gtilde_at(ps)) if solve else q
        cfg = build_config(n=pn, region=region, model_kind=model_kind, q=pq,
                           s=ps, metric=metric, m=pm, algorithm=algorithm,
                           workers=pt, seed=seed, store_edges=True)
        return cfg, pn, pm, pt

    # one warm run so compilation cost never lands in a timed repetition
    warm_cfg, _, _, _ = config_for(points[0])
    Generator(build_config(n=min(n, 1000) if dimension != "n" else 1000,
                           region=region, model_kind=model_kind,
                           q=warm_cfg.model.q, s=warm_cfg.model.s,
                           metric=metric, m=m, algorithm=algorithm,
                           workers=threads, seed=seed)).run()

    rows: List[SweepRow] = []
    name = f"{dimension}-sweep"
    for point in points:
        cfg, pn, pm, pt = config_for(point)
        gen = Generator(cfg)
        seconds, e = _best_of(gen, repeats, seed)
        rows.append(SweepRow(sweep_name=name, param=float(point), n=pn, e=e,
                             m=pm, threads=pt, seconds=seconds))
    return rows


def write_csv(rows: Sequence[SweepRow], dest) -> None:
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        writer.writerow([r.sweep_name, r.param, r.n, r.e, r.m, r.threads,
                         f"{r.seconds:.6f}"])


def _parse_points(text: str, dimension: str) -> List[float]:
    vals = [v for v in (part.strip() for part in text.split(",")) if v]
    if dimension == "s":
        return [float(v) for v in vals]
    return [int(float(v)) for v in vals]


def main() -> None:
    parser = argparse.ArgumentParser(
        prog="sern-bench",
        description="Time generation sweeps and emit CSV.")
    parser.add_argument("--sweep", required=True, choices=SWEEP_DIMENSIONS)
    parser.add_argument("--points", required=True,
                        help="comma-separated sweep values")
    parser.add_argument("--n", type=int, default=10**5)
    parser.add_argument("--kbar", type=float, default=1.0,
                        help="target mean degree when --q is not given")
    parser.add_argument("--q", type=float, default=None)
    parser.add_argument("--s", type=float, default=0.1)
    parser.add_argument("--buckets", type=int, default=10)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--algorithm", default="bucket",
                        choices=list(ALGORITHMS))
    parser.add_argument("--model", default="waxman")
    parser.add_argument("--region", default="rect:1,1")
    parser.add_argument("--metric", default="l2",
                        choices=["l2", "l1", "l0", "linf"])
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--output", default="-")
    args = parser.parse_args()
    try:
        rows = sweep(args.sweep, _parse_points(args.points, args.sweep),
                     n=args.n, kbar=args.kbar, q=args.q, s=args.s,
                     m=args.buckets, threads=args.threads,
                     algorithm=args.algorithm, model_kind=args.model,
                     region=parse_region(args.region),
                     metric=Metric.parse(args.metric),
                     repeats=args.repeats, seed=args.seed)
    except ParameterError as exc:
        print(f"sern-bench: {exc}", file=sys.stderr)
        sys.exit(2)
    if args.output == "-":
        write_csv(rows, sys.stdout)
    else:
        with open(args.output, "w", encoding="ascii", newline="") as fh:
            write_csv(rows, fh)


if __name__ == "__main__":
    main()
