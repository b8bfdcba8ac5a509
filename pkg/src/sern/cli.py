"""Command line front end for the generator.

By default the graph is produced in-process.  With --server URL the same
request is posted to a running service instance and the response body is
streamed to the output unchanged, so scripts behave identically either
way.

Exit codes: 0 success, 2 usage or parameter error, 3 resource limit,
4 I/O failure.  Stats always go to standard error; "-" sends graph
output to standard output.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .engine import ALGORITHMS, DEFAULT_GRID, build_config, Generator
from .edgegen import DEFAULT_BUFFER
from .errors import ParameterError, ResourceError, SernError
from .formats import write_graph
from .geometry import parse_region, Polygon
from .model import MODEL_KINDS

OUTPUT_FORMATS = ("graphml", "edgelist", "binary", "stats")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sern",
        description="Generate spatially embedded random networks "
                    "(Waxman and related models).")
    p.add_argument("--nodes", type=int, required=True, metavar="N",
                   help="number of nodes to place")
    p.add_argument("--model", default="waxman", choices=sorted(MODEL_KINDS),
                   help="link probability model (default: waxman)")
    p.add_argument("--q", type=float, default=1.0,
                   help="model intensity parameter q (default: 1)")
    p.add_argument("--s", type=float, default=0.0,
                   help="distance decay rate s (default: 0)")
    p.add_argument("--r", type=float, default=0.0,
                   help="cutoff radius for threshold models (default: 0)")
    p.add_argument("--theta1", type=float, default=0.0,
                   help="first shape parameter for power_law/cauchy")
    p.add_argument("--theta2", type=float, default=0.0,
                   help="second shape parameter for power_law")
    p.add_argument("--metric", default="l2", choices=["l2", "l1", "l0", "linf"],
                   help="distance metric (default: l2)")
    p.add_argument("--region", default="rect:1,1", metavar="SPEC",
                   help="rect:W,H | ellipse:A,B | polygon:PATH "
                        "(default: rect:1,1)")
    p.add_argument("--buckets", type=int, default=DEFAULT_GRID, metavar="M",
                   help=f"grid resolution along the longer side "
                        f"(default: {DEFAULT_GRID})")
    p.add_argument("--algorithm", default="bucket", choices=list(ALGORITHMS),
                   help="edge sampling algorithm (default: bucket)")
    p.add_argument("--threads", type=int, default=1, metavar="T",
                   help="worker threads (default: 1)")
    p.add_argument("--buffer", type=int, default=DEFAULT_BUFFER, metavar="B",
                   help=f"edge flush buffer per worker "
                        f"(default: {DEFAULT_BUFFER})")
    p.add_argument("--seed", type=int, default=0, metavar="S",
                   help="64-bit master seed (default: 0)")
    p.add_argument("--distances", action="store_true",
                   help="store and emit per-edge distances")
    p.add_argument("--format", default="edgelist", choices=list(OUTPUT_FORMATS),
                   help="output format (default: edgelist); 'stats' skips "
                        "edge storage and reports summaries only")
    p.add_argument("--output", default="-", metavar="PATH",
                   help="output file, '-' for standard output (default: -)")
    p.add_argument("--json", action="store_true",
                   help="emit stats to standard error as one JSON object")
    p.add_argument("--server", default=None, metavar="URL",
                   help="send the request to a running service instead of "
                        "generating in-process")
    return p


def _print_stats(stats_dict: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(stats_dict, sort_keys=True), file=sys.stderr)
    else:
        for key in sorted(stats_dict):
            print(f"{key}: {stats_dict[key]}", file=sys.stderr)


def _open_output(path: str):
    if path == "-":
        return sys.stdout.buffer, False
    return open(path, "wb"), True


def _run_local(args) -> int:
    region = parse_region(args.region)
    cfg = build_config(
        n=args.nodes, region=region, model_kind=args.model, q=args.q,
        s=args.s, r=args.r, theta1=args.theta1, theta2=args.theta2,
        metric=args.metric, m=args.buckets, algorithm=args.algorithm,
        workers=args.threads, buffer_edges=args.buffer, seed=args.seed,
        want_distances=args.distances, store_edges=args.format != "stats")
    result = Generator(cfg).run()
    _print_stats(result.stats.as_dict(), args.json)
    if args.format != "stats":
        dest, owned = _open_output(args.output)
        try:
            write_graph(args.format, result.nodes, result.edges,
                        args.distances, dest)
            dest.flush()
        finally:
            if owned:
                dest.close()
    return EXIT_OK


def _request_payload(args) -> dict:
    payload = {
        "n": args.nodes, "model": args.model, "q": args.q, "s": args.s,
        "r": args.r, "theta1": args.theta1, "theta2": args.theta2,
        "metric": args.metric, "buckets": args.buckets,
        "algorithm": args.algorithm, "threads": args.threads,
        "buffer": args.buffer, "seed": args.seed,
        "distances": args.distances, "format": args.format,
    }
    if args.region.startswith("polygon:"):
        region = parse_region(args.region)
        assert isinstance(region, Polygon)
        payload["region"] = "polygon"
        payload["polygon"] = [[float(a), float(b)]
                              for a, b in zip(region.xs, region.ys)]
    else:
        payload["region"] = args.region
    return payload


def _run_remote(args) -> int:
    try:
        import httpx
    except ImportError:
        raise ParameterError(
            "--server requires the httpx package (install the 'service' "
            "extra)") from None
    url = args.server.rstrip("/") + "/v1/generate"
    try:
        resp = httpx.post(url, json=_request_payload(args), timeout=600.0)
    except httpx.HTTPError as exc:
        print(f"sern: request to {url} failed: {exc}", file=sys.stderr)
        return EXIT_IO
    stats_header = resp.headers.get("x-generation-stats")
    if stats_header:
        _print_stats(json.loads(stats_header), args.json)
    if resp.status_code in (400, 422):
        print(f"sern: server rejected the request: {resp.text}",
              file=sys.stderr)
        return EXIT_USAGE
    if resp.status_code == 413:
        print(f"sern: server resource limit: {resp.text}", file=sys.stderr)
        return EXIT_RESOURCE
    if resp.status_code != 200:
        print(f"sern: server error {resp.status_code}: {resp.text}",
              file=sys.stderr)
        return EXIT_IO
    if args.format != "stats":
        dest, owned = _open_output(args.output)
        try:
            dest.write(resp.content)
            dest.flush()
        finally:
            if owned:
                dest.close()
    return EXIT_OK


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        if args.server:
            return _run_remote(args)
        return _run_local(args)
    except ParameterError as exc:
        print(f"sern: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as exc:
        print(f"sern: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except MemoryError:
        print("sern: out of memory", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"sern: i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except SernError as exc:
        print(f"sern: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
