"""FastAPI application exposing the generator over HTTP.

Routes (all under /v1):
    GET  /health    liveness and version
    GET  /catalog   models, metrics, algorithms, formats, defaults
    POST /generate  run one generation job, body is the serialized graph
    POST /gtilde    Monte Carlo estimate of E[e^{-s d}] for a region

Generated graphs are returned in the requested format with generation
statistics mirrored into the X-Generation-Stats response header as JSON.
Requests with format=stats skip edge storage server-side and return the
statistic summaries as the JSON body instead.
"""
from __future__ import annotations

import io
import json

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .. import __version__
from ..edgegen import DEFAULT_BUFFER
from ..engine import ALGORITHMS, DEFAULT_GRID, Generator, build_config
from ..errors import ParameterError, ResourceError
from ..formats import write_graph
from ..geometry import Polygon, parse_region
from ..model import MODEL_KINDS, Metric
from ..analysis import estimate_gtilde
from ..rng import RngState
from .schemas import (CatalogResponse, GenerateRequest, GtildeRequest,
                      GtildeResponse, HealthResponse, ModelInfo,
                      StatsResponse)

_MODEL_PARAMS = {
    "waxman": ["q", "s"],
    "clipped_waxman": ["q", "s"],
    "waxman_threshold": ["q", "s", "r"],
    "threshold": ["q", "r"],
    "ger": ["q"],
    "power_law": ["q", "theta1", "theta2"],
    "cauchy": ["q", "theta1"],
    "exponential": ["q"],
    "max_entropy": ["q", "s"],
}

_MEDIA_TYPES = {
    "graphml": "application/xml",
    "edgelist": "text/plain; charset=ascii",
    "binary": "application/octet-stream",
}


def _region_from(spec: str, polygon):
    if spec == "polygon":
        if not polygon:
            raise ParameterError(
                'region "polygon" needs vertices in the polygon field')
        xs = [float(p[0]) for p in polygon]
        ys = [float(p[1]) for p in polygon]
        return Polygon(xs, ys)
    if spec.startswith("polygon:"):
        raise ParameterError(
            "the service does not read polygon files; send vertices in the "
            "polygon field with region set to \"polygon\"")
    return parse_region(spec)


def create_app(max_nodes: int = 10**7) -> FastAPI:
    app = FastAPI(title="sern", version=__version__,
                  description="Spatially embedded random network generator")

    @app.exception_handler(ParameterError)
    async def _param_error(request: Request, exc: ParameterError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ResourceError)
    async def _resource_error(request: Request, exc: ResourceError):
        return JSONResponse(status_code=413, content={"detail": str(exc)})

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/v1/catalog", response_model=CatalogResponse)
    def catalog() -> CatalogResponse:
        return CatalogResponse(
            models=[ModelInfo(name=k, parameters=_MODEL_PARAMS[k])
                    for k in sorted(MODEL_KINDS)],
            metrics=[m.value for m in Metric],
            algorithms=list(ALGORITHMS),
            formats=["graphml", "edgelist", "binary", "stats"],
            defaults={"buckets": DEFAULT_GRID, "algorithm": "bucket",
                      "threads": 1, "buffer": DEFAULT_BUFFER,
                      "format": "edgelist", "region": "rect:1,1",
                      "metric": "l2"},
        )

    @app.post("/v1/generate")
    def generate_route(req: GenerateRequest) -> Response:
        if req.n > max_nodes:
            raise ResourceError(
                f"n={req.n} exceeds this server's limit of {max_nodes}")
        region = _region_from(req.region, req.polygon)
        cfg = build_config(
            n=req.n, region=region, model_kind=req.model, q=req.q, s=req.s,
            r=req.r, theta1=req.theta1, theta2=req.theta2, metric=req.metric,
            m=req.buckets, algorithm=req.algorithm, workers=req.threads,
            buffer_edges=req.buffer, seed=req.seed,
            want_distances=req.distances, store_edges=req.format != "stats")
        result = Generator(cfg).run()
        stats_json = json.dumps(result.stats.as_dict(), sort_keys=True)
        headers = {"X-Generation-Stats": stats_json}
        if req.format == "stats":
            st = result.stats
            degree_hist = np.bincount(st.degrees).tolist()
            body = StatsResponse(
                stats=st.as_dict(),
                degree_min=int(st.degrees.min()) if st.n else 0,
                degree_max=int(st.degrees.max()) if st.n else 0,
                degree_hist=degree_hist,
                length_hist=st.length_hist.tolist(),
                length_bin_edges=st.length_hist_edges.tolist(),
            )
            return Response(content=body.model_dump_json(),
                            media_type="application/json", headers=headers)
        buf = io.BytesIO()
        write_graph(req.format, result.nodes, result.edges, req.distances, buf)
        return Response(content=buf.getvalue(),
                        media_type=_MEDIA_TYPES[req.format], headers=headers)

    @app.post("/v1/gtilde", response_model=GtildeResponse)
    def gtilde_route(req: GtildeRequest) -> GtildeResponse:
        region = _region_from(req.region, req.polygon)
        est = estimate_gtilde(region, Metric.parse(req.metric), req.s,
                              req.samples, RngState(req.seed & (2**64 - 1)))
        return GtildeResponse(s=est.s, value=est.value, se=est.se,
                              samples=est.samples,
                              expected_degree_factor=est.value)

    return app


def main() -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="sern-serve")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8137)
    parser.add_argument("--max-nodes", type=int, default=10**7)
    args = parser.parse_args()
    uvicorn.run(create_app(max_nodes=args.max_nodes),
                host=args.host, port=args.port)


if __name__ == "__main__":
    main()
