"""Request and response models for the HTTP service."""
from __future__ import annotations

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

MetricName = Literal["l2", "l1", "l0", "linf"]
AlgorithmName = Literal["naive", "qjump", "bucket"]
FormatName = Literal["graphml", "edgelist", "binary", "stats"]


class GenerateRequest(BaseModel):
    """One generation job; mirrors the CLI flags one-for-one."""

    n: int = Field(ge=0, le=2**32 - 1, description="number of nodes")
    model: str = "waxman"
    q: float = 1.0
    s: float = 0.0
    r: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    metric: MetricName = "l2"
    region: str = Field(
        default="rect:1,1",
        description='rect:W,H | ellipse:A,B | the literal "polygon" '
                    "(vertices go in the polygon field)")
    polygon: Optional[List[Tuple[float, float]]] = None
    buckets: int = Field(default=20, ge=1, le=4096)
    algorithm: AlgorithmName = "bucket"
    threads: int = Field(default=1, ge=1, le=256)
    buffer: int = Field(default=16384, ge=1)
    seed: int = 0
    distances: bool = False
    format: FormatName = "edgelist"


class GtildeRequest(BaseModel):
    """Monte Carlo estimate of E[e^{-s d}] for a region and metric."""

    region: str = "rect:1,1"
    polygon: Optional[List[Tuple[float, float]]] = None
    metric: MetricName = "l2"
    s: float = Field(ge=0.0)
    samples: int = Field(default=10**6, ge=1, le=10**8)
    seed: int = 0


class GtildeResponse(BaseModel):
    s: float
    value: float
    se: float
    samples: int
    expected_degree_factor: float = Field(
        description="q times this times (n-1) gives the expected mean degree "
                    "for exponential decay at rate s")


class HealthResponse(BaseModel):
    status: str
    version: str


class ModelInfo(BaseModel):
    name: str
    parameters: List[str]


class CatalogResponse(BaseModel):
    models: List[ModelInfo]
    metrics: List[str]
    algorithms: List[str]
    formats: List[str]
    defaults: dict


class StatsResponse(BaseModel):
    """Body returned for format=stats requests."""

    stats: dict
    degree_min: int
    degree_max: int
    degree_hist: List[int]
    length_hist: List[int]
    length_bin_edges: List[float]
