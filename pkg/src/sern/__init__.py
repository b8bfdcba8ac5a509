"""sern: exact samplers for spatially embedded random networks.

Nodes are placed uniformly in a planar region and each pair is linked
independently with a probability that decays with distance (Waxman and
related models).  The bucket algorithm produces exact samples in
expected O(n + e) time; naive and q-jumping generators are included as
references for validation.
"""

from .analysis import GraphStats, LaplaceEstimate, compute_stats, estimate_gtilde, expected_degree
from .engine import GenConfig, Generator, GenResult, GenStats, build_config, generate
from .geometry import Ellipse, Polygon, Rectangle, load_polygon, parse_region
from .model import Deterrence, Metric, deterrence
from .nodegen import NodeStore
from .edgegen import EdgeStore
from .formats import read_graph, write_graph

__all__ = [
    "Deterrence",
    "EdgeStore",
    "Ellipse",
    "GenConfig",
    "GenResult",
    "GenStats",
    "Generator",
    "GraphStats",
    "LaplaceEstimate",
    "Metric",
    "NodeStore",
    "Polygon",
    "Rectangle",
    "build_config",
    "compute_stats",
    "deterrence",
    "estimate_gtilde",
    "expected_degree",
    "generate",
    "load_polygon",
    "parse_region",
    "read_graph",
    "write_graph",
]

__version__ = "0.1.0"
