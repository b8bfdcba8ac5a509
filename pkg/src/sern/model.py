"""Distance metrics and distance-decaying link probability models.

The nine built-in model forms, with H the Heaviside step (H(0) = 1)
and L the longest attainable distance in the region:

    waxman            q * exp(-s*d)                    q in (0,1], s >= 0
    clipped_waxman    min(q * exp(-s*d), 1)            q > 0,      s >= 0
    waxman_threshold  q * exp(-s*d) * H(r - d)         q in (0,1], s >= 0, r >= 0
    threshold         q * H(r - d)                     q in (0,1], r >= 0
    ger               q                                q in (0,1]
    power_law         q * (1 + t1*d)^(-t2)             q in (0,1], t1, t2 >= 0
    cauchy            q / (1 + t1*d^2)                 q in (0,1], t1 >= 0
    exponential       q * exp(-d) / (L - d)            q > 0 (clamped into [0,1], 0 at d >= L)
    max_entropy       q * exp(-s*d) / (1 + q*exp(-s*d))   q > 0, s >= 0

Every model is checked on a 1000-point grid over [0, L] at
construction: values outside [0,1] are clamped (with a warning) and a
non-increasing check decides whether the distance-bucket machinery may
be used (the exponential form always grows near d = L, so it is
flagged and handled by the naive path).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import ParameterError
from .geometry import METRIC_L0, METRIC_L1, METRIC_L2, METRIC_LINF, BucketGrid, min_bucket_distance

MONOTONE_GRID_POINTS = 1000

KIND_WAXMAN = 0
KIND_CLIPPED_WAXMAN = 1
KIND_WAXMAN_THRESHOLD = 2
KIND_THRESHOLD = 3
KIND_GER = 4
KIND_POWER_LAW = 5
KIND_CAUCHY = 6
KIND_EXPONENTIAL = 7
KIND_MAX_ENTROPY = 8
KIND_CUSTOM = 9

_KIND_CODES = {
    "waxman": KIND_WAXMAN,
    "clipped_waxman": KIND_CLIPPED_WAXMAN,
    "waxman_threshold": KIND_WAXMAN_THRESHOLD,
    "threshold": KIND_THRESHOLD,
    "ger": KIND_GER,
    "power_law": KIND_POWER_LAW,
    "cauchy": KIND_CAUCHY,
    "exponential": KIND_EXPONENTIAL,
    "max_entropy": KIND_MAX_ENTROPY,
    "custom": KIND_CUSTOM,
}

# kinds selectable by name (custom needs a callable, so it is not listed)
MODEL_KINDS = tuple(k for k in _KIND_CODES if k != "custom")


class Metric(Enum):
    """Planar distance metrics; L0 counts differing coordinates."""

    L2 = "l2"
    L1 = "l1"
    L0 = "l0"
    LINF = "linf"

    @property
    def code(self) -> int:
        return _METRIC_CODES[self]

    @classmethod
    def parse(cls, text: str) -> "Metric":
        key = text.strip().lower()
        aliases = {
            "euclidean": "l2", "manhattan": "l1",
            "discrete": "l0", "max": "linf",
        }
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(
                f"unknown metric {text!r} (l2, l1, l0, linf)") from None


_METRIC_CODES = {
    Metric.L2: METRIC_L2,
    Metric.L1: METRIC_L1,
    Metric.L0: METRIC_L0,
    Metric.LINF: METRIC_LINF,
}


@njit(cache=True, nogil=True)
def dist_eval(metric_code, x1, y1, x2, y2):
    dx = x1 - x2
    dy = y1 - y2
    if metric_code == METRIC_L2:
        return math.hypot(dx, dy)
    if metric_code == METRIC_L1:
        return abs(dx) + abs(dy)
    if metric_code == METRIC_L0:
        d = 0.0
        if dx != 0.0:
            d += 1.0
        if dy != 0.0:
            d += 1.0
        return d
    return max(abs(dx), abs(dy))


def distance(metric: Metric, p1, p2) -> float:
    """Distance between two coordinate pairs under the chosen metric."""
    return float(dist_eval(metric.code, float(p1[0]), float(p1[1]),
                           float(p2[0]), float(p2[1])))


def metric_diameter(metric: Metric, width: float, height: float) -> float:
    """Longest attainable distance within a width x height box."""
    if metric is Metric.L2:
        return math.hypot(width, height)
    if metric is Metric.L1:
        return width + height
    if metric is Metric.L0:
        return float((width > 0) + (height > 0))
    return max(width, height)


@njit(cache=True, nogil=True)
def link_prob_eval(kind_code, q, s, r, t1, t2, big_l, d):
    """Built-in model evaluation with the [0,1] clamp applied."""
    if kind_code == KIND_WAXMAN:
        p = q * math.exp(-s * d)
    elif kind_code == KIND_CLIPPED_WAXMAN:
        p = q * math.exp(-s * d)
    elif kind_code == KIND_WAXMAN_THRESHOLD:
        p = q * math.exp(-s * d) if d <= r else 0.0
    elif kind_code == KIND_THRESHOLD:
        p = q if d <= r else 0.0
    elif kind_code == KIND_GER:
        p = q
    elif kind_code == KIND_POWER_LAW:
        p = q * (1.0 + t1 * d) ** (-t2)
    elif kind_code == KIND_CAUCHY:
        p = q / (1.0 + t1 * d * d)
    elif kind_code == KIND_EXPONENTIAL:
        p = q * math.exp(-d) / (big_l - d) if d < big_l else 0.0
    else:  # max entropy
        w = q * math.exp(-s * d)
        p = w / (1.0 + w)
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def _require(cond: bool, msg: str):
    if not cond:
        raise ParameterError(msg)


@dataclass(frozen=True)
class Deterrence:
    """A validated link probability model, immutable once built.

    Use :func:`deterrence` to construct one; the engine derives L from
    the region and metric when building a configuration from plain
    parameters.
    """

    kind: str
    q: float = 1.0
    s: float = 0.0
    r: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    L: float = 1.0
    func: Optional[Callable] = None
    is_monotone: bool = field(init=False, default=True)
    p_max: float = field(init=False, default=0.0)
    clamped: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ParameterError(f"unknown model kind {self.kind!r}")
        self._validate_ranges()
        grid = np.linspace(0.0, self.L, MONOTONE_GRID_POINTS)
        raw = self._raw(grid)
        if not np.all(np.isfinite(raw)):
            raise ParameterError(f"{self.kind} model produced non-finite probabilities")
        clamped = bool(np.any(raw > 1.0 + 1e-12) or np.any(raw < -1e-12))
        vals = np.clip(raw, 0.0, 1.0)
        monotone = bool(np.all(np.diff(vals) <= 1e-12))
        if clamped:
            warnings.warn(
                f"{self.kind} model leaves [0,1] on [0, L={self.L:g}]; values are clamped",
                stacklevel=3)
        object.__setattr__(self, "clamped", clamped)
        object.__setattr__(self, "is_monotone", monotone)
        object.__setattr__(self, "p_max", float(vals.max()))

    def _validate_ranges(self):
        k, q, s, r = self.kind, self.q, self.s, self.r
        _require(math.isfinite(q), "q must be finite")
        if k in ("waxman", "waxman_threshold", "threshold", "ger", "power_law", "cauchy"):
            _require(0.0 < q <= 1.0, f"{k} needs q in (0,1], got {q}")
        elif k in ("clipped_waxman", "exponential", "max_entropy"):
            _require(q > 0.0, f"{k} needs q > 0, got {q}")
        if k in ("waxman", "clipped_waxman", "waxman_threshold", "max_entropy"):
            _require(s >= 0.0 and math.isfinite(s), f"{k} needs s >= 0, got {s}")
        if k in ("waxman_threshold", "threshold"):
            _require(r >= 0.0 and math.isfinite(r), f"{k} needs r >= 0, got {r}")
        if k == "power_law":
            _require(self.theta1 >= 0.0, f"power_law needs theta1 >= 0, got {self.theta1}")
            _require(self.theta2 >= 0.0, f"power_law needs theta2 >= 0, got {self.theta2}")
        if k == "cauchy":
            _require(self.theta1 >= 0.0, f"cauchy needs theta1 >= 0, got {self.theta1}")
        _require(self.L > 0.0 and math.isfinite(self.L), f"L must be positive, got {self.L}")
        if k == "custom":
            _require(callable(self.func), "custom model needs a callable func")

    def _raw(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        k = self.kind
        if k == "waxman" or k == "clipped_waxman":
            return self.q * np.exp(-self.s * d)
        if k == "waxman_threshold":
            return np.where(d <= self.r, self.q * np.exp(-self.s * d), 0.0)
        if k == "threshold":
            return np.where(d <= self.r, self.q, 0.0)
        if k == "ger":
            return np.full_like(d, self.q)
        if k == "power_law":
            return self.q * (1.0 + self.theta1 * d) ** (-self.theta2)
        if k == "cauchy":
            return self.q / (1.0 + self.theta1 * d * d)
        if k == "exponential":
            with np.errstate(divide="ignore", over="ignore"):
                v = self.q * np.exp(-d) / (self.L - d)
            return np.where(d < self.L, v, 0.0)
        if k == "max_entropy":
            w = self.q * np.exp(-self.s * d)
            return w / (1.0 + w)
        out = np.asarray(self.func(d), dtype=np.float64)
        if out.shape != d.shape:
            raise ParameterError("custom model func must map arrays elementwise")
        return out

    def p(self, d) -> np.ndarray | float:
        """Link probability at distance(s) d, clamped into [0,1]."""
        scalar = np.isscalar(d)
        vals = np.clip(self._raw(np.atleast_1d(d)), 0.0, 1.0)
        return float(vals[0]) if scalar else vals

    @property
    def kind_code(self) -> int:
        return _KIND_CODES[self.kind]

    def kernel_params(self):
        """(code, q, s, r, theta1, theta2, L) for the njit evaluator."""
        return (self.kind_code, float(self.q), float(self.s), float(self.r),
                float(self.theta1), float(self.theta2), float(self.L))


def deterrence(kind: str, *, q: float = 1.0, s: float = 0.0, r: float = 0.0,
               theta1: float = 0.0, theta2: float = 0.0, L: float | None = None,
               func: Callable | None = None) -> Deterrence:
    """Build a validated model.

    L defaults to 1 except for the exponential form, where the region's
    longest link is part of the formula and must be given (the engine
    fills it in when the model is specified by name in a GenConfig).
    """
    if L is None:
        if kind == "exponential":
            raise ParameterError("exponential model needs L (longest link in the region)")
        L = 1.0
    return Deterrence(kind=kind, q=q, s=s, r=r, theta1=theta1, theta2=theta2,
                      L=L, func=func)


def link_probability(f: Deterrence, d) -> np.ndarray | float:
    return f.p(d)


@dataclass(frozen=True)
class QTable:
    """Per-offset upper bounds on the link probability.

    values[a, b] bounds p(d) for any two points in cells whose index
    offset is (+-a, +-b); values[0, 0] = p(0).
    """

    values: np.ndarray

    def upper_bound(self, di: int, dj: int) -> float:
        return float(self.values[abs(di), abs(dj)])


def build_q_table(f: Deterrence, grid: BucketGrid, metric: Metric) -> QTable:
    """Evaluate the model at every offset's minimum bucket distance."""
    mcode = metric.code
    dmin = np.empty((grid.mx, grid.my), dtype=np.float64)
    for a in range(grid.mx):
        for b in range(grid.my):
            dmin[a, b] = min_bucket_distance(grid.cell, a, b, mcode)
    vals = np.clip(f._raw(dmin), 0.0, 1.0)
    return QTable(values=np.ascontiguousarray(vals))
