"""Planar regions and the square-cell grid that covers them.

Regions are closed subsets of the plane, anchored so the bounding box
starts at the origin (polygons keep their own vertex frame).  The grid
cover slices the bounding box into square cells of side max(w, h) / M
with M cells along the longer dimension; the short dimension gets as
many cells as needed to cover it, so the top row / right column may
overhang the region.

Bucket convention used throughout the package: cell (i, j) means column
i along x, row j along y, with linear index b = i * my + j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ParameterError

REGION_RECT = 0
REGION_ELLIPSE = 1
REGION_POLYGON = 2

_EMPTY_F64 = np.empty(0, dtype=np.float64)


# ---------------------------------------------------------------------------
# point membership (numba-friendly so the node fill kernel can call it)

@njit(cache=True, nogil=True)
def region_contains(code, params, poly_x, poly_y, x, y):
    """Closed-region membership test for a single point."""
    if code == REGION_RECT:
        return 0.0 <= x <= params[0] and 0.0 <= y <= params[1]
    if code == REGION_ELLIPSE:
        a = params[0]
        b = params[1]
        dx = (x - a) / a
        dy = (y - b) / b
        return dx * dx + dy * dy <= 1.0
    # polygon: boundary counts as inside, then even-odd crossing rule
    n = poly_x.shape[0]
    inside = False
    j = n - 1
    for i in range(n):
        xi = poly_x[i]
        yi = poly_y[i]
        xj = poly_x[j]
        yj = poly_y[j]
        # on-segment check
        cross = (xj - xi) * (y - yi) - (yj - yi) * (x - xi)
        if cross == 0.0:
            if min(xi, xj) <= x <= max(xi, xj) and min(yi, yj) <= y <= max(yi, yj):
                return True
        if (yi > y) != (yj > y):
            x_hit = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_hit:
                inside = not inside
        j = i
    return inside


@njit(cache=True, nogil=True)
def _contains_many(code, params, poly_x, poly_y, xs, ys, out):
    for i in range(xs.shape[0]):
        out[i] = region_contains(code, params, poly_x, poly_y, xs[i], ys[i])


# ---------------------------------------------------------------------------
# exact intersection areas

def _circle_corner(x: float, y: float) -> float:
    """Area of the unit disk within {u <= x, v <= y}."""
    x = min(max(x, -1.0), 1.0)
    y = min(max(y, -1.0), 1.0)

    def S(u: float) -> float:
        # primitive of sqrt(1 - u^2)
        return 0.5 * (u * math.sqrt(max(0.0, 1.0 - u * u)) + math.asin(u))

    t = math.sqrt(max(0.0, 1.0 - y * y))
    if y >= 0.0:
        area = 0.0
        hi = min(x, -t)
        if hi > -1.0:
            area += 2.0 * (S(hi) - S(-1.0))
        hi = min(x, t)
        if hi > -t:
            area += y * (hi + t) + S(hi) - S(-t)
        if x > t:
            area += 2.0 * (S(x) - S(t))
        return area
    lo = -t
    hi = min(x, t)
    if hi <= lo:
        return 0.0
    return y * (hi - lo) + S(hi) - S(lo)


def circle_rect_area(x0: float, y0: float, x1: float, y1: float) -> float:
    """Area of the unit disk intersected with [x0,x1] x [y0,y1], closed form."""
    a = (_circle_corner(x1, y1) - _circle_corner(x0, y1)
         - _circle_corner(x1, y0) + _circle_corner(x0, y0))
    return max(0.0, a)


def clip_polygon(sx, sy, x0: float, y0: float, x1: float, y1: float):
    """Sutherland-Hodgman clip of a polygon against an axis-aligned rect.

    Returns vertex lists (possibly empty).  Concave subjects come out
    with zero-area bridges, which the shoelace area handles correctly.
    """
    verts = list(zip(sx, sy))

    def clip_edge(pts, inside, intersect):
        out = []
        n = len(pts)
        for i in range(n):
            cur = pts[i]
            prev = pts[i - 1]
            cin = inside(cur)
            pin = inside(prev)
            if cin:
                if not pin:
                    out.append(intersect(prev, cur))
                out.append(cur)
            elif pin:
                out.append(intersect(prev, cur))
        return out

    def ix_at_x(xv):
        def f(p, q):
            t = (xv - p[0]) / (q[0] - p[0])
            return (xv, p[1] + t * (q[1] - p[1]))
        return f

    def ix_at_y(yv):
        def f(p, q):
            t = (yv - p[1]) / (q[1] - p[1])
            return (p[0] + t * (q[0] - p[0]), yv)
        return f

    verts = clip_edge(verts, lambda p: p[0] >= x0, ix_at_x(x0))
    if verts:
        verts = clip_edge(verts, lambda p: p[0] <= x1, ix_at_x(x1))
    if verts:
        verts = clip_edge(verts, lambda p: p[1] >= y0, ix_at_y(y0))
    if verts:
        verts = clip_edge(verts, lambda p: p[1] <= y1, ix_at_y(y1))
    return [p[0] for p in verts], [p[1] for p in verts]


def shoelace_area(xs, ys) -> float:
    """Signed polygon area; positive for counterclockwise order."""
    n = len(xs)
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        j = (i + 1) % n
        s += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * s


# ---------------------------------------------------------------------------
# regions

class Region:
    """Common interface: area, bbox, membership, uniform sampling."""

    code: int = -1

    @property
    def area(self) -> float:
        raise NotImplementedError

    def bbox(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def kernel_args(self):
        """(code, params, poly_x, poly_y) for the numba kernels."""
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def contains(self, x: float, y: float) -> bool:
        code, params, px, py = self.kernel_args()
        return bool(region_contains(code, params, px, py, float(x), float(y)))

    def contains_many(self, xs, ys) -> np.ndarray:
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        ys = np.ascontiguousarray(ys, dtype=np.float64)
        out = np.empty(xs.shape[0], dtype=np.bool_)
        code, params, px, py = self.kernel_args()
        _contains_many(code, params, px, py, xs, ys, out)
        return out

    def cell_intersection_area(self, x0, y0, x1, y1) -> float:
        """Exact area of region intersected with a closed rectangle."""
        raise NotImplementedError

    def rect_fully_inside(self, x0, y0, x1, y1) -> bool:
        """True only when [x0,x1]x[y0,y1] is certainly inside the region.

        May answer False for rectangles that are in fact inside
        (conservative); used to skip membership tests during fill.
        """
        raise NotImplementedError

    def sample(self, rng, count: int) -> tuple[np.ndarray, np.ndarray]:
        """count uniform points, by rejection from the bounding box."""
        count = int(count)
        bx0, by0, bx1, by1 = self.bbox()
        w = bx1 - bx0
        h = by1 - by0
        ratio = self.area / (w * h)
        xs = np.empty(count, dtype=np.float64)
        ys = np.empty(count, dtype=np.float64)
        have = 0
        while have < count:
            need = count - have
            batch = max(1024, int(need / max(ratio, 1e-6) * 1.1))
            u = rng.uniforms(2 * batch)
            cx = bx0 + u[:batch] * w
            cy = by0 + u[batch:] * h
            keep = self.contains_many(cx, cy)
            k = min(int(keep.sum()), need)
            xs[have:have + k] = cx[keep][:k]
            ys[have:have + k] = cy[keep][:k]
            have += k
        return xs, ys


class Rectangle(Region):
    code = REGION_RECT

    def __init__(self, width: float, height: float):
        width = float(width)
        height = float(height)
        if not (width > 0 and height > 0) or not (math.isfinite(width) and math.isfinite(height)):
            raise ParameterError(f"rectangle needs positive finite sides, got {width} x {height}")
        self.width = width
        self.height = height

    @property
    def area(self) -> float:
        return self.width * self.height

    def bbox(self):
        return (0.0, 0.0, self.width, self.height)

    def kernel_args(self):
        return (REGION_RECT, np.array([self.width, self.height]), _EMPTY_F64, _EMPTY_F64)

    def describe(self) -> str:
        return f"rect:{self.width:g},{self.height:g}"

    def cell_intersection_area(self, x0, y0, x1, y1) -> float:
        w = min(x1, self.width) - max(x0, 0.0)
        h = min(y1, self.height) - max(y0, 0.0)
        if w <= 0.0 or h <= 0.0:
            return 0.0
        return w * h

    def rect_fully_inside(self, x0, y0, x1, y1) -> bool:
        return x0 >= 0.0 and y0 >= 0.0 and x1 <= self.width and y1 <= self.height


class Ellipse(Region):
    """Axis-aligned ellipse with semi-axes (a, b), centered at (a, b)."""

    code = REGION_ELLIPSE

    def __init__(self, a: float, b: float):
        a = float(a)
        b = float(b)
        if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
            raise ParameterError(f"ellipse needs positive finite semi-axes, got {a}, {b}")
        self.a = a
        self.b = b

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def bbox(self):
        return (0.0, 0.0, 2.0 * self.a, 2.0 * self.b)

    def kernel_args(self):
        return (REGION_ELLIPSE, np.array([self.a, self.b]), _EMPTY_F64, _EMPTY_F64)

    def describe(self) -> str:
        return f"ellipse:{self.a:g},{self.b:g}"

    def cell_intersection_area(self, x0, y0, x1, y1) -> float:
        # map to the unit disk and scale the result back by a*b
        a, b = self.a, self.b
        area = circle_rect_area((x0 - a) / a, (y0 - b) / b, (x1 - a) / a, (y1 - b) / b)
        return area * a * b

    def rect_fully_inside(self, x0, y0, x1, y1) -> bool:
        # convexity: a rectangle is inside iff its four corners are
        for cx in (x0, x1):
            for cy in (y0, y1):
                if not self.contains(cx, cy):
                    return False
        return True


class Polygon(Region):
    """Simple polygon, stored counterclockwise, implicitly closed."""

    code = REGION_POLYGON

    def __init__(self, xs, ys):
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        ys = np.ascontiguousarray(ys, dtype=np.float64)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise ParameterError("polygon needs matching 1-d coordinate arrays")
        if xs.size and xs[0] == xs[-1] and ys[0] == ys[-1]:
            xs = xs[:-1]
            ys = ys[:-1]
        if xs.size < 3:
            raise ParameterError(f"polygon needs at least 3 vertices, got {xs.size}")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise ParameterError("polygon vertices must be finite")
        signed = shoelace_area(xs, ys)
        if signed < 0:
            xs = xs[::-1].copy()
            ys = ys[::-1].copy()
            signed = -signed
        if signed <= 0.0:
            raise ParameterError("polygon has zero area")
        self._check_simple(xs, ys)
        self.xs = xs
        self.ys = ys
        self._area = signed

    @staticmethod
    def _check_simple(xs, ys):
        n = xs.size
        for i in range(n):
            a = (xs[i], ys[i])
            b = (xs[(i + 1) % n], ys[(i + 1) % n])
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or j == (i + 1) % n:
                    continue  # adjacent edges share a vertex
                c = (xs[j], ys[j])
                d = (xs[(j + 1) % n], ys[(j + 1) % n])
                if _segments_cross(a, b, c, d):
                    raise ParameterError(
                        f"polygon is self-intersecting (edges {i} and {j} cross)")

    @property
    def area(self) -> float:
        return self._area

    def bbox(self):
        return (float(self.xs.min()), float(self.ys.min()),
                float(self.xs.max()), float(self.ys.max()))

    def kernel_args(self):
        return (REGION_POLYGON, _EMPTY_F64, self.xs, self.ys)

    def describe(self) -> str:
        return f"polygon:{self.xs.size} vertices"

    def cell_intersection_area(self, x0, y0, x1, y1) -> float:
        cx, cy = clip_polygon(self.xs, self.ys, x0, y0, x1, y1)
        return max(0.0, shoelace_area(cx, cy))

    def rect_fully_inside(self, x0, y0, x1, y1) -> bool:
        # corners inside and no polygon edge near the rectangle
        # (edge bounding boxes as a conservative stand-in for crossing)
        for cx in (x0, x1):
            for cy in (y0, y1):
                if not self.contains(cx, cy):
                    return False
        ex0 = np.minimum(self.xs, np.roll(self.xs, -1))
        ex1 = np.maximum(self.xs, np.roll(self.xs, -1))
        ey0 = np.minimum(self.ys, np.roll(self.ys, -1))
        ey1 = np.maximum(self.ys, np.roll(self.ys, -1))
        overlap = (ex0 <= x1) & (ex1 >= x0) & (ey0 <= y1) & (ey1 >= y0)
        return not bool(overlap.any())


def _segments_cross(a, b, c, d) -> bool:
    """True when open segments ab and cd properly intersect or overlap."""
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True

    def on_seg(p, q, r):
        return (orient(p, q, r) == 0
                and min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
                and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))

    return on_seg(a, b, c) or on_seg(a, b, d) or on_seg(c, d, a) or on_seg(c, d, b)


# ---------------------------------------------------------------------------
# parsing

def load_polygon(path: str) -> Polygon:
    """Read a polygon from a text file of whitespace-separated x y pairs.

    Blank lines and text after '#' are ignored; the polygon is closed
    implicitly (a repeated final vertex is tolerated).
    """
    values: list[float] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                body = line.split("#", 1)[0].strip()
                if not body:
                    continue
                for tok in body.split():
                    try:
                        values.append(float(tok))
                    except ValueError:
                        raise ParameterError(
                            f"{path}:{lineno}: not a number: {tok!r}") from None
    except OSError as exc:
        raise exc
    if len(values) % 2 != 0:
        raise ParameterError(f"{path}: odd number of coordinates ({len(values)})")
    arr = np.asarray(values, dtype=np.float64).reshape(-1, 2)
    return Polygon(arr[:, 0], arr[:, 1])


def parse_region(text: str) -> Region:
    """Parse 'rect:W,H', 'ellipse:A,B' or 'polygon:PATH'."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ParameterError(f"region {text!r} is missing ':' (e.g. rect:1,1)")
    kind = kind.strip().lower()
    if kind == "polygon":
        return load_polygon(rest.strip())
    parts = rest.split(",")
    if len(parts) != 2:
        raise ParameterError(f"region {text!r} needs two comma-separated numbers")
    try:
        u, v = float(parts[0]), float(parts[1])
    except ValueError:
        raise ParameterError(f"region {text!r} has non-numeric dimensions") from None
    if kind == "rect":
        return Rectangle(u, v)
    if kind == "ellipse":
        return Ellipse(u, v)
    raise ParameterError(f"unknown region kind {kind!r} (rect, ellipse, polygon)")


# ---------------------------------------------------------------------------
# grid cover

@dataclass
class BucketGrid:
    """Square-cell cover of a region's bounding box.

    areas[i, j] is the exact area of region AND cell (i, j); probs is
    the row-major (i * my + j) flattening normalized by total area.
    """

    region: Region
    m: int                      # requested cell count along the longer side
    mx: int
    my: int
    cell: float
    ox: float
    oy: float
    areas: np.ndarray
    probs: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)  # cells certainly inside the region

    @property
    def n_buckets(self) -> int:
        return self.mx * self.my

    def cell_bounds(self, i: int, j: int) -> tuple[float, float, float, float]:
        x0 = self.ox + i * self.cell
        y0 = self.oy + j * self.cell
        return (x0, y0, x0 + self.cell, y0 + self.cell)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell owning a point; shared boundaries go to the lower index."""
        i = self._axis_cell(x - self.ox, self.mx)
        j = self._axis_cell(y - self.oy, self.my)
        return i, j

    def _axis_cell(self, v: float, m: int) -> int:
        k = int(math.floor(v / self.cell))
        if k > 0 and k * self.cell == v:
            k -= 1
        return min(max(k, 0), m - 1)

    def bucket_index(self, i: int, j: int) -> int:
        return i * self.my + j


def _axis_cells(extent: float, cell: float) -> int:
    """Number of cells needed so that k*cell tiles past extent."""
    k = int(math.floor(extent / cell))
    return k + 1 if k * cell < extent else k


def cover_with_grid(region: Region, m: int) -> BucketGrid:
    """Cover region with square cells, m along the longer bbox side."""
    m = int(m)
    if m < 1:
        raise ParameterError(f"grid needs at least 1 cell per side, got {m}")
    x0, y0, x1, y1 = region.bbox()
    w = x1 - x0
    h = y1 - y0
    cell = max(w, h) / m
    if not (cell > 0 and math.isfinite(cell)):
        raise ParameterError("region bounding box is degenerate")
    mx = m if w >= h else _axis_cells(w, cell)
    my = m if h > w else _axis_cells(h, cell)
    areas = np.empty((mx, my), dtype=np.float64)
    interior = np.zeros((mx, my), dtype=np.bool_)
    for i in range(mx):
        cx0 = x0 + i * cell
        for j in range(my):
            cy0 = y0 + j * cell
            areas[i, j] = region.cell_intersection_area(cx0, cy0, cx0 + cell, cy0 + cell)
            interior[i, j] = region.rect_fully_inside(cx0, cy0, cx0 + cell, cy0 + cell)
    total = float(areas.sum())
    if total <= 0.0:
        raise ParameterError("grid cells do not intersect the region")
    probs = (areas / total).ravel()
    return BucketGrid(region=region, m=m, mx=mx, my=my, cell=cell,
                      ox=x0, oy=y0, areas=areas, probs=probs, interior=interior)


METRIC_L2 = 0
METRIC_L1 = 1
METRIC_L0 = 2
METRIC_LINF = 3


@njit(cache=True, nogil=True)
def min_bucket_distance(cell, di, dj, metric_code):
    """Lower bound on the distance between points of two grid cells.

    di, dj are index offsets between the cells.  The bound comes from
    the per-axis gaps g = max(|d| - 1, 0) * cell; cells that touch
    (|d| <= 1) have gap 0 on that axis.
    """
    ai = di if di >= 0 else -di
    aj = dj if dj >= 0 else -dj
    gx = (ai - 1) * cell if ai > 1 else 0.0
    gy = (aj - 1) * cell if aj > 1 else 0.0
    if metric_code == METRIC_L2:
        return math.hypot(gx, gy)
    if metric_code == METRIC_L1:
        return gx + gy
    if metric_code == METRIC_L0:
        d = 0.0
        if gx > 0.0:
            d += 1.0
        if gy > 0.0:
            d += 1.0
        return d
    return max(gx, gy)
