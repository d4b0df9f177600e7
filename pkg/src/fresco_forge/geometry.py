"""2-D polygon primitives and partitioning algorithms.

Coordinates are in image pixel units. Polygons are stored with positive
shoelace area ("counter-clockwise" in the stored axis convention) and must
be simple. All randomized helpers take an explicit ``numpy.random.Generator``
so results are a pure function of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay as _SciPyDelaunay
from scipy.spatial import QhullError, cKDTree

# Absolute tolerance for orientation / intersection predicates at pixel
# scale; predicates on coordinates of magnitude ~1e4 still leave ~1e-9
# of double-precision headroom.
TOL = 1e-9


def _signed_area(vertices: np.ndarray) -> float:
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(o, a, b) -> float:
    """Twice the signed area of triangle (o, a, b)."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _predicate_eps(vertices: np.ndarray) -> float:
    scale = float(np.max(np.abs(vertices))) if len(vertices) else 1.0
    return TOL * max(1.0, scale * scale)


def _on_segment(p, a, b, eps) -> bool:
    if abs(_orient(a, b, p)) > eps:
        return False
    return (
        min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps
        and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps
    )


def _segments_intersect(p1, p2, p3, p4, eps) -> bool:
    """True if closed segments [p1,p2] and [p3,p4] share any point."""
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    return (
        _on_segment(p1, p3, p4, eps)
        or _on_segment(p2, p3, p4, eps)
        or _on_segment(p3, p1, p2, eps)
        or _on_segment(p4, p1, p2, eps)
    )


@dataclass(frozen=True)
class Point2:
    """A point in image pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("non-finite point coordinates")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with positive (counter-clockwise) signed area.

    ``vertices`` is an (n, 2) float array, n >= 3. Construction validates
    finiteness, orientation, non-degeneracy, and simplicity; use
    :meth:`from_points` to accept either winding order.
    """

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("polygon vertices must be an (n, 2) array")
        if len(v) < 3:
            raise ValueError("degenerate polygon: fewer than 3 vertices")
        if not np.isfinite(v).all():
            raise ValueError("non-finite polygon coordinates")
        object.__setattr__(self, "vertices", v)
        area = _signed_area(v)
        if abs(area) <= TOL:
            raise ValueError("degenerate polygon")
        if area < 0:
            raise ValueError("polygon must be counter-clockwise")
        if not self._is_simple():
            raise ValueError("polygon is not simple")

    @classmethod
    def from_points(cls, points) -> "Polygon":
        """Build a polygon from points in either winding order."""
        v = np.asarray(points, dtype=np.float64)
        if v.ndim == 2 and len(v) >= 3 and _signed_area(v) < 0:
            v = v[::-1].copy()
        return cls(v)

    def _is_simple(self) -> bool:
        v = self.vertices
        n = len(v)
        # Linear (not quadratic) coordinate scaling here: an oversized
        # tolerance would reject legitimate thin slivers produced by
        # repeated cuts.
        eps = TOL * max(1.0, float(np.max(np.abs(v))))
        # Repeated vertices make adjacent edges degenerate.
        for i in range(n):
            j = (i + 1) % n
            if abs(v[i, 0] - v[j, 0]) <= eps and abs(v[i, 1] - v[j, 1]) <= eps:
                return False
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n], eps):
                    return False
        return True

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax)."""
        v = self.vertices
        return (
            float(v[:, 0].min()),
            float(v[:, 1].min()),
            float(v[:, 0].max()),
            float(v[:, 1].max()),
        )


@dataclass(frozen=True)
class Triangulation:
    """Triangulation of a planar point set.

    ``simplices`` holds vertex-index triples oriented counter-clockwise;
    ``neighbors[i, k]`` is the simplex sharing the edge opposite vertex
    ``simplices[i, k]``, or -1 on the hull.
    """

    points: np.ndarray = field(repr=False)
    simplices: np.ndarray = field(repr=False)
    neighbors: np.ndarray = field(repr=False)

    def simplex_polygon(self, i: int) -> Polygon:
        return Polygon(self.points[self.simplices[i]])

    def simplex_areas(self) -> np.ndarray:
        p = self.points[self.simplices]
        return 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )


def polygon_area(p) -> float:
    """Shoelace area of a polygon (strictly positive).

    Accepts a :class:`Polygon` or a raw (n, 2) vertex array; raises
    ``ValueError("degenerate polygon")`` when the area vanishes.
    """
    v = p.vertices if isinstance(p, Polygon) else np.asarray(p, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise ValueError("degenerate polygon")
    area = abs(_signed_area(v))
    if area <= TOL:
        raise ValueError("degenerate polygon")
    return area


def is_convex(p) -> bool:
    """True when every turn along the boundary is in one direction.

    Collinear vertices (zero cross product within tolerance) are allowed.
    """
    v = p.vertices if isinstance(p, Polygon) else np.asarray(p, dtype=np.float64)
    n = len(v)
    eps = _predicate_eps(v)
    ref = 0.0
    for i in range(n):
        cross = _orient(v[i], v[(i + 1) % n], v[(i + 2) % n])
        if abs(cross) <= eps:
            continue
        if ref == 0.0:
            ref = cross
        elif cross * ref < 0:
            return False
    return True


def split_polygon_by_line(p: Polygon, point, direction) -> list[Polygon]:
    """Split a convex polygon by the infinite line through ``point``.

    Returns two convex polygons when the line crosses the interior,
    otherwise ``[p]`` unchanged. Parts conserve the input area.
    """
    if not is_convex(p):
        raise ValueError("convex input required")
    point = np.asarray(point, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    norm = float(np.hypot(direction[0], direction[1]))
    if norm <= TOL:
        raise ValueError("zero cut direction")
    normal = np.array([-direction[1], direction[0]]) / norm

    v = p.vertices
    s = (v - point) @ normal
    # Signed distances are in pixel units, so the absolute tolerance applies.
    if not ((s > TOL).any() and (s < -TOL).any()):
        return [p]

    left: list[np.ndarray] = []
    right: list[np.ndarray] = []
    n = len(v)
    for i in range(n):
        j = (i + 1) % n
        si, sj = s[i], s[j]
        if si >= -TOL:
            left.append(v[i])
        if si <= TOL:
            right.append(v[i])
        if (si > TOL and sj < -TOL) or (si < -TOL and sj > TOL):
            t = si / (si - sj)
            cut = v[i] + t * (v[j] - v[i])
            left.append(cut)
            right.append(cut)

    parts = []
    for chain in (left, right):
        arr = _dedupe_ring(np.array(chain))
        if len(arr) >= 3 and abs(_signed_area(arr)) > TOL:
            parts.append(Polygon.from_points(arr))
    if len(parts) != 2:
        return [p]
    return parts


def _dedupe_ring(v: np.ndarray) -> np.ndarray:
    if len(v) == 0:
        return v
    keep = [0]
    for i in range(1, len(v)):
        if not np.allclose(v[i], v[keep[-1]], rtol=0.0, atol=TOL):
            keep.append(i)
    if len(keep) > 1 and np.allclose(v[keep[0]], v[keep[-1]], rtol=0.0, atol=TOL):
        keep.pop()
    return v[keep]


def delaunay_triangulate(points) -> Triangulation:
    """Delaunay triangulation of a point set (via Qhull).

    Simplices are reoriented counter-clockwise with neighbor entries kept
    consistent. Raises ``ValueError("insufficient points")`` for fewer than
    three points or an all-collinear set.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("insufficient points")
    try:
        tri = _SciPyDelaunay(pts)
    except QhullError as exc:
        raise ValueError("insufficient points") from exc
    if len(tri.simplices) == 0:
        raise ValueError("insufficient points")

    simplices = tri.simplices.astype(np.int64).copy()
    neighbors = tri.neighbors.astype(np.int64).copy()
    p = pts[simplices]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = det < 0
    # Swapping vertices 1 and 2 flips orientation; the opposite-vertex
    # neighbor convention requires the same swap in the neighbor rows.
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    neighbors[flip] = neighbors[flip][:, [0, 2, 1]]
    return Triangulation(points=pts, simplices=simplices, neighbors=neighbors)


def chain_edges_to_ring(edges) -> list | None:
    """Order undirected edges into a single simple cycle of vertex keys.

    Returns the vertex keys in traversal order, or None when the edges do
    not form exactly one cycle visiting each vertex once (holes, pinch
    points, or disconnected pieces).
    """
    adjacency: dict = {}
    for u, w in edges:
        adjacency.setdefault(u, []).append(w)
        adjacency.setdefault(w, []).append(u)
    if not adjacency:
        return None
    for nbrs in adjacency.values():
        if len(nbrs) != 2:
            return None
    start = next(iter(adjacency))
    ring = [start]
    prev = None
    current = start
    while True:
        a, b = adjacency[current]
        nxt = b if a == prev else a
        if nxt == start:
            break
        ring.append(nxt)
        prev, current = current, nxt
        if len(ring) > len(adjacency):
            return None
    if len(ring) != len(adjacency):
        return None
    return ring


def merge_polygons(a: Polygon, b: Polygon, shared_boundary=None) -> Polygon:
    """Merge two polygons that share a boundary chain.

    Vertices along the shared chain must coincide exactly (as produced by
    splitting or triangulating a common parent). The merged boundary keeps
    any collinear vertices it inherits. Raises ``ValueError("not
    mergeable")`` for disjoint, overlapping, or hole-creating inputs.
    """
    edges_a = _directed_edges(a)
    edges_b = _directed_edges(b)
    reversed_b = {(w, u) for (u, w) in edges_b}
    shared = [e for e in edges_a if e in reversed_b]
    if not shared:
        raise ValueError("not mergeable")
    if shared_boundary is not None:
        wanted = {_edge_key(p, q) for p, q in shared_boundary}
        have = {frozenset(e) for e in shared}
        if not wanted <= have:
            raise ValueError("not mergeable")

    shared_set = set(shared)
    remaining = [e for e in edges_a if e not in shared_set]
    shared_rev = {(w, u) for (u, w) in shared}
    remaining += [e for e in edges_b if e not in shared_rev]

    ring = chain_edges_to_ring([tuple(e) for e in remaining])
    if ring is None:
        raise ValueError("not mergeable")
    vertices = np.array(ring, dtype=np.float64)
    merged = Polygon.from_points(vertices)
    total = polygon_area(a) + polygon_area(b)
    if abs(polygon_area(merged) - total) > 1e-9 * total:
        raise ValueError("not mergeable")
    return merged


def _directed_edges(p: Polygon) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    v = p.vertices
    keys = [(float(x), float(y)) for x, y in v]
    return [(keys[i], keys[(i + 1) % len(keys)]) for i in range(len(keys))]


def _edge_key(p, q) -> frozenset:
    return frozenset(((float(p[0]), float(p[1])), (float(q[0]), float(q[1]))))


def convex_hull(points) -> np.ndarray:
    """Convex hull (monotone chain), counter-clockwise, collinear points dropped."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, dtype=np.float64)})
    if len(pts) < 3:
        return np.array(pts, dtype=np.float64)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _orient(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _orient(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


# random_convex_polygon samples this many points and keeps their hull,
# resampling until the hull covers at least MIN_AREA_FRACTION of the bounds.
HULL_SAMPLE_POINTS = 12
HULL_INSET = 0.8
MIN_AREA_FRACTION = 0.25


def random_convex_polygon(width: float, height: float, rng: np.random.Generator) -> Polygon:
    """Random convex polygon inside a width x height rectangle.

    Convex hull of uniform points drawn from the centered 80%-inset
    rectangle, resampled until the hull area reaches 25% of the bounds.
    """
    if width <= 0 or height <= 0:
        raise ValueError("bounds must be positive")
    x_lo, x_hi = width * (1 - HULL_INSET) / 2, width * (1 + HULL_INSET) / 2
    y_lo, y_hi = height * (1 - HULL_INSET) / 2, height * (1 + HULL_INSET) / 2
    best = None
    best_area = -1.0
    for _ in range(1000):
        xs = rng.uniform(x_lo, x_hi, HULL_SAMPLE_POINTS)
        ys = rng.uniform(y_lo, y_hi, HULL_SAMPLE_POINTS)
        hull = convex_hull(np.stack([xs, ys], axis=1))
        if len(hull) < 3:
            continue
        area = _signed_area(hull)
        if area >= MIN_AREA_FRACTION * width * height:
            return Polygon(hull)
        if area > best_area:
            best, best_area = hull, area
    return Polygon(best)


def voronoi_labels(sites, width: int, height: int) -> np.ndarray:
    """Label each pixel with the index of its nearest site.

    Distances are Euclidean to pixel centers (x + 0.5, y + 0.5). Exact ties
    are resolved deterministically. Returns an (height, width) int32 array.
    """
    sites = np.atleast_2d(np.asarray(sites, dtype=np.float64))
    if sites.shape[0] < 1 or sites.shape[1] != 2:
        raise ValueError("at least one site required")
    if len(np.unique(sites, axis=0)) != len(sites):
        raise ValueError("duplicate sites")
    n = len(sites)

    ix = sites[:, 0] - 0.5
    iy = sites[:, 1] - 0.5
    on_centers = (
        np.all(ix == np.round(ix))
        and np.all(iy == np.round(iy))
        and np.all((ix >= 0) & (ix < width) & (iy >= 0) & (iy < height))
    )
    if on_centers:
        labels = _labels_from_grid_sites(ix.astype(np.int64), iy.astype(np.int64), width, height)
    else:
        labels = _labels_from_tree(sites, width, height)

    counts = np.bincount(labels.ravel(), minlength=n)
    if (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"empty voronoi cell for site {empty}")
    return labels


def _labels_from_grid_sites(ix, iy, width, height) -> np.ndarray:
    # Exact Euclidean feature transform; fast path when sites sit on the
    # pixel grid, which is how the fragmenters place them.
    occupied = np.ones((height, width), dtype=bool)
    occupied[iy, ix] = False
    indices = ndimage.distance_transform_edt(
        occupied, return_distances=False, return_indices=True
    )
    site_index = np.empty((height, width), dtype=np.int32)
    site_index[iy, ix] = np.arange(len(ix), dtype=np.int32)
    return site_index[indices[0], indices[1]]


def _labels_from_tree(sites, width, height) -> np.ndarray:
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    _, idx = cKDTree(sites).query(centers, k=1)
    return idx.reshape(height, width).astype(np.int32)
