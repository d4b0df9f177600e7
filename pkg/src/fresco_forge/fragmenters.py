"""The four fragmentation algorithms.

Each fragmenter maps (width, height, config) to a :class:`FragmentSet` of
fragment geometries; pixels are only touched later, at extraction time.
Every algorithm is a pure function of its inputs: all randomness flows
from ``config.seed`` through a ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import ndimage

from . import geometry
from .geometry import Polygon, Triangulation
from .raster import RasterMask

MIN_GRID_CELL_PX = 32

# Cut offsets are drawn uniformly from the central band of the polygon's
# projection extent. The band width is calibrated so that 5/10/15/20 cuts
# average about 12/42/88/151 fragments; a full-extent band runs ~30% low.
CUT_OFFSET_BAND = 0.55

# Site sampling for the eroded-Voronoi method enforces a minimum pairwise
# separation so no cell can vanish under maximum erosion plus smoothing.
SITE_SEPARATION_FACTOR = 0.55


class FragmentationMethod(str, Enum):
    SQUARE_GRID = "square_grid"
    CROSSING_CUTS = "crossing_cuts"
    NONCONVEX_PARTITION = "nonconvex_partition"
    ERODED_VORONOI = "eroded_voronoi"


@dataclass(frozen=True)
class FragmentationConfig:
    """Parameters of one fragmentation run.

    ``target_count`` is the number of fragments for the count-controlled
    methods; crossing cuts controls ``cut_count`` instead. ``rotate_fragments``
    defaults to True for the square grid and False otherwise.
    """

    method: FragmentationMethod
    target_count: int = 0
    cut_count: int = 0
    seed: int = 0
    point_multiplier: float = 4.0
    prioritize_small: bool = True
    erosion_max_px: int = 30
    smooth_contours: bool = True
    rotate_fragments: bool | None = None

    def __post_init__(self):
        if self.method != FragmentationMethod.CROSSING_CUTS and self.target_count < 1:
            raise ValueError("target_count must be >= 1")
        if self.method == FragmentationMethod.CROSSING_CUTS and self.cut_count < 0:
            raise ValueError("cut_count must be >= 0")
        if self.point_multiplier <= 1.0:
            raise ValueError("point_multiplier must be > 1")
        if self.erosion_max_px < 0:
            raise ValueError("erosion_max_px must be >= 0")

    @property
    def rotate(self) -> bool:
        if self.rotate_fragments is None:
            return self.method == FragmentationMethod.SQUARE_GRID
        return self.rotate_fragments

    def params_token(self) -> str:
        if self.method == FragmentationMethod.CROSSING_CUTS:
            return f"c{self.cut_count:02d}"
        return f"n{self.target_count:03d}"

    def params_dict(self) -> dict:
        d = {"seed": int(self.seed)}
        if self.method == FragmentationMethod.CROSSING_CUTS:
            d["cut_count"] = int(self.cut_count)
        else:
            d["target_count"] = int(self.target_count)
        if self.method == FragmentationMethod.NONCONVEX_PARTITION:
            d["point_multiplier"] = float(self.point_multiplier)
            d["prioritize_small"] = bool(self.prioritize_small)
        if self.method == FragmentationMethod.ERODED_VORONOI:
            d["erosion_max_px"] = int(self.erosion_max_px)
            d["smooth_contours"] = bool(self.smooth_contours)
        d["rotate_fragments"] = bool(self.rotate)
        return d


@dataclass(frozen=True)
class Fragment:
    """One fragment: a polygon or a raster region, plus its rotation."""

    fragment_id: str
    rotation_deg: float = 0.0
    polygon: Polygon | None = None
    mask: RasterMask | None = None

    def __post_init__(self):
        if (self.polygon is None) == (self.mask is None):
            raise ValueError("fragment needs exactly one of polygon or mask")


@dataclass(frozen=True)
class FragmentSet:
    """All fragments produced from one source frame by one method."""

    source_id: str
    method: FragmentationMethod
    fragments: tuple[Fragment, ...]
    crop_rect: tuple[int, int, int, int]
    config: FragmentationConfig

    def __post_init__(self):
        ids = [f.fragment_id for f in self.fragments]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate fragment ids within set")


def _rng(config: FragmentationConfig) -> np.random.Generator:
    return np.random.default_rng(np.uint64(config.seed))


def fragment_image(width: int, height: int, config: FragmentationConfig, source_id: str = "") -> FragmentSet:
    """Dispatch to the fragmenter selected by ``config.method``."""
    dispatch = {
        FragmentationMethod.SQUARE_GRID: fragment_square_grid,
        FragmentationMethod.CROSSING_CUTS: fragment_crossing_cuts,
        FragmentationMethod.NONCONVEX_PARTITION: fragment_nonconvex_partition,
        FragmentationMethod.ERODED_VORONOI: fragment_eroded_voronoi,
    }
    return dispatch[config.method](width, height, config, source_id)


def _grid_shape(n: int, width: int, height: int) -> tuple[int, int]:
    """rows x cols factorization of n closest to the image aspect ratio."""
    aspect = width / height
    best = None
    for rows in range(1, n + 1):
        if n % rows:
            continue
        cols = n // rows
        err = abs(cols / rows - aspect)
        if best is None or err < best[0] - 1e-12:
            best = (err, rows, cols)
    return best[1], best[2]


def fragment_square_grid(
    width: int, height: int, config: FragmentationConfig, source_id: str = ""
) -> FragmentSet:
    """Identical square fragments tiling a minimally cropped frame."""
    if config.method != FragmentationMethod.SQUARE_GRID:
        raise ValueError("config method mismatch")
    n = config.target_count
    rows, cols = _grid_shape(n, width, height)
    side = min(width // cols, height // rows)
    if side < MIN_GRID_CELL_PX:
        raise ValueError("image too small")
    x0 = (width - cols * side) // 2
    y0 = (height - rows * side) // 2

    rng = _rng(config)
    rotate = config.rotate
    fragments = []
    for r in range(rows):
        for c in range(cols):
            left = x0 + c * side
            top = y0 + r * side
            poly = Polygon(
                np.array(
                    [
                        [left, top],
                        [left + side, top],
                        [left + side, top + side],
                        [left, top + side],
                    ],
                    dtype=np.float64,
                )
            )
            angle = float(rng.uniform(0.0, 360.0)) if rotate else 0.0
            fragments.append(
                Fragment(fragment_id=f"f{r * cols + c:03d}", rotation_deg=angle, polygon=poly)
            )
    return FragmentSet(
        source_id=source_id,
        method=config.method,
        fragments=tuple(fragments),
        crop_rect=(x0, y0, cols * side, rows * side),
        config=config,
    )


def fragment_crossing_cuts(
    width: int, height: int, config: FragmentationConfig, source_id: str = ""
) -> FragmentSet:
    """Straight cuts across a random convex polygon.

    Every cut is an infinite line, so each line splits all fragments it
    crosses and the piece count obeys the lazy-caterer bound
    1 + n(n + 1) / 2.
    """
    if config.method != FragmentationMethod.CROSSING_CUTS:
        raise ValueError("config method mismatch")
    rng = _rng(config)
    base = geometry.random_convex_polygon(width, height, rng)

    fragments = [base]
    for _ in range(config.cut_count):
        theta = rng.uniform(0.0, math.pi)
        direction = np.array([math.cos(theta), math.sin(theta)])
        normal = np.array([-direction[1], direction[0]])
        proj = base.vertices @ normal
        mid = (proj.min() + proj.max()) / 2.0
        half = (proj.max() - proj.min()) / 2.0 * CUT_OFFSET_BAND
        offset = rng.uniform(mid - half, mid + half)
        point = offset * normal
        fragments = [piece for f in fragments for piece in geometry.split_polygon_by_line(f, point, direction)]

    rotate = config.rotate
    out = []
    for i, poly in enumerate(fragments):
        angle = float(rng.uniform(0.0, 360.0)) if rotate else 0.0
        out.append(Fragment(fragment_id=f"f{i:03d}", rotation_deg=angle, polygon=poly))
    return FragmentSet(
        source_id=source_id,
        method=config.method,
        fragments=tuple(out),
        crop_rect=(0, 0, width, height),
        config=config,
    )


class _MergeState:
    """Triangle-set fragments over a shared triangulation."""

    def __init__(self, tri: Triangulation):
        self.tri = tri
        areas = tri.simplex_areas()
        m = len(tri.simplices)
        self.members: dict[int, set[int]] = {i: {i} for i in range(m)}
        self.areas: dict[int, float] = {i: float(areas[i]) for i in range(m)}
        self.neighbors: dict[int, set[int]] = {i: set() for i in range(m)}
        for i in range(m):
            for j in tri.neighbors[i]:
                if j >= 0:
                    self.neighbors[i].add(int(j))

    def boundary_edges(self, frag_id: int) -> list[tuple[int, int]]:
        counts: dict[tuple[int, int], int] = {}
        for t in self.members[frag_id]:
            a, b, c = self.tri.simplices[t]
            for u, w in ((a, b), (b, c), (c, a)):
                key = (int(u), int(w)) if u < w else (int(w), int(u))
                counts[key] = counts.get(key, 0) + 1
        return [e for e, c in counts.items() if c == 1]

    def can_merge(self, a: int, b: int) -> bool:
        union = self.members[a] | self.members[b]
        counts: dict[tuple[int, int], int] = {}
        for t in union:
            x, y, z = self.tri.simplices[t]
            for u, w in ((x, y), (y, z), (z, x)):
                key = (int(u), int(w)) if u < w else (int(w), int(u))
                counts[key] = counts.get(key, 0) + 1
        boundary = [e for e, c in counts.items() if c == 1]
        return geometry.chain_edges_to_ring(boundary) is not None

    def merge(self, keep: int, absorb: int) -> None:
        self.members[keep] |= self.members.pop(absorb)
        self.areas[keep] += self.areas.pop(absorb)
        moved = self.neighbors.pop(absorb)
        for n in moved:
            nbrs = self.neighbors[n]
            nbrs.discard(absorb)
            if n != keep:
                nbrs.add(keep)
        self.neighbors[keep] |= moved
        self.neighbors[keep].discard(keep)
        self.neighbors[keep].discard(absorb)

    def to_polygon(self, frag_id: int) -> Polygon:
        ring = geometry.chain_edges_to_ring(self.boundary_edges(frag_id))
        if ring is None:
            raise ValueError("fragment boundary is not a simple ring")
        return Polygon.from_points(self.tri.points[np.array(ring)])


def fragment_nonconvex_partition(
    width: int, height: int, config: FragmentationConfig, source_id: str = ""
) -> FragmentSet:
    """Delaunay simplices merged down to the target fragment count.

    With ``prioritize_small`` the globally smallest fragment absorbs its
    smallest edge-adjacent neighbor at every step (ties on fragment id),
    which keeps piece sizes similar. Without it, merge partners are picked
    uniformly at random.
    """
    if config.method != FragmentationMethod.NONCONVEX_PARTITION:
        raise ValueError("config method mismatch")
    n = config.target_count
    rng = _rng(config)
    r_points = int(math.ceil(config.point_multiplier * n))
    points = np.stack(
        [rng.uniform(0.0, width, r_points), rng.uniform(0.0, height, r_points)], axis=1
    )
    tri = geometry.delaunay_triangulate(points)
    if n > len(tri.simplices):
        raise ValueError("too many fragments requested")

    state = _MergeState(tri)
    if config.prioritize_small:
        _merge_prioritized(state, n)
    else:
        _merge_random(state, n, rng)

    rotate = config.rotate
    fragments = []
    for i, frag_id in enumerate(sorted(state.members)):
        poly = state.to_polygon(frag_id)
        angle = float(rng.uniform(0.0, 360.0)) if rotate else 0.0
        fragments.append(Fragment(fragment_id=f"f{i:03d}", rotation_deg=angle, polygon=poly))
    return FragmentSet(
        source_id=source_id,
        method=config.method,
        fragments=tuple(fragments),
        crop_rect=(0, 0, width, height),
        config=config,
    )


def _merge_prioritized(state: _MergeState, n: int) -> None:
    """Repeatedly fold the globally smallest fragment into its smallest
    edge-adjacent neighbor (ties on fragment id); stale heap entries are
    skipped lazily. A fragment whose every merge would pinch or punch a
    hole is deferred until another merge changes its neighborhood."""
    import heapq

    heap = [(area, i) for i, area in state.areas.items()]
    heapq.heapify(heap)
    while len(state.members) > n:
        skipped = []
        merged = False
        while heap:
            area, frag = heapq.heappop(heap)
            if frag not in state.members or state.areas[frag] != area:
                continue
            partners = sorted(state.neighbors[frag], key=lambda j: (state.areas[j], j))
            for partner in partners:
                if state.can_merge(frag, partner):
                    keep = min(frag, partner)
                    state.merge(keep, max(frag, partner))
                    heapq.heappush(heap, (state.areas[keep], keep))
                    merged = True
                    break
            if merged:
                break
            skipped.append((area, frag))
        for item in skipped:
            heapq.heappush(heap, item)
        if not merged:
            raise ValueError("cannot reach target fragment count")


def _merge_random(state: _MergeState, n: int, rng: np.random.Generator) -> None:
    """Merge a uniformly random fragment with a uniformly random neighbor."""
    while len(state.members) > n:
        merged = False
        ids = sorted(state.members)
        for frag in rng.permutation(ids):
            frag = int(frag)
            partners = sorted(state.neighbors[frag])
            if not partners:
                continue
            for partner in rng.permutation(partners):
                partner = int(partner)
                if state.can_merge(frag, partner):
                    state.merge(min(frag, partner), max(frag, partner))
                    merged = True
                    break
            if merged:
                break
        if not merged:
            raise ValueError("cannot reach target fragment count")


def _sample_sites(
    width: int, height: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Distinct pixel-center sites with a minimum pairwise separation."""
    if n > width * height:
        raise ValueError("too many sites for image")
    separation = SITE_SEPARATION_FACTOR * math.sqrt(width * height / n)
    while True:
        margin = min(separation / 2.0, (min(width, height) - 1) / 2.0)
        lo_x, hi_x = int(math.ceil(margin)), int(math.floor(width - 1 - margin))
        lo_y, hi_y = int(math.ceil(margin)), int(math.floor(height - 1 - margin))
        if hi_x < lo_x or hi_y < lo_y:
            separation *= 0.8
            continue
        accepted: list[tuple[int, int]] = []
        sep2 = separation * separation
        for _ in range(400 * n):
            x = int(rng.integers(lo_x, hi_x + 1))
            y = int(rng.integers(lo_y, hi_y + 1))
            if all((x - ax) ** 2 + (y - ay) ** 2 >= sep2 for ax, ay in accepted):
                accepted.append((x, y))
                if len(accepted) == n:
                    sites = np.array(accepted, dtype=np.float64) + 0.5
                    return sites
        if separation < 1.0:
            raise ValueError("too many sites for image")
        separation *= 0.8


def fragment_eroded_voronoi(
    width: int, height: int, config: FragmentationConfig, source_id: str = ""
) -> FragmentSet:
    """Voronoi cells shrunk by a random per-cell erosion, then smoothed."""
    if config.method != FragmentationMethod.ERODED_VORONOI:
        raise ValueError("config method mismatch")
    if config.erosion_max_px > min(width, height) / 4:
        raise ValueError("erosion_max_px exceeds a quarter of the image side")
    n = config.target_count
    rng = _rng(config)
    sites = _sample_sites(width, height, n, rng)
    labels = geometry.voronoi_labels(sites, width, height)

    pad = 3  # room for the smoothing disc
    slices = ndimage.find_objects(labels + 1)
    rotate = config.rotate
    fragments = []
    for i in range(n):
        sl = slices[i]
        cell = labels[sl] == i
        oy, ox = sl[0].start, sl[1].start
        radius = int(rng.integers(0, config.erosion_max_px + 1))
        # Halve the radius until something survives; radius 0 leaves the
        # cell intact, so only smoothing a degenerate cell can still fail.
        shaped = _erode_and_smooth(cell, radius, config.smooth_contours, pad)
        while shaped is None and radius > 0:
            radius //= 2
            shaped = _erode_and_smooth(cell, radius, config.smooth_contours, pad)
        if shaped is None:
            raise ValueError("cell vanished under erosion")
        local, (dy, dx) = shaped
        mask = RasterMask(alpha=local.astype(np.float32), origin=(ox + dx, oy + dy))
        angle = float(rng.uniform(0.0, 360.0)) if rotate else 0.0
        fragments.append(Fragment(fragment_id=f"f{i:03d}", rotation_deg=angle, mask=mask))

    return FragmentSet(
        source_id=source_id,
        method=config.method,
        fragments=tuple(fragments),
        crop_rect=(0, 0, width, height),
        config=config,
    )


def _erode_and_smooth(cell: np.ndarray, radius: int, smooth: bool, pad: int):
    """Erode a cell and optionally smooth it; None when nothing survives.

    Returns (support, (dy, dx)) where the offsets locate the returned
    bounding box relative to the cell array.
    """
    if radius > 0:
        padded = np.pad(cell, 1)
        distance = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
        support = distance > radius
    else:
        support = cell
    if not support.any():
        return None
    if smooth:
        from .raster import SMOOTH_DISC_PX, _disc

        disc = _disc(SMOOTH_DISC_PX // 2)
        work = np.pad(support, pad)
        work = ndimage.binary_closing(ndimage.binary_opening(work, structure=disc), structure=disc)
        # Clip to the parent cell: closing may bridge a notch outwards, but
        # a fragment must never annex a neighboring cell's territory.
        support = work[pad:-pad, pad:-pad] & cell
        if not support.any():
            return None
    rows = np.flatnonzero(support.any(axis=1))
    cols = np.flatnonzero(support.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    return support[r0:r1, c0:c1], (r0, c0)
