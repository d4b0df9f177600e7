"""Rasterization of fragment geometry and RGBA fragment extraction.

This module is the single place where geometry is discretized: membership
is decided by a pixel-center-in-polygon test, and all masks stay binary
(0.0 or 1.0) so that pixel counts are meaningful for area accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry import Polygon

# Background fill for pixels outside the fragment contour. The alpha
# channel carries the truth; the fill is cosmetic.
DEFAULT_FILL = (128, 128, 128)

# Contour smoothing uses a disc 5 pixels across (radius 2).
SMOOTH_DISC_PX = 5


@dataclass(frozen=True)
class RasterMask:
    """Per-pixel membership map of a fragment within its bounding box.

    ``alpha`` is (height, width) float32 in [0, 1]; ``origin`` is the
    (x, y) offset of the box in source-image coordinates.
    """

    alpha: np.ndarray = field(repr=False)
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float32)
        if a.ndim != 2:
            raise ValueError("mask alpha must be 2-D")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("mask alpha outside [0, 1]")
        if not (a > 0).any():
            raise ValueError("empty mask")
        object.__setattr__(self, "alpha", a)

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    def pixel_count(self) -> int:
        return int((self.alpha > 0.5).sum())

    def support(self) -> np.ndarray:
        return self.alpha > 0.5


@dataclass(frozen=True)
class FragmentImage:
    """RGBA fragment raster with its mask and applied rotation."""

    pixels: np.ndarray = field(repr=False)
    mask: RasterMask = field(repr=False)
    rotation_deg: float = 0.0
    fragment_id: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 4:
            raise ValueError("pixels must be (h, w, 4) RGBA")
        if px.shape[:2] != self.mask.alpha.shape:
            raise ValueError("pixel grid does not match mask")
        object.__setattr__(self, "pixels", px)


def rasterize_polygon(polygon: Polygon, crop_rect) -> RasterMask:
    """Binary mask of the pixels whose centers fall inside the polygon.

    Scanline fill with half-open intervals on both axes, so polygons that
    tile a region rasterize to disjoint masks that cover every pixel
    exactly once. Raises ``ValueError("sub-pixel fragment")`` when no
    pixel center is covered.
    """
    cx, cy, cw, ch = (int(v) for v in crop_rect)
    xmin, ymin, xmax, ymax = polygon.bounds
    x0 = max(cx, int(math.floor(xmin)))
    y0 = max(cy, int(math.floor(ymin)))
    x1 = min(cx + cw, int(math.ceil(xmax)))
    y1 = min(cy + ch, int(math.ceil(ymax)))
    if x1 <= x0 or y1 <= y0:
        raise ValueError("sub-pixel fragment")

    height, width = y1 - y0, x1 - x0
    alpha = np.zeros((height, width), dtype=np.float32)
    v = polygon.vertices
    n = len(v)
    ys = np.arange(y0, y1, dtype=np.float64) + 0.5

    crossings: list[list[float]] = [[] for _ in range(height)]
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        if ay == by:
            continue
        ylo, yhi = (ay, by) if ay < by else (by, ay)
        rows = np.nonzero((ys >= ylo) & (ys < yhi))[0]
        if len(rows) == 0:
            continue
        xs = ax + (ys[rows] - ay) * (bx - ax) / (by - ay)
        for r, xc in zip(rows, xs):
            crossings[int(r)].append(float(xc))

    for r, xs_row in enumerate(crossings):
        if not xs_row:
            continue
        xs_row.sort()
        for k in range(0, len(xs_row) - 1, 2):
            left = max(x0, math.ceil(xs_row[k] - 0.5))
            right = min(x1, math.ceil(xs_row[k + 1] - 0.5))
            if right > left:
                alpha[r, left - x0:right - x0] = 1.0

    if not (alpha > 0).any():
        raise ValueError("sub-pixel fragment")
    return _tighten(RasterMask(alpha=alpha, origin=(x0, y0)))


def _tighten(mask: RasterMask) -> RasterMask:
    """Crop a mask to the bounding box of its support."""
    support = mask.alpha > 0.5
    rows = np.flatnonzero(support.any(axis=1))
    cols = np.flatnonzero(support.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    if (r0, c0) == (0, 0) and (r1, c1) == mask.alpha.shape:
        return mask
    ox, oy = mask.origin
    return RasterMask(alpha=mask.alpha[r0:r1, c0:c1], origin=(ox + c0, oy + r0))


def _disc(radius: int) -> np.ndarray:
    yy, xx = np.ogrid[-radius:radius + 1, -radius:radius + 1]
    return (xx * xx + yy * yy) <= radius * radius


def erode_mask(mask: RasterMask, radius_px: int) -> RasterMask:
    """Morphological erosion by a Euclidean disc of the given radius.

    A pixel survives iff the whole disc around it lies in the support;
    pixels beyond the mask's bounding box count as background. Raises
    ``ValueError("mask vanished")`` when nothing survives.
    """
    if radius_px < 0:
        raise ValueError("negative erosion radius")
    if radius_px == 0:
        return mask
    support = mask.support()
    padded = np.pad(support, 1)
    distance = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    eroded = distance > radius_px
    if not eroded.any():
        raise ValueError("mask vanished")
    return RasterMask(alpha=eroded.astype(np.float32), origin=mask.origin)


def smooth_mask(mask: RasterMask) -> RasterMask:
    """Open-then-close the mask with a disc 5 pixels across.

    Removes protrusions and islands thinner than the disc while keeping
    the bulk of the support in place.
    """
    radius = SMOOTH_DISC_PX // 2
    disc = _disc(radius)
    pad = radius + 1
    support = np.pad(mask.support(), pad)
    opened = ndimage.binary_opening(support, structure=disc)
    closed = ndimage.binary_closing(opened, structure=disc)
    # Closing never escapes the bounding rectangle of its input, so the
    # original window is safe to crop back to.
    out = closed[pad:-pad, pad:-pad]
    if not out.any():
        raise ValueError("mask vanished")
    return _tighten(RasterMask(alpha=out.astype(np.float32), origin=mask.origin))


def rotate_fragment(fragment: FragmentImage, degrees: float, fill_color=None) -> FragmentImage:
    """Rotate a fragment counter-clockwise, enlarging the canvas.

    Color channels are resampled bilinearly (alpha-premultiplied so the
    background never bleeds in); the mask is rotated identically and
    re-binarized at 0.5. Right-angle multiples are lossless.
    """
    angle = float(degrees) % 360.0
    if angle == 0.0:
        return replace(fragment, rotation_deg=fragment.rotation_deg + degrees)
    if fill_color is None:
        outside = fragment.pixels[fragment.mask.alpha <= 0.5]
        fill_color = tuple(int(c) for c in outside[0][:3]) if len(outside) else DEFAULT_FILL

    if angle % 90.0 == 0.0:
        k = int(angle // 90) % 4
        pixels = np.rot90(fragment.pixels, k=k, axes=(0, 1)).copy()
        alpha = np.rot90(fragment.mask.alpha, k=k, axes=(0, 1)).copy()
        mask = RasterMask(alpha=alpha, origin=fragment.mask.origin)
        return FragmentImage(
            pixels=pixels,
            mask=mask,
            rotation_deg=fragment.rotation_deg + degrees,
            fragment_id=fragment.fragment_id,
        )

    alpha = fragment.mask.alpha.astype(np.float64)
    premultiplied = fragment.pixels[..., :3].astype(np.float64) * alpha[..., None]
    rgb_rot = ndimage.rotate(
        premultiplied, angle, axes=(0, 1), reshape=True, order=1, mode="constant", cval=0.0
    )
    alpha_rot = ndimage.rotate(
        alpha, angle, axes=(0, 1), reshape=True, order=1, mode="constant", cval=0.0
    )
    support = alpha_rot >= 0.5
    if not support.any():
        raise ValueError("mask vanished")

    weight = np.maximum(alpha_rot, 1e-6)[..., None]
    colors = np.clip(rgb_rot / weight + 0.5, 0, 255)
    out = np.empty((*support.shape, 4), dtype=np.uint8)
    out[..., :3] = np.where(support[..., None], colors, np.array(fill_color, dtype=np.float64)).astype(np.uint8)
    out[..., 3] = np.where(support, 255, 0).astype(np.uint8)
    mask = RasterMask(alpha=support.astype(np.float32), origin=fragment.mask.origin)
    return FragmentImage(
        pixels=out,
        mask=mask,
        rotation_deg=fragment.rotation_deg + degrees,
        fragment_id=fragment.fragment_id,
    )


def extract_fragment(
    source: np.ndarray,
    region,
    fill_color=DEFAULT_FILL,
    rotation_deg: float = 0.0,
    fragment_id: str = "",
) -> FragmentImage:
    """Cut a fragment out of a source image.

    ``region`` is a :class:`Polygon` (rasterized against the full source
    rect) or a ready :class:`RasterMask`. Pixels inside the mask copy the
    source; outside pixels get ``fill_color`` with alpha 0. Rotation is
    applied last.
    """
    src = np.asarray(source)
    if src.ndim != 3 or src.shape[2] not in (3, 4):
        raise ValueError("source must be (h, w, 3|4)")
    h, w = src.shape[:2]

    if isinstance(region, Polygon):
        mask = rasterize_polygon(region, (0, 0, w, h))
    elif isinstance(region, RasterMask):
        mask = _tighten(region)
    else:
        raise TypeError("region must be a Polygon or RasterMask")

    ox, oy = mask.origin
    if ox < 0 or oy < 0 or ox + mask.width > w or oy + mask.height > h:
        raise ValueError("region outside source bounds")
    support = mask.support()
    if not support.any():
        raise ValueError("empty fragment")

    window = src[oy:oy + mask.height, ox:ox + mask.width, :3]
    pixels = np.empty((mask.height, mask.width, 4), dtype=np.uint8)
    pixels[..., :3] = np.where(support[..., None], window, np.array(fill_color, dtype=np.uint8))
    pixels[..., 3] = np.where(support, 255, 0).astype(np.uint8)

    fragment = FragmentImage(pixels=pixels, mask=mask, rotation_deg=0.0, fragment_id=fragment_id)
    if rotation_deg % 360.0 != 0.0:
        fragment = rotate_fragment(fragment, rotation_deg, fill_color=fill_color)
    return fragment


def save_png(fragment: FragmentImage, path) -> None:
    Image.fromarray(fragment.pixels, mode="RGBA").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Load an image file as an (h, w, 4) RGBA uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGBA"), dtype=np.uint8).copy()


def fragment_file_name(source_id: str, method: str, params_token: str, fragment_id: str) -> str:
    return f"{source_id}__{method}__{params_token}__{fragment_id}.png"
