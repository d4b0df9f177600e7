"""Seeded synthetic wall-painting textures.

Stand-ins for real fresco scans in tests and demos: each style index gets
a visually distinct palette and pattern family so that downstream
classifiers have a clean signal to learn.
"""

from __future__ import annotations

import numpy as np

_PALETTES = {
    1: ((178, 34, 34), (240, 200, 150)),    # veined blocks, ochre on red
    2: ((40, 26, 80), (200, 180, 60)),      # columns, gold on dark blue
    3: ((24, 120, 80), (235, 240, 230)),    # broad pale planes, thin green lines
    4: ((120, 40, 110), (250, 160, 40)),    # busy speckle, orange on purple
}


def synthetic_fresco(style_k: int, width: int, height: int, seed: int = 0) -> np.ndarray:
    """An (h, w, 3) uint8 texture for the given style index.

    Styles 1-4 have dedicated palettes and patterns; higher indices reuse
    the pattern families with rotated palettes.
    """
    if style_k < 1:
        raise ValueError("style index must be >= 1")
    rng = np.random.default_rng(np.uint64(seed))
    base, accent = _PALETTES.get((style_k - 1) % 4 + 1)
    if style_k > 4:
        base, accent = accent, base

    ys, xs = np.mgrid[0:height, 0:width]
    family = (style_k - 1) % 4 + 1
    if family == 1:
        # coarse horizontal banding with marbled noise
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(ys / max(8.0, height / 12.0) + phase)
        pattern = (wave > 0).astype(np.float64)
    elif family == 2:
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(xs / max(6.0, width / 24.0) + phase)
        pattern = np.clip(wave * 2.0 + 0.5, 0, 1)
    elif family == 3:
        pattern = ((xs // max(4, width // 10) + ys // max(4, height // 10)) % 7 == 0).astype(np.float64)
    else:
        pattern = rng.random((height, width))
        pattern = (pattern > 0.7).astype(np.float64)

    noise = rng.normal(0.0, 12.0, size=(height, width, 1))
    base_arr = np.asarray(base, dtype=np.float64)
    accent_arr = np.asarray(accent, dtype=np.float64)
    img = base_arr + pattern[..., None] * (accent_arr - base_arr) + noise
    return np.clip(img, 0, 255).astype(np.uint8)
