import json

import numpy as np
import pytest
from PIL import Image


def make_fragment_png(path, size=40, seed=0, color=None):
    """RGBA fragment with a roughly elliptical alpha mask."""
    rng = np.random.default_rng(seed)
    base = color if color is not None else rng.integers(0, 255, 3)
    pixels = np.empty((size, size, 4), dtype=np.uint8)
    noise = rng.normal(0, 15, (size, size, 3))
    pixels[..., :3] = np.clip(np.asarray(base, dtype=float) + noise, 0, 255)
    ys, xs = np.mgrid[0:size, 0:size]
    cy = cx = (size - 1) / 2
    mask = ((xs - cx) / (size * 0.45)) ** 2 + ((ys - cy) / (size * 0.38)) ** 2 <= 1.0
    pixels[..., 3] = np.where(mask, 255, 0)
    pixels[~mask, :3] = 128
    Image.fromarray(pixels, "RGBA").save(path)


def write_mini_dataset(root, per_class=3, classes=2, split="train", size=40):
    """A small manifest + fragment PNGs in the generator's layout."""
    (root / "fragments").mkdir(parents=True, exist_ok=True)
    palette = [(200, 40, 40), (40, 80, 200), (40, 180, 80), (220, 180, 40)]
    rows = []
    index = 0
    for k in range(1, classes + 1):
        for j in range(per_class):
            fid = f"src{k}{j}__square_grid__n004__f{index:03d}"
            rel = f"fragments/{fid}.png"
            make_fragment_png(root / rel, size=size, seed=index, color=palette[k - 1])
            rows.append(
                {
                    "fragment_id": fid,
                    "source_id": f"src{k}{j}",
                    "style_k": k,
                    "style_name": f"Style {k}",
                    "method": "square_grid",
                    "params": {"target_count": 4},
                    "area_px": size * size // 2,
                    "bbox": [0, 0, size, size],
                    "rotation_deg": 0.0,
                    "split": split,
                    "file_path": rel,
                }
            )
            index += 1
    manifest = root / "manifest.jsonl"
    with manifest.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return manifest


@pytest.fixture()
def mini_manifest(tmp_path):
    return write_mini_dataset(tmp_path)
