"""Dataset access: manifest parsing and fragment loading.

Reads the generator's JSON-Lines manifest and fragment PNGs directly off
disk; this package never imports the generator. Fragments are letterboxed
(aspect-preserving resize plus background padding) to a square model
input, and the PNG alpha channel becomes the soft fragment mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

LETTERBOX_FILL = (128, 128, 128)


@dataclass(frozen=True)
class ManifestEntry:
    fragment_id: str
    source_id: str
    style_k: int
    split: str
    file_path: str


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            entries.append(
                ManifestEntry(
                    fragment_id=row["fragment_id"],
                    source_id=row["source_id"],
                    style_k=int(row["style_k"]),
                    split=row["split"],
                    file_path=row["file_path"],
                )
            )
    return entries


def num_styles(entries) -> int:
    return max(e.style_k for e in entries)


def letterbox_rgba(image: Image.Image, size: int) -> Image.Image:
    """Aspect-preserving resize onto a size x size canvas.

    The canvas carries the background fill with alpha 0, so padding reads
    as background to both the mask and the models.
    """
    scale = size / max(image.width, image.height)
    new_w = max(1, round(image.width * scale))
    new_h = max(1, round(image.height * scale))
    resized = image.resize((new_w, new_h), Image.BILINEAR)
    canvas = Image.new("RGBA", (size, size), (*LETTERBOX_FILL, 0))
    canvas.paste(resized, ((size - new_w) // 2, (size - new_h) // 2))
    return canvas


class FragmentDataset(Dataset):
    """Fragments of one split as (image, mask, label, fragment_id) tuples.

    Images are float RGB in [0, 1]; masks are the letterboxed alpha
    channel in [0, 1] with shape (1, size, size); labels are 0-based.
    """

    def __init__(self, manifest_path, split: str, image_size: int = 224):
        manifest_path = Path(manifest_path)
        all_entries = read_manifest(manifest_path)
        if split == "all":
            self.entries = all_entries
        else:
            self.entries = [e for e in all_entries if e.split == split]
        if not self.entries:
            raise ValueError(f"no fragments in split '{split}'")
        self.entries.sort(key=lambda e: e.fragment_id)
        self.root = manifest_path.parent
        self.image_size = image_size
        self.k = num_styles(all_entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int):
        entry = self.entries[index]
        path = self.root / entry.file_path
        if not path.is_file():
            raise FileNotFoundError(f"fragment file missing: {path}")
        with Image.open(path) as img:
            boxed = letterbox_rgba(img.convert("RGBA"), self.image_size)
        array = np.asarray(boxed, dtype=np.float32) / 255.0
        rgb = torch.from_numpy(array[..., :3].copy()).permute(2, 0, 1)
        mask = torch.from_numpy(array[..., 3].copy()).unsqueeze(0)
        return rgb, mask, entry.style_k - 1, entry.fragment_id
