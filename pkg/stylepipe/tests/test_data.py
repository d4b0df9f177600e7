import numpy as np
import pytest
import torch
from PIL import Image

from stylepipe.data import FragmentDataset, letterbox_rgba, read_manifest

from conftest import write_mini_dataset


def test_read_manifest(mini_manifest):
    entries = read_manifest(mini_manifest)
    assert len(entries) == 6
    assert {e.style_k for e in entries} == {1, 2}
    assert all(e.split == "train" for e in entries)


def test_letterbox_preserves_aspect():
    img = Image.new("RGBA", (100, 50), (255, 0, 0, 255))
    boxed = letterbox_rgba(img, 64)
    arr = np.asarray(boxed)
    assert arr.shape == (64, 64, 4)
    # content occupies a 64x32 band; padding has alpha 0
    assert (arr[16:48, :, 3] == 255).all()
    assert (arr[:16, :, 3] == 0).all()
    assert (arr[48:, :, 3] == 0).all()


def test_dataset_items(mini_manifest):
    ds = FragmentDataset(mini_manifest, "train", image_size=64)
    assert len(ds) == 6
    image, mask, label, fid = ds[0]
    assert image.shape == (3, 64, 64)
    assert mask.shape == (1, 64, 64)
    assert 0.0 <= float(image.min()) and float(image.max()) <= 1.0
    assert 0.0 <= float(mask.min()) and float(mask.max()) <= 1.0
    assert label in (0, 1)
    assert fid == ds.entries[0].fragment_id
    # entries are sorted by fragment id
    ids = [e.fragment_id for e in ds.entries]
    assert ids == sorted(ids)


def test_dataset_deterministic(mini_manifest):
    a = FragmentDataset(mini_manifest, "train", image_size=32)
    b = FragmentDataset(mini_manifest, "train", image_size=32)
    xa, ma, la, _ = a[3]
    xb, mb, lb, _ = b[3]
    assert torch.equal(xa, xb) and torch.equal(ma, mb) and la == lb


def test_dataset_empty_split(mini_manifest):
    with pytest.raises(ValueError, match="no fragments in split 'test'"):
        FragmentDataset(mini_manifest, "test")


def test_dataset_missing_file_lists_path(tmp_path):
    manifest = write_mini_dataset(tmp_path)
    ds = FragmentDataset(manifest, "train", image_size=32)
    victim = tmp_path / ds.entries[2].file_path
    victim.unlink()
    with pytest.raises(FileNotFoundError, match=str(victim)):
        _ = ds[2]


def test_dataset_k_counts_all_styles(tmp_path):
    manifest = write_mini_dataset(tmp_path, classes=4)
    ds = FragmentDataset(manifest, "train", image_size=32)
    assert ds.k == 4
