import json

import numpy as np
import pytest

from fresco_forge.dataset import (
    StyleLabel,
    area_statistics,
    assign_splits,
    build_manifest,
    read_manifest,
    record_from_json,
    record_to_json,
    write_manifest,
)
from fresco_forge.fragmenters import FragmentationConfig, FragmentationMethod, fragment_square_grid


LABELS = {
    "a": StyleLabel(1, "Style 1"),
    "b": StyleLabel(2, "Style 2"),
}


def _grid_set(source_id, n=12, seed=0, size=(640, 480)):
    cfg = FragmentationConfig(method=FragmentationMethod.SQUARE_GRID, target_count=n, seed=seed)
    return fragment_square_grid(size[0], size[1], cfg, source_id)


# ---------------------------------------------------------------- manifest


def test_manifest_counts_two_sources(tmp_path):
    sets = [_grid_set("a", seed=1), _grid_set("b", seed=2)]
    records = build_manifest(sets, LABELS, tmp_path)
    assert len(records) == 24
    assert [r.source_id for r in records] == ["a"] * 12 + ["b"] * 12
    assert records == sorted(records, key=lambda r: (r.source_id, r.fragment_id))


def test_manifest_empty_input(tmp_path):
    assert build_manifest([], {}, tmp_path) == []


def test_manifest_unlabeled_source(tmp_path):
    with pytest.raises(ValueError, match="unlabeled source: b"):
        build_manifest([_grid_set("b")], {"a": StyleLabel(1, "Style 1")}, tmp_path)


def test_manifest_duplicate_ids(tmp_path):
    fset = _grid_set("a")
    with pytest.raises(ValueError, match="duplicate fragment id"):
        build_manifest([fset, fset], LABELS, tmp_path)


def test_manifest_area_is_mask_pixel_count(tmp_path):
    records = build_manifest([_grid_set("a", n=12, size=(648, 480))], LABELS, tmp_path)
    # 4x3 grid over 648x480 -> side 160 -> every square has 160^2 pixels.
    assert {r.area_px for r in records} == {160 * 160}
    for r in records:
        assert r.bbox[2] == 160 and r.bbox[3] == 160


def test_manifest_roundtrip_and_field_names(tmp_path):
    records = build_manifest([_grid_set("a")], LABELS, tmp_path)
    records = assign_splits(records, (0.0, 0.0, 1.0), seed=3)
    path = tmp_path / "manifest.jsonl"
    write_manifest(records, path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == len(records)
    first = json.loads(lines[0])
    assert set(first) == {
        "fragment_id", "source_id", "style_k", "style_name", "method",
        "params", "area_px", "bbox", "rotation_deg", "split", "file_path",
    }
    loaded = read_manifest(path)
    assert loaded == records


def test_record_json_roundtrip(tmp_path):
    record = build_manifest([_grid_set("a")], LABELS, tmp_path)[0]
    assert record_from_json(record_to_json(record)) == record


# ---------------------------------------------------------------- splits


def _fake_records(tmp_path, n_sources=10, per_source=4):
    sets = [_grid_set(f"src{i:02d}", n=per_source, seed=i) for i in range(n_sources)]
    labels = {f"src{i:02d}": StyleLabel(i % 3 + 1, f"Style {i % 3 + 1}") for i in range(n_sources)}
    return build_manifest(sets, labels, tmp_path)


def test_splits_ten_sources(tmp_path):
    records = _fake_records(tmp_path)
    out = assign_splits(records, (0.7, 0.15, 0.15), seed=5)
    per_split_sources = {
        name: {r.source_id for r in out if r.split == name} for name in ("train", "val", "test")
    }
    assert len(per_split_sources["train"]) == 7
    assert 1 <= len(per_split_sources["val"]) <= 2
    assert 1 <= len(per_split_sources["test"]) <= 2
    again = assign_splits(records, (0.7, 0.15, 0.15), seed=5)
    assert again == out


def test_splits_all_train(tmp_path):
    records = _fake_records(tmp_path)
    out = assign_splits(records, (1.0, 0.0, 0.0), seed=1)
    assert all(r.split == "train" for r in out)


def test_splits_leak_free_over_seeds(tmp_path):
    records = _fake_records(tmp_path, n_sources=7)
    for seed in range(100):
        out = assign_splits(records, (0.6, 0.2, 0.2), seed=seed)
        by_source = {}
        for r in out:
            by_source.setdefault(r.source_id, set()).add(r.split)
        assert all(len(s) == 1 for s in by_source.values())


def test_splits_too_few_sources(tmp_path):
    records = _fake_records(tmp_path, n_sources=2)
    with pytest.raises(ValueError, match="fewer sources"):
        assign_splits(records, (0.7, 0.15, 0.15), seed=0)


def test_splits_bad_ratios(tmp_path):
    records = _fake_records(tmp_path, n_sources=4)
    with pytest.raises(ValueError, match="sum to 1"):
        assign_splits(records, (0.5, 0.2, 0.2), seed=0)


# ---------------------------------------------------------------- statistics


def _records_with_areas(tmp_path, areas, method="square_grid"):
    import dataclasses

    base = build_manifest([_grid_set("a", n=4)], LABELS, tmp_path)
    records = []
    for i, area in enumerate(areas):
        records.append(dataclasses.replace(base[i % 4], area_px=int(area), method=method,
                                           fragment_id=f"r{i:04d}"))
    return records


def test_stats_all_equal(tmp_path):
    records = _records_with_areas(tmp_path, [100] * 8)
    stats = area_statistics(records)["square_grid"]
    assert stats.variance_px == 0.0
    assert stats.cv == 0.0
    assert stats.count == 8
    assert sum(stats.histogram["counts"]) == 8


def test_stats_one_and_three(tmp_path):
    records = _records_with_areas(tmp_path, [1, 3])
    stats = area_statistics(records)["square_grid"]
    assert stats.mean_px == 2.0
    assert stats.variance_px == 1.0  # population variance
    assert stats.cv == 0.5
    assert stats.min_px == 1 and stats.max_px == 3


def test_stats_match_two_pass_oracle(tmp_path):
    rng = np.random.default_rng(0)
    areas = rng.integers(10, 100000, size=500)
    records = _records_with_areas(tmp_path, areas)
    stats = area_statistics(records)["square_grid"]
    mean = sum(areas) / len(areas)
    variance = sum((a - mean) ** 2 for a in areas) / len(areas)
    assert stats.mean_px == pytest.approx(mean, rel=1e-12)
    assert stats.variance_px == pytest.approx(variance, rel=1e-9)
    assert stats.cv == pytest.approx(np.sqrt(variance) / mean, rel=1e-9)
    assert len(stats.histogram["counts"]) == 32
    assert sum(stats.histogram["counts"]) == 500


def test_stats_group_by_source(tmp_path):
    sets = [_grid_set("a", seed=1), _grid_set("b", seed=2, size=(960, 480))]
    records = build_manifest(sets, LABELS, tmp_path)
    stats = area_statistics(records, group_by="source")
    assert set(stats) == {"a", "b"}
    manual_a = [r.area_px for r in records if r.source_id == "a"]
    assert stats["a"].count == len(manual_a)
    assert stats["a"].mean_px == pytest.approx(np.mean(manual_a))


def test_stats_empty_group_omitted(tmp_path):
    records = _fake_records(tmp_path, n_sources=3)
    stats = area_statistics(records)
    assert set(stats) == {"square_grid"}
