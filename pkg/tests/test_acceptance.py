"""Acceptance gate for the generation and evaluation engine.

Each test implements one shipping criterion at its stated tolerance and
prints a PASS line; any failure fails the suite. The heavier criteria are
batched over seeds, so this module takes a few minutes in total.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest
from PIL import Image

from fresco_forge.dataset import fragment_mask
from fresco_forge.fragmenters import (
    FragmentationConfig,
    FragmentationMethod,
    _sample_sites,
    fragment_image,
)
from fresco_forge.geometry import convex_hull, polygon_area, voronoi_labels
from fresco_forge.metrics import metrics_report, recall_from_precision_f1
from fresco_forge.synthetic import synthetic_fresco

from test_metrics import brute_force_report

W, H = 1024, 768
COUNT_METHODS = (
    FragmentationMethod.SQUARE_GRID,
    FragmentationMethod.NONCONVEX_PARTITION,
    FragmentationMethod.ERODED_VORONOI,
)


def _report(name, detail):
    print(f"{name} PASS: {detail}")


# ----------------------------------------------------------------------


def test_ac1_fragment_count_exactness():
    """AC-1: count-controlled methods hit N exactly on 20 seeded frames."""
    started = time.perf_counter()
    for seed in range(20):
        for method in COUNT_METHODS:
            for n in (12, 40, 84, 160):
                cfg = FragmentationConfig(method=method, target_count=n, seed=seed * 1000 + n)
                fset = fragment_image(W, H, cfg, f"img{seed:02d}")
                assert len(fset.fragments) == n, (method, n, seed)
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0, f"AC-1 exceeded runtime budget: {elapsed:.1f}s"
    _report("AC-1", f"3 methods x 4 counts x 20 seeds all exact ({elapsed:.1f}s)")


def test_ac2_crossing_cuts_calibration():
    """AC-2: mean counts near 12/42/88/151 and the lazy-caterer bound."""
    started = time.perf_counter()
    targets = {5: 12, 10: 42, 15: 88, 20: 151}
    means = {}
    for cuts, target in targets.items():
        counts = []
        bound = 1 + cuts * (cuts + 1) // 2
        for seed in range(200):
            cfg = FragmentationConfig(
                method=FragmentationMethod.CROSSING_CUTS, cut_count=cuts, seed=seed
            )
            fset = fragment_image(W, H, cfg)
            count = len(fset.fragments)
            assert count <= bound, f"lazy-caterer bound violated at cuts={cuts} seed={seed}"
            counts.append(count)
        mean = float(np.mean(counts))
        means[cuts] = mean
        assert abs(mean - target) <= 0.25 * target, (
            f"cuts={cuts}: mean {mean:.1f} outside {target}+-25%"
        )
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0
    detail = ", ".join(f"{c} cuts -> {m:.1f}" for c, m in means.items())
    _report("AC-2", f"{detail} ({elapsed:.1f}s)")


def test_ac3_partition_conservation():
    """AC-3: exact square tiling; hull coverage; voronoi subset/disjoint."""
    started = time.perf_counter()

    # Square grids tile the crop rect exactly.
    for seed in (0, 1):
        cfg = FragmentationConfig(
            method=FragmentationMethod.SQUARE_GRID, target_count=40, seed=seed
        )
        fset = fragment_image(W, H, cfg)
        x, y, w, h = fset.crop_rect
        canvas = np.zeros((H, W), dtype=np.int32)
        for fragment in fset.fragments:
            mask = fragment_mask(fragment, fset.crop_rect)
            ox, oy = mask.origin
            canvas[oy:oy + mask.height, ox:ox + mask.width] += mask.support()
        assert (canvas[y:y + h, x:x + w] == 1).all(), "square tiling not exact"
        canvas[y:y + h, x:x + w] = 0
        assert (canvas == 0).all()

    # Non-convex partitions cover the triangulation hull within 0.5%.
    for seed in (2, 3):
        cfg = FragmentationConfig(
            method=FragmentationMethod.NONCONVEX_PARTITION, target_count=40, seed=seed
        )
        fset = fragment_image(W, H, cfg)
        canvas = np.zeros((H, W), dtype=np.int32)
        for fragment in fset.fragments:
            mask = fragment_mask(fragment, fset.crop_rect)
            ox, oy = mask.origin
            canvas[oy:oy + mask.height, ox:ox + mask.width] += mask.support()
        assert canvas.max() <= 1, "non-convex fragments overlap"
        rng = np.random.default_rng(np.uint64(seed))
        points = np.stack([rng.uniform(0, W, 160), rng.uniform(0, H, 160)], axis=1)
        hull_px = polygon_area(convex_hull(points))
        covered = int(canvas.sum())
        assert abs(covered - hull_px) <= 0.005 * hull_px, (
            f"hull coverage off: {covered} vs {hull_px:.0f}"
        )

    # Eroded-voronoi fragments are subsets of their parent cells, disjoint.
    for seed in (4, 5):
        n = 40
        rng = np.random.default_rng(np.uint64(seed))
        sites = _sample_sites(W, H, n, rng)
        labels = voronoi_labels(sites, W, H)
        cfg = FragmentationConfig(
            method=FragmentationMethod.ERODED_VORONOI, target_count=n, seed=seed
        )
        fset = fragment_image(W, H, cfg)
        canvas = np.zeros((H, W), dtype=np.int32)
        for i, fragment in enumerate(fset.fragments):
            mask = fragment.mask
            ox, oy = mask.origin
            support = mask.support()
            parent = labels[oy:oy + mask.height, ox:ox + mask.width] == i
            assert not (support & ~parent).any(), "fragment escaped its voronoi cell"
            canvas[oy:oy + mask.height, ox:ox + mask.width] += support
        assert canvas.max() <= 1, "voronoi fragments overlap"

    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    _report("AC-3", f"tiling, hull coverage and subset checks hold ({elapsed:.1f}s)")


def test_ac4_size_variance_ordering():
    """AC-4: cv(square)=0 < cv(ncp prioritized) < cv(ncp random); cc high."""
    started = time.perf_counter()
    cvs = {"square": [], "ncp_small": [], "ncp_random": [], "cuts": []}
    for seed in range(100):
        cfg = FragmentationConfig(
            method=FragmentationMethod.SQUARE_GRID, target_count=40, seed=seed
        )
        areas = np.array([polygon_area(f.polygon) for f in fragment_image(W, H, cfg).fragments])
        cvs["square"].append(areas.std() / areas.mean())

        for key, prioritize in (("ncp_small", True), ("ncp_random", False)):
            cfg = FragmentationConfig(
                method=FragmentationMethod.NONCONVEX_PARTITION,
                target_count=40,
                seed=seed,
                prioritize_small=prioritize,
            )
            areas = np.array(
                [polygon_area(f.polygon) for f in fragment_image(W, H, cfg).fragments]
            )
            cvs[key].append(areas.std() / areas.mean())

        cfg = FragmentationConfig(
            method=FragmentationMethod.CROSSING_CUTS, cut_count=10, seed=seed
        )
        areas = np.array([polygon_area(f.polygon) for f in fragment_image(W, H, cfg).fragments])
        cvs["cuts"].append(areas.std() / areas.mean())

    mean_cv = {k: float(np.mean(v)) for k, v in cvs.items()}
    assert mean_cv["square"] == 0.0
    assert mean_cv["square"] < mean_cv["ncp_small"]
    assert mean_cv["ncp_small"] < mean_cv["ncp_random"]
    assert mean_cv["square"] < mean_cv["cuts"]
    assert mean_cv["ncp_small"] < mean_cv["cuts"]
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0
    _report(
        "AC-4",
        "cv means: square={square:.3f} ncp={ncp_small:.3f} "
        "ncp-random={ncp_random:.3f} cuts={cuts:.3f} ({t:.1f}s)".format(t=elapsed, **mean_cv),
    )


def test_ac5_metrics_oracle_equivalence():
    """AC-5: 1000 random instances match a brute-force scorer to 1e-12."""
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        k = int(rng.integers(2, 12))
        n = int(rng.integers(1, 80))
        truth = rng.integers(1, k + 1, size=n)
        pred = rng.integers(1, k + 1, size=n)
        report = metrics_report(truth, pred, k)
        oracle = brute_force_report(list(truth), list(pred), k)
        assert abs(report.overall_accuracy - oracle["overall"]) <= 1e-12
        assert abs(report.macro_precision - oracle["macro_p"]) <= 1e-12
        assert abs(report.macro_recall - oracle["macro_r"]) <= 1e-12
        assert abs(report.f1 - oracle["f1"]) <= 1e-12
        for i in range(k):
            assert abs(report.per_style_accuracy[i] - oracle["acc"][i]) <= 1e-12
            assert abs(report.per_style_precision[i] - oracle["prec"][i]) <= 1e-12
            assert abs(report.per_style_recall[i] - oracle["rec"][i]) <= 1e-12
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    _report("AC-5", f"1000 instances, K in 2..11, all fields within 1e-12 ({elapsed:.1f}s)")


def test_ac6_table_back_derivation():
    """AC-6: recall recovered from reported precision 0.29 and F1 0.27."""
    recall = recall_from_precision_f1(0.29, 0.27)
    assert abs(recall - 0.253) <= 0.0005
    _report("AC-6", f"recall_from_precision_f1(0.29, 0.27) = {recall:.4f}")


def test_ac7_end_to_end_determinism(tmp_path):
    """AC-7: byte-identical outputs across reruns and worker counts."""
    started = time.perf_counter()
    source_dir = tmp_path / "sources"
    source_dir.mkdir()
    rows = ["source_id,style_k,style_name"]
    for i in range(3):
        k = i % 2 + 1
        Image.fromarray(synthetic_fresco(k, 512, 384, seed=i)).save(source_dir / f"img{i}.png")
        rows.append(f"img{i},{k},Style {k}")
    labels = source_dir / "labels.csv"
    labels.write_text("\n".join(rows) + "\n")

    outputs = []
    for name, workers in (("run1", 1), ("run2", 1), ("run3", 2)):
        out = tmp_path / name
        result = subprocess.run(
            [sys.executable, "-m", "fresco_forge.cli", "fragment",
             "--input", str(source_dir), "--labels", str(labels), "--out", str(out),
             "--pieces", "12", "--cuts", "5", "--seed", "99",
             "--erosion-max", "20", "--workers", str(workers)],
            capture_output=True, text=True,
        )
        assert result.returncode == 0, result.stderr
        outputs.append(out)

    reference = outputs[0]
    ref_manifest = (reference / "manifest.jsonl").read_bytes()
    ref_pngs = sorted((reference / "fragments").glob("*.png"))
    assert ref_pngs
    for other in outputs[1:]:
        assert (other / "manifest.jsonl").read_bytes() == ref_manifest
        for png in ref_pngs:
            assert (other / "fragments" / png.name).read_bytes() == png.read_bytes(), png.name
    elapsed = time.perf_counter() - started
    assert elapsed < 300.0
    _report(
        "AC-7",
        f"{len(ref_pngs)} fragment files and manifest byte-identical across "
        f"reruns and workers 1 vs 2 ({elapsed:.1f}s)",
    )


def test_ac8_eroded_voronoi_performance():
    """AC-8: 160 eroded-voronoi pieces from a 2048x1536 frame in < 5 s."""
    cfg = FragmentationConfig(
        method=FragmentationMethod.ERODED_VORONOI, target_count=160, seed=7
    )
    started = time.perf_counter()
    fset = fragment_image(2048, 1536, cfg)
    elapsed = time.perf_counter() - started
    assert len(fset.fragments) == 160
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    _report("AC-8", f"2048x1536 into 160 pieces in {elapsed:.2f}s (< 5s)")
