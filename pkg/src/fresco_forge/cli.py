"""Command-line interface: fragment, stats, evaluate, plot.

Exit codes: 0 success, 2 user error (bad inputs, missing data), 1
internal failure. All randomness derives from one master seed (flag
``--seed`` or env var ``FRESCO_FORGE_SEED``), streamed per work item so
results do not depend on worker scheduling.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, dataset, metrics, raster
from .dataset import StyleLabel
from .fragmenters import FragmentationConfig, FragmentationMethod, fragment_image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
DEFAULT_PIECES = (12, 40, 84, 160)
DEFAULT_CUTS = (5, 10, 15, 20)


def derive_seed(master_seed: int, *parts: str) -> int:
    """Stable per-work-item seed from the master seed and identifiers."""
    text = f"{master_seed}|" + "|".join(parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def read_labels_csv(path) -> dict[str, StyleLabel]:
    """Labels file: rows of source_id,style_k,style_name (header optional)."""
    labels: dict[str, StyleLabel] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            if row[0].strip() == "source_id":
                continue
            if len(row) < 3:
                raise ValueError(f"labels row needs source_id,style_k,style_name: {row}")
            labels[row[0].strip()] = StyleLabel(k=int(row[1]), name=row[2].strip())
    return labels


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fresco-forge",
        description="Synthesize style-labeled fragment datasets and evaluate classifiers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    frag = sub.add_parser("fragment", help="fragment labeled source images into a dataset")
    frag.add_argument("--input", required=True, help="directory of source images")
    frag.add_argument("--labels", required=True, help="CSV of source_id,style_k,style_name")
    frag.add_argument("--out", required=True, help="output dataset directory")
    frag.add_argument(
        "--method",
        action="append",
        choices=[m.value for m in FragmentationMethod],
        help="fragmentation method (repeatable; default: all)",
    )
    frag.add_argument("--pieces", action="append", type=int, help="fragment count (repeatable)")
    frag.add_argument("--cuts", action="append", type=int, help="crossing-cut count (repeatable)")
    frag.add_argument("--seed", type=int, default=None, help="master seed (env FRESCO_FORGE_SEED)")
    frag.add_argument("--split-ratios", default="0.7,0.15,0.15", help="train,val,test ratios")
    frag.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    frag.add_argument("--no-prioritize-small", action="store_true",
                      help="merge random fragments instead of smallest-first")
    frag.add_argument("--erosion-max", type=int, default=30, help="max erosion radius in px")

    stats = sub.add_parser("stats", help="fragment-area statistics from a manifest")
    stats.add_argument("--manifest", required=True)
    stats.add_argument("--group-by", choices=["method", "source"], default="method")
    stats.add_argument("--out", help="write the stats JSON here instead of stdout")
    stats.add_argument("--plot", action="store_true", help="write per-group histogram images")

    ev = sub.add_parser("evaluate", help="score a predictions CSV against manifest truth")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    ev.add_argument("--json", help="also write the report as JSON")

    plot = sub.add_parser("plot", help="write fragment-area histograms from a manifest")
    plot.add_argument("--manifest", required=True)
    plot.add_argument("--out", required=True, help="directory for histogram images")
    plot.add_argument("--group-by", choices=["method", "source"], default="method")
    return parser


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    return int(os.environ.get("FRESCO_FORGE_SEED", "0"))


def _fragment_work_item(args) -> list:
    """Worker: fragment one (image, method, param) combination to disk."""
    image_path, source_id, method_value, param, seed, out_dir, options = args
    source = raster.load_png(image_path)
    height, width = source.shape[:2]
    method = FragmentationMethod(method_value)
    config = FragmentationConfig(
        method=method,
        target_count=param if method != FragmentationMethod.CROSSING_CUTS else 1,
        cut_count=param if method == FragmentationMethod.CROSSING_CUTS else 0,
        seed=seed,
        prioritize_small=not options["no_prioritize_small"],
        erosion_max_px=options["erosion_max"],
    )
    fset = fragment_image(width, height, config, source_id)
    label = StyleLabel(k=options["labels"][source_id][0], name=options["labels"][source_id][1])
    records = dataset.build_manifest([fset], {source_id: label}, out_dir)

    out_dir = Path(out_dir)
    (out_dir / "fragments").mkdir(parents=True, exist_ok=True)
    by_id = {dataset.global_fragment_id(fset, f): f for f in fset.fragments}
    for record in records:
        fragment = by_id[record.fragment_id]
        region = fragment.mask if fragment.mask is not None else fragment.polygon
        image = raster.extract_fragment(
            source,
            region,
            rotation_deg=fragment.rotation_deg,
            fragment_id=record.fragment_id,
        )
        raster.save_png(image, out_dir / record.file_path)
    return records


def _cmd_fragment(args) -> int:
    input_dir = Path(args.input)
    if not input_dir.is_dir():
        raise ValueError(f"input directory not found: {input_dir}")
    images = sorted(
        p for p in input_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not images:
        raise ValueError(f"no images found under {input_dir}")
    labels = read_labels_csv(args.labels)
    for path in images:
        if path.stem not in labels:
            raise ValueError(f"missing label for source: {path.stem}")

    methods = [FragmentationMethod(m) for m in (args.method or [m.value for m in FragmentationMethod])]
    pieces = tuple(args.pieces or DEFAULT_PIECES)
    cuts = tuple(args.cuts or DEFAULT_CUTS)
    master_seed = _resolve_seed(args.seed)
    ratios = tuple(float(x) for x in args.split_ratios.split(","))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    options = {
        "no_prioritize_small": args.no_prioritize_small,
        "erosion_max": args.erosion_max,
        "labels": {sid: (lab.k, lab.name) for sid, lab in labels.items()},
    }
    work = []
    for path in images:
        for method in methods:
            params = cuts if method == FragmentationMethod.CROSSING_CUTS else pieces
            for param in params:
                token = f"c{param:02d}" if method == FragmentationMethod.CROSSING_CUTS else f"n{param:03d}"
                seed = derive_seed(master_seed, path.stem, method.value, token)
                work.append((str(path), path.stem, method.value, param, seed, str(out_dir), options))

    results = []
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for item, records in zip(work, pool.map(_fragment_work_item, work)):
                results.append((item, records))
    else:
        for item in work:
            results.append((item, _fragment_work_item(item)))

    all_records = [r for _, records in results for r in records]
    all_records.sort(key=lambda r: (r.source_id, r.fragment_id))
    all_records = dataset.assign_splits(all_records, ratios=ratios, seed=master_seed)
    dataset.write_manifest(all_records, out_dir / "manifest.jsonl")
    dataset.write_dataset_info(
        out_dir / "dataset.json",
        version=__version__,
        master_seed=master_seed,
        ratios=ratios,
        records=all_records,
    )

    per_method: dict[str, int] = {}
    for record in all_records:
        per_method[record.method] = per_method.get(record.method, 0) + 1
    for method in methods:
        print(f"{method.value}: {per_method.get(method.value, 0)} fragments "
              f"from {len(images)} images")
    print(f"manifest: {out_dir / 'manifest.jsonl'} ({len(all_records)} records)")
    return 0


def _load_manifest_or_fail(path):
    manifest_path = Path(path)
    if not manifest_path.is_file():
        raise ValueError(f"manifest not found: {manifest_path}")
    records = dataset.read_manifest(manifest_path)
    if not records:
        raise ValueError("manifest is empty")
    return records


def _write_histograms(records, out_dir, group_by) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for key, stats in dataset.area_statistics(records, group_by=group_by).items():
        edges = stats.histogram["bin_edges"]
        counts = stats.histogram["counts"]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(edges[:-1], counts, width=[b - a for a, b in zip(edges[:-1], edges[1:])],
               align="edge", edgecolor="black", linewidth=0.3)
        ax.set_xscale("log")
        ax.set_xlabel("fragment area (px^2)")
        ax.set_ylabel("count")
        ax.set_title(f"{key} (cv={stats.cv:.3f}, n={stats.count})")
        path = out_dir / f"area_hist_{key}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        written.append(path)
    return written


def _cmd_stats(args) -> int:
    records = _load_manifest_or_fail(args.manifest)
    stats = dataset.area_statistics(records, group_by=args.group_by)
    payload = json.dumps({k: v.to_dict() for k, v in stats.items()}, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
        print(f"stats: {args.out}")
    else:
        print(payload)
    if args.plot:
        for path in _write_histograms(records, Path(args.manifest).parent / "plots", args.group_by):
            print(f"plot: {path}")
    return 0


def _cmd_evaluate(args) -> int:
    records = _load_manifest_or_fail(args.manifest)
    if args.split != "all":
        records = [r for r in records if r.split == args.split]
    if not records:
        raise ValueError(f"no records in split '{args.split}'")
    predictions = metrics.read_predictions_csv(args.predictions)

    known = {r.fragment_id for r in records}
    unknown = sorted(set(predictions) - known)
    missing = sorted(known - set(predictions))
    if unknown:
        raise ValueError(f"predictions reference unknown fragment ids: {', '.join(unknown[:10])}")
    if missing:
        raise ValueError(
            f"{len(missing)} fragments lack predictions, e.g.: {', '.join(missing[:10])}"
        )

    k = max(r.style.k for r in dataset.read_manifest(args.manifest))
    ordered = sorted(records, key=lambda r: r.fragment_id)
    truth = [r.style.k for r in ordered]
    pred = [predictions[r.fragment_id] for r in ordered]
    report = metrics.metrics_report(truth, pred, k)
    print(report.to_table())
    if args.json:
        metrics.write_report_json(report, args.json)
        print(f"report: {args.json}")
    return 0


def _cmd_plot(args) -> int:
    records = _load_manifest_or_fail(args.manifest)
    for path in _write_histograms(records, args.out, args.group_by):
        print(f"plot: {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "fragment": _cmd_fragment,
        "stats": _cmd_stats,
        "evaluate": _cmd_evaluate,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
