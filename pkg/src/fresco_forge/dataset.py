"""Manifest assembly, split assignment, and fragment-area statistics.

The manifest is the machine-readable index of every generated fragment:
one JSON object per line with provenance, style label, geometry summary,
split, and file path. Splits are assigned per source image so fragments
of one fresco never leak across train/val/test.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .fragmenters import Fragment, FragmentSet
from .raster import fragment_file_name, rasterize_polygon

MANIFEST_FIELDS = (
    "fragment_id",
    "source_id",
    "style_k",
    "style_name",
    "method",
    "params",
    "area_px",
    "bbox",
    "rotation_deg",
    "split",
    "file_path",
)

HISTOGRAM_BINS = 32


@dataclass(frozen=True)
class StyleLabel:
    """Class label: 1-based index plus a display name."""

    k: int
    name: str

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("style index must be >= 1")


@dataclass(frozen=True)
class FragmentRecord:
    """One manifest row."""

    fragment_id: str
    source_id: str
    style: StyleLabel
    method: str
    params: dict
    area_px: int
    bbox: tuple[int, int, int, int]
    rotation_deg: float
    split: str
    file_path: str


@dataclass(frozen=True)
class AreaStats:
    """Moments and a log-spaced histogram of fragment areas."""

    count: int
    mean_px: float
    variance_px: float
    cv: float
    min_px: int
    max_px: int
    histogram: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def global_fragment_id(fset: FragmentSet, fragment: Fragment) -> str:
    token = fset.config.params_token()
    return f"{fset.source_id}__{fset.method.value}__{token}__{fragment.fragment_id}"


def fragment_mask(fragment: Fragment, crop_rect):
    """The fragment's raster mask (rasterizing its polygon if needed)."""
    if fragment.mask is not None:
        return fragment.mask
    return rasterize_polygon(fragment.polygon, crop_rect)


def build_manifest(fragment_sets, labels: dict, output_dir) -> list[FragmentRecord]:
    """Turn fragment sets into manifest records.

    Every source must appear in ``labels``; ids must be globally unique.
    Area and bounding box come from the unrotated fragment mask, so the
    manifest reflects intrinsic fragment size regardless of the rotation
    augmentation stored alongside. Fragments too thin to cover any pixel
    center are skipped: they cannot be extracted as images.
    """
    output_dir = Path(output_dir)
    records = []
    seen: set[str] = set()
    for fset in fragment_sets:
        if fset.source_id not in labels:
            raise ValueError(f"unlabeled source: {fset.source_id}")
        style = labels[fset.source_id]
        params = fset.config.params_dict()
        token = fset.config.params_token()
        for fragment in fset.fragments:
            fid = global_fragment_id(fset, fragment)
            if fid in seen:
                raise ValueError(f"duplicate fragment id: {fid}")
            seen.add(fid)
            try:
                mask = fragment_mask(fragment, fset.crop_rect)
            except ValueError:
                continue  # sub-pixel sliver
            area = mask.pixel_count()
            records.append(
                FragmentRecord(
                    fragment_id=fid,
                    source_id=fset.source_id,
                    style=style,
                    method=fset.method.value,
                    params=params,
                    area_px=area,
                    bbox=(mask.origin[0], mask.origin[1], mask.width, mask.height),
                    rotation_deg=float(fragment.rotation_deg),
                    split="train",
                    file_path=str(Path("fragments") / fragment_file_name(
                        fset.source_id, fset.method.value, token, fragment.fragment_id
                    )),
                )
            )
    records.sort(key=lambda r: (r.source_id, r.fragment_id))
    return records


def assign_splits(records, ratios=(0.7, 0.15, 0.15), seed: int = 0) -> list[FragmentRecord]:
    """Assign train/val/test splits at source granularity.

    Source counts per split follow the ratios by largest remainder; the
    assignment of which source lands where is a seeded permutation.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three non-negative numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")

    sources = sorted({r.source_id for r in records})
    wanted_splits = sum(1 for r in ratios if r > 0)
    if len(sources) < wanted_splits:
        raise ValueError("fewer sources than non-empty splits")

    counts = _largest_remainder(len(sources), ratios)
    rng = np.random.default_rng(np.uint64(seed))
    order = [sources[i] for i in rng.permutation(len(sources))]
    assignment: dict[str, str] = {}
    start = 0
    for name, count in zip(("train", "val", "test"), counts):
        for source in order[start:start + count]:
            assignment[source] = name
        start += count
    return [replace(r, split=assignment[r.source_id]) for r in records]


def _largest_remainder(total: int, ratios) -> list[int]:
    raw = [total * r for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    remainders = sorted(
        range(len(ratios)), key=lambda i: (raw[i] - counts[i], ratios[i]), reverse=True
    )
    for i in remainders[: total - sum(counts)]:
        counts[i] += 1
    return counts


def area_statistics(records, group_by: str = "method") -> dict[str, AreaStats]:
    """Per-group area moments; population variance, cv = std / mean."""
    if group_by not in ("method", "source"):
        raise ValueError("group_by must be 'method' or 'source'")
    groups: dict[str, list[int]] = {}
    for r in records:
        key = r.method if group_by == "method" else r.source_id
        groups.setdefault(key, []).append(r.area_px)

    out = {}
    for key, areas_list in sorted(groups.items()):
        areas = np.asarray(areas_list, dtype=np.float64)
        mean = float(areas.mean())
        variance = float(((areas - mean) ** 2).mean())
        std = float(np.sqrt(variance))
        lo, hi = float(areas.min()), float(areas.max())
        if lo == hi:
            edges = np.linspace(lo - 0.5, hi + 0.5, HISTOGRAM_BINS + 1)
        else:
            edges = np.logspace(np.log10(lo), np.log10(hi), HISTOGRAM_BINS + 1)
            edges[0], edges[-1] = lo, hi  # guard against rounding past the extremes
        hist, _ = np.histogram(areas, bins=edges)
        out[key] = AreaStats(
            count=len(areas),
            mean_px=mean,
            variance_px=variance,
            cv=std / mean if mean > 0 else 0.0,
            min_px=int(lo),
            max_px=int(hi),
            histogram={"bin_edges": edges.tolist(), "counts": hist.tolist()},
        )
    return out


def record_to_json(record: FragmentRecord) -> dict:
    return {
        "fragment_id": record.fragment_id,
        "source_id": record.source_id,
        "style_k": record.style.k,
        "style_name": record.style.name,
        "method": record.method,
        "params": record.params,
        "area_px": record.area_px,
        "bbox": list(record.bbox),
        "rotation_deg": record.rotation_deg,
        "split": record.split,
        "file_path": record.file_path,
    }


def record_from_json(data: dict) -> FragmentRecord:
    return FragmentRecord(
        fragment_id=data["fragment_id"],
        source_id=data["source_id"],
        style=StyleLabel(k=int(data["style_k"]), name=data["style_name"]),
        method=data["method"],
        params=data["params"],
        area_px=int(data["area_px"]),
        bbox=tuple(data["bbox"]),
        rotation_deg=float(data["rotation_deg"]),
        split=data["split"],
        file_path=data["file_path"],
    )


def write_manifest(records, path) -> None:
    """Write records as JSON Lines (UTF-8, sorted keys, one record per line)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), sort_keys=True))
            fh.write("\n")


def read_manifest(path) -> list[FragmentRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_json(json.loads(line)))
    return records


def write_dataset_info(path, *, version: str, master_seed: int, ratios, records) -> None:
    """Sidecar with generation provenance and per-style source counts."""
    styles = {}
    per_style_sources: dict[str, set] = {}
    for r in records:
        styles[r.style.k] = r.style.name
        per_style_sources.setdefault(r.style.name, set()).add(r.source_id)
    info = {
        "tool": "fresco-forge",
        "version": version,
        "master_seed": int(master_seed),
        "k": len(styles),
        "split_ratios": list(ratios),
        "per_style_source_counts": {
            name: len(s) for name, s in sorted(per_style_sources.items())
        },
    }
    Path(path).write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
