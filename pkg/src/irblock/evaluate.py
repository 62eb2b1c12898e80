"""Dataset-level evaluation: success rate, average precision, campaigns.

A campaign attacks every eligible person box of a manifest in its own run and
scores the outcome two ways: the fraction of baseline true positives that the
attack erased (success rate), and person-class average precision at IoU 0.5
over the clean and attacked images. Ablation grids sweep block count, length
and intensity, checkpointing one cell at a time so interrupted sweeps resume.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .eot import EotConfig
from .geometry import GenomeTemplate, MaskBox, default_template
from .optimizer import DeConfig, run_attack
from .oracle import Detection, Oracle, PERSON, iou
from .raster import composite, load_png, save_png

log = logging.getLogger(__name__)

Box = tuple[float, float, float, float]


class MetricUndefinedError(ValueError):
    """Raised when a metric's denominator is empty."""


def _as_box(b) -> Box:
    if isinstance(b, MaskBox):
        return b.corners()
    return (float(b[0]), float(b[1]), float(b[2]), float(b[3]))


# ---------------------------------------------------------------------------
# Manifest


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    boxes: tuple[tuple[MaskBox, str], ...]


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    min_height_px: int = 120
    root: Path = Path(".")

    def image_path(self, record: ManifestRecord) -> Path:
        p = Path(record.path)
        return p if p.is_absolute() else self.root / p

    def eligible_targets(self, record: ManifestRecord) -> list[MaskBox]:
        """Person boxes strictly taller than the minimum height."""
        return [box for box, label in record.boxes if label == PERSON and box.h > self.min_height_px]

    def units(self) -> list[tuple[ManifestRecord, MaskBox]]:
        """One attack unit per eligible target box, in manifest order."""
        out = []
        for record in self.records:
            for box in self.eligible_targets(record):
                out.append((record, box))
        return out


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    records = []
    for entry in doc["images"]:
        boxes = tuple(
            (MaskBox.from_doc(b), str(b.get("label", PERSON))) for b in entry.get("boxes", [])
        )
        records.append(ManifestRecord(path=str(entry["path"]), boxes=boxes))
    return DatasetManifest(
        records=tuple(records),
        min_height_px=int(doc.get("min_height_px", 120)),
        root=path.parent,
    )


def save_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    doc = {
        "min_height_px": manifest.min_height_px,
        "images": [
            {
                "path": r.path,
                "boxes": [dict(b.to_doc(), label=label) for b, label in r.boxes],
            }
            for r in manifest.records
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Metrics


def label_matched(
    label: MaskBox | Box,
    detections: Iterable[Detection],
    iou_threshold: float = 0.5,
    conf_threshold: float = 0.5,
    class_label: str = PERSON,
) -> bool:
    box = _as_box(label)
    for det in detections:
        if det.class_label != class_label:
            continue
        if det.confidence < conf_threshold:
            continue
        if iou(det.box, box) >= iou_threshold:
            return True
    return False


def asr(
    baseline_labels: Sequence[MaskBox | Box],
    attacked: Sequence[Iterable[Detection]],
    iou_threshold: float = 0.5,
    conf_threshold: float = 0.5,
) -> float:
    """Fraction of baseline true positives no longer matched under attack.

    baseline_labels[i] is a label the detector found without attack and
    attacked[i] the detection set on the corresponding attacked image.
    """
    if len(baseline_labels) != len(attacked):
        raise ValueError("labels and attacked detection sets must align")
    n = len(baseline_labels)
    if n == 0:
        raise MetricUndefinedError("no baseline true positives: success rate is undefined")
    survivors = sum(
        1
        for label, dets in zip(baseline_labels, attacked)
        if label_matched(label, dets, iou_threshold, conf_threshold)
    )
    return 1.0 - survivors / n


def average_precision(
    rows: Sequence[tuple[Sequence[Detection], Sequence[MaskBox | Box]]],
    iou_threshold: float = 0.5,
    class_label: str = PERSON,
) -> float:
    """Person-class AP at the given IoU with all-point interpolation.

    Detections are pooled across rows, sorted by confidence (ties keep input
    order), and matched greedily one-to-one against their own row's ground
    truth, preferring the highest-IoU unmatched box.
    """
    gt_boxes = [[_as_box(b) for b in gts] for _, gts in rows]
    total_gt = sum(len(g) for g in gt_boxes)
    if total_gt == 0:
        raise MetricUndefinedError("no ground-truth boxes: average precision is undefined")

    pooled = []
    for r, (dets, _) in enumerate(rows):
        for j, det in enumerate(dets):
            if det.class_label == class_label:
                pooled.append((-det.confidence, r, j, det))
    if not pooled:
        return 0.0
    pooled.sort(key=lambda e: (e[0], e[1], e[2]))

    taken = [np.zeros(len(g), dtype=bool) for g in gt_boxes]
    tp = np.zeros(len(pooled), dtype=bool)
    for rank, (_, r, _, det) in enumerate(pooled):
        best_iou, best_g = 0.0, -1
        for gi, gt in enumerate(gt_boxes[r]):
            if taken[r][gi]:
                continue
            v = iou(det.box, gt)
            if v > best_iou:
                best_iou, best_g = v, gi
        if best_g >= 0 and best_iou >= iou_threshold:
            taken[r][best_g] = True
            tp[rank] = True

    cum_tp = np.cumsum(tp)
    recall = cum_tp / total_gt
    precision = cum_tp / np.arange(1, len(pooled) + 1)
    # Precision envelope, then area under it over recall (all-point rule).
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for i in range(len(pooled)):
        if recall[i] > prev_recall:
            ap += (recall[i] - prev_recall) * precision[i]
            prev_recall = recall[i]
    return float(ap)


# ---------------------------------------------------------------------------
# Campaigns

OracleFactory = Callable[[np.ndarray, MaskBox], Oracle]


@dataclass(frozen=True)
class AttackSpec:
    """Per-unit attack geometry and search-space settings."""

    k: int = 7
    rel_length: float | tuple[float, float] = 0.12
    pixel_value: float | tuple[float, float] = (0.0, 1.0)
    angle_deg: tuple[float, float] = (0.0, 180.0)
    quantize: str = "physical"
    mask_mode: str = "box"  # "box", "image", or "inflate:<factor>"
    iou_match: float = 0.5
    conf_threshold: float = 0.5
    max_rel_length: float = 0.30

    def to_doc(self) -> dict:
        doc = {
            "k": self.k,
            "rel_length": list(self.rel_length) if not np.isscalar(self.rel_length) else self.rel_length,
            "pixel_value": list(self.pixel_value) if not np.isscalar(self.pixel_value) else self.pixel_value,
            "angle_deg": list(self.angle_deg),
            "quantize": self.quantize,
            "mask_mode": self.mask_mode,
            "iou_match": self.iou_match,
            "conf_threshold": self.conf_threshold,
            "max_rel_length": self.max_rel_length,
        }
        return doc


def mask_for(target: MaskBox, mode: str, shape: tuple[int, int]) -> MaskBox:
    """Region blocks may occupy for one unit, derived from the target box."""
    height, width = int(shape[0]), int(shape[1])
    if mode == "box":
        return target
    if mode == "image":
        return MaskBox(0, 0, width, height)
    if mode.startswith("inflate:"):
        factor = float(mode.split(":", 1)[1])
        if factor < 1.0:
            raise ValueError(f"inflate factor must be >= 1, got {factor}")
        cx, cy = target.x + target.w / 2.0, target.y + target.h / 2.0
        w, h = target.w * factor, target.h * factor
        x = int(max(0, round(cx - w / 2.0)))
        y = int(max(0, round(cy - h / 2.0)))
        return MaskBox(x, y, min(width - x, int(round(w))), min(height - y, int(round(h))))
    raise ValueError(f"unknown mask mode {mode!r}")


def template_for(spec: AttackSpec, target: MaskBox, mask: MaskBox) -> GenomeTemplate:
    """Search-space bounds for one unit; anchors are confined to the target.

    When the mask is wider than the target box (so blocks are sized by a
    larger region) the anchor genes are still bounded to the target's extent
    inside the mask: the attacker knows where the wearer stands.
    """
    u_lo = (target.x - mask.x) / mask.w
    u_hi = (target.x + target.w - mask.x) / mask.w
    v_lo = (target.y - mask.y) / mask.h
    v_hi = (target.y + target.h - mask.y) / mask.h
    clamp = lambda v: min(1.0, max(0.0, v))
    return default_template(
        spec.k,
        anchor_u=(clamp(u_lo), clamp(u_hi)),
        anchor_v=(clamp(v_lo), clamp(v_hi)),
        pixel_value=spec.pixel_value,
        rel_length=spec.rel_length,
        angle_deg=spec.angle_deg,
        quantize=spec.quantize,
        max_rel_length=spec.max_rel_length,
    )


@dataclass
class UnitResult:
    index: int
    image_path: str
    target: MaskBox
    baseline: list[Detection]
    attacked: list[Detection]
    gt_boxes: list[MaskBox]
    queries: int
    best_fitness: float
    early_stop: bool
    baseline_detected: bool
    success: bool
    adv_path: str | None = None
    trace_path: str | None = None
    wall_time_s: float = 0.0
    error: str | None = None

    def to_doc(self) -> dict:
        return {
            "index": self.index,
            "image": self.image_path,
            "target": self.target.to_doc(),
            "baseline": [d.to_doc() for d in self.baseline],
            "attacked": [d.to_doc() for d in self.attacked],
            "gt_boxes": [b.to_doc() for b in self.gt_boxes],
            "queries": self.queries,
            "best_fitness": self.best_fitness,
            "early_stop": self.early_stop,
            "baseline_detected": self.baseline_detected,
            "success": self.success,
            "adv_path": self.adv_path,
            "trace_path": self.trace_path,
            "wall_time_s": self.wall_time_s,
            "error": self.error,
        }


@dataclass
class EvalReport:
    rows: list[UnitResult]
    aggregate: dict

    def to_doc(self, include_timing: bool = True) -> dict:
        rows = [r.to_doc() for r in self.rows]
        if not include_timing:
            for row in rows:
                row.pop("wall_time_s", None)
        return {"rows": rows, "aggregate": self.aggregate}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_doc(), indent=2, sort_keys=True) + "\n")


def aggregate_report(
    rows: list[UnitResult], iou_threshold: float = 0.5, conf_threshold: float = 0.5
) -> EvalReport:
    scored = [r for r in rows if r.error is None]
    labels = [r.target for r in scored if r.baseline_detected]
    attacked = [r.attacked for r in scored if r.baseline_detected]
    agg: dict = {
        "n_units": len(rows),
        "n_failed": sum(1 for r in rows if r.error is not None),
        "n_baseline_detected": len(labels),
    }
    if labels:
        agg["asr"] = asr(labels, attacked, iou_threshold, conf_threshold)
    else:
        agg["asr"] = None
    ap_rows_base = [(r.baseline, r.gt_boxes) for r in scored]
    ap_rows_att = [(r.attacked, r.gt_boxes) for r in scored]
    try:
        agg["ap_baseline"] = average_precision(ap_rows_base, iou_threshold)
        agg["ap_attacked"] = average_precision(ap_rows_att, iou_threshold)
    except MetricUndefinedError:
        agg["ap_baseline"] = agg["ap_attacked"] = None
    agg["mean_queries"] = float(np.mean([r.queries for r in scored])) if scored else None
    agg["mean_best_fitness"] = (
        float(np.mean([r.best_fitness for r in scored])) if scored else None
    )
    return EvalReport(rows=rows, aggregate=agg)


def attack_unit(
    index: int,
    image: np.ndarray,
    target: MaskBox,
    gt_boxes: list[MaskBox],
    oracle: Oracle,
    spec: AttackSpec,
    de_config: DeConfig,
    eot_config: EotConfig,
    image_path: str = "",
    out_dir: Path | None = None,
    run_workers: int = 1,
) -> UnitResult:
    """Attack one (image, target) pair and score it."""
    start = time.perf_counter()
    if not target.fits_in(image.shape[1], image.shape[0]):
        raise ValueError(f"target box {target} exceeds image bounds {image.shape}")
    baseline = oracle.detect(image)
    baseline_detected = label_matched(
        target, baseline, spec.iou_match, spec.conf_threshold
    )
    mask = mask_for(target, spec.mask_mode, image.shape)
    template = template_for(spec, target, mask)
    trace = run_attack(
        image,
        mask,
        oracle,
        de_config,
        eot_config,
        template,
        target=target,
        image_id=index,
        n_workers=run_workers,
    )
    adversarial = composite(image, trace.best_genome, mask)
    attacked = oracle.detect(adversarial)
    still = label_matched(target, attacked, spec.iou_match, spec.conf_threshold)

    adv_path = trace_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"unit{index:04d}"
        adv_path = str(out_dir / f"{stem}_adv.png")
        trace_path = str(out_dir / f"{stem}_trace.json")
        save_png(adv_path, adversarial)
        trace.save(trace_path)

    return UnitResult(
        index=index,
        image_path=image_path,
        target=target,
        baseline=baseline,
        attacked=attacked,
        gt_boxes=gt_boxes,
        queries=trace.total_queries,
        best_fitness=trace.best_fitness,
        early_stop=trace.early_stop,
        baseline_detected=baseline_detected,
        success=baseline_detected and not still,
        adv_path=adv_path,
        trace_path=trace_path,
        wall_time_s=time.perf_counter() - start,
    )


def run_campaign(
    manifest: DatasetManifest,
    oracle_factory: OracleFactory,
    spec: AttackSpec,
    de_config: DeConfig,
    eot_config: EotConfig,
    out_dir: str | Path | None = None,
    n_workers: int = 1,
    run_workers: int = 1,
) -> EvalReport:
    """Attack every eligible target of the manifest and aggregate the outcome."""
    out_path = Path(out_dir) if out_dir is not None else None
    units = manifest.units()

    def one(index: int, record: ManifestRecord, target: MaskBox) -> UnitResult:
        try:
            image = load_png(manifest.image_path(record))
            gt = [b for b, label in record.boxes if label == PERSON]
            oracle = oracle_factory(image, target)
            return attack_unit(
                index,
                image,
                target,
                gt,
                oracle,
                spec,
                de_config,
                eot_config,
                image_path=record.path,
                out_dir=out_path,
                run_workers=run_workers,
            )
        except Exception as exc:  # noqa: BLE001 - campaign continues past bad units
            log.warning("unit %d (%s) failed: %s", index, record.path, exc)
            return UnitResult(
                index=index,
                image_path=record.path,
                target=target,
                baseline=[],
                attacked=[],
                gt_boxes=[b for b, label in record.boxes if label == PERSON],
                queries=0,
                best_fitness=float("nan"),
                early_stop=False,
                baseline_detected=False,
                success=False,
                error=str(exc),
            )

    if n_workers <= 1:
        rows = [one(i, rec, tgt) for i, (rec, tgt) in enumerate(units)]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(one, i, rec, tgt) for i, (rec, tgt) in enumerate(units)]
            rows = [f.result() for f in futures]

    report = aggregate_report(rows, spec.iou_match, spec.conf_threshold)
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        report.save(out_path / "report.json")
        write_report_csv(out_path / "report.csv", report)
    return report


# ---------------------------------------------------------------------------
# Transfer and ablation


def transfer_eval(
    report: EvalReport,
    manifest: DatasetManifest,
    oracle_factory: OracleFactory,
    iou_threshold: float = 0.5,
    conf_threshold: float = 0.5,
) -> EvalReport:
    """Re-score previously rendered adversarial images against another oracle.

    No optimization happens; rows whose adversarial image is missing are
    reported as errors and excluded from the success-rate denominator.
    """
    by_path = {r.path: r for r in manifest.records}
    rows: list[UnitResult] = []
    for src in report.rows:
        record = by_path.get(src.image_path)
        if record is None or src.adv_path is None or not Path(src.adv_path).exists():
            log.warning("adversarial image missing for unit %d (%s)", src.index, src.image_path)
            rows.append(
                UnitResult(
                    index=src.index,
                    image_path=src.image_path,
                    target=src.target,
                    baseline=[],
                    attacked=[],
                    gt_boxes=src.gt_boxes,
                    queries=0,
                    best_fitness=float("nan"),
                    early_stop=False,
                    baseline_detected=False,
                    success=False,
                    error="adversarial image missing",
                )
            )
            continue
        clean = load_png(manifest.image_path(record))
        adv = load_png(src.adv_path)
        oracle = oracle_factory(clean, src.target)
        baseline = oracle.detect(clean)
        attacked = oracle.detect(adv)
        detected = label_matched(src.target, baseline, iou_threshold, conf_threshold)
        still = label_matched(src.target, attacked, iou_threshold, conf_threshold)
        rows.append(
            UnitResult(
                index=src.index,
                image_path=src.image_path,
                target=src.target,
                baseline=baseline,
                attacked=attacked,
                gt_boxes=src.gt_boxes,
                queries=0,
                best_fitness=float("nan"),
                early_stop=False,
                baseline_detected=detected,
                success=detected and not still,
                adv_path=src.adv_path,
            )
        )
    return aggregate_report(rows, iou_threshold, conf_threshold)


def cell_name(k: int, rel_length: float, pixel_value: float | None = None) -> str:
    name = f"k{k}_L{rel_length:g}"
    if pixel_value is not None:
        name += f"_C{pixel_value:g}"
    return name


def run_ablation(
    manifest: DatasetManifest,
    oracle_factory: OracleFactory,
    spec: AttackSpec,
    de_config: DeConfig,
    eot_config: EotConfig,
    ks: Sequence[int],
    rel_lengths: Sequence[float],
    pixel_values: Sequence[float] | None = None,
    out_dir: str | Path | None = None,
    n_workers: int = 1,
) -> dict:
    """Grid of campaigns over (k, L) and optionally C, checkpointed per cell."""
    out_path = Path(out_dir) if out_dir is not None else None
    cells_dir = out_path / "cells" if out_path is not None else None
    if cells_dir is not None:
        cells_dir.mkdir(parents=True, exist_ok=True)

    c_axis: list[float | None] = list(pixel_values) if pixel_values else [None]
    grid: dict[str, dict] = {}
    for k in ks:
        for rel_length in rel_lengths:
            for c in c_axis:
                name = cell_name(k, rel_length, c)
                checkpoint = cells_dir / f"{name}.json" if cells_dir is not None else None
                if checkpoint is not None and checkpoint.exists():
                    grid[name] = json.loads(checkpoint.read_text())
                    continue
                overrides = {"k": int(k), "rel_length": float(rel_length)}
                if c is not None:
                    overrides["pixel_value"] = float(c)
                cell_spec_doc = dict(spec.to_doc(), **overrides)
                cell_spec = AttackSpec(
                    k=cell_spec_doc["k"],
                    rel_length=_pair_or_scalar(cell_spec_doc["rel_length"]),
                    pixel_value=_pair_or_scalar(cell_spec_doc["pixel_value"]),
                    angle_deg=tuple(cell_spec_doc["angle_deg"]),
                    quantize=cell_spec_doc["quantize"],
                    mask_mode=cell_spec_doc["mask_mode"],
                    iou_match=cell_spec_doc["iou_match"],
                    conf_threshold=cell_spec_doc["conf_threshold"],
                    max_rel_length=cell_spec_doc["max_rel_length"],
                )
                try:
                    report = run_campaign(
                        manifest,
                        oracle_factory,
                        cell_spec,
                        de_config,
                        eot_config,
                        out_dir=None,
                        n_workers=n_workers,
                    )
                    cell = {
                        "status": "ok",
                        "k": int(k),
                        "rel_length": float(rel_length),
                        "pixel_value": None if c is None else float(c),
                        "aggregate": report.aggregate,
                    }
                except Exception as exc:  # noqa: BLE001 - keep sweeping
                    log.warning("ablation cell %s failed: %s", name, exc)
                    cell = {
                        "status": "failed",
                        "k": int(k),
                        "rel_length": float(rel_length),
                        "pixel_value": None if c is None else float(c),
                        "error": str(exc),
                    }
                grid[name] = cell
                if checkpoint is not None:
                    checkpoint.write_text(json.dumps(cell, indent=2, sort_keys=True) + "\n")

    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "grid.json").write_text(json.dumps(grid, indent=2, sort_keys=True) + "\n")
        write_grid_csv(out_path / "grid.csv", grid)
        try:
            if pixel_values:
                series: dict[str, list[float]] = {"asr": [], "ap_attacked": []}
                for c in pixel_values:
                    cell = grid.get(cell_name(ks[0], rel_lengths[0], c), {})
                    agg = cell.get("aggregate", {})
                    series["asr"].append(agg.get("asr") or 0.0)
                    series["ap_attacked"].append(agg.get("ap_attacked") or 0.0)
                write_sweep_svg(out_path / "pixel_sweep.svg", list(pixel_values), series,
                                xlabel="block pixel value")
            else:
                write_grid_svg(out_path / "grid.svg", grid, ks, rel_lengths)
        except Exception as exc:  # noqa: BLE001 - charts are best-effort
            log.warning("could not render grid chart: %s", exc)
    return grid


def _pair_or_scalar(v):
    if isinstance(v, (list, tuple)):
        return (float(v[0]), float(v[1]))
    return float(v)


# ---------------------------------------------------------------------------
# Report emission


def write_report_csv(path: str | Path, report: EvalReport) -> None:
    """One row per unit; aggregate rows are prefixed with '#'."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "index",
                "image",
                "target",
                "baseline_detected",
                "success",
                "queries",
                "best_fitness",
                "early_stop",
                "error",
            ]
        )
        for r in report.rows:
            t = r.target
            writer.writerow(
                [
                    r.index,
                    r.image_path,
                    f"{t.x},{t.y},{t.w},{t.h}",
                    int(r.baseline_detected),
                    int(r.success),
                    r.queries,
                    f"{r.best_fitness:.6f}" if np.isfinite(r.best_fitness) else "",
                    int(r.early_stop),
                    r.error or "",
                ]
            )
        for key in sorted(report.aggregate):
            writer.writerow([f"#{key}", report.aggregate[key]])


def write_grid_csv(path: str | Path, grid: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "k", "rel_length", "pixel_value", "status", "asr", "ap_attacked", "mean_queries"])
        for name in sorted(grid):
            cell = grid[name]
            agg = cell.get("aggregate", {})
            writer.writerow(
                [
                    name,
                    cell.get("k"),
                    cell.get("rel_length"),
                    cell.get("pixel_value"),
                    cell.get("status"),
                    agg.get("asr"),
                    agg.get("ap_attacked"),
                    agg.get("mean_queries"),
                ]
            )


def write_grid_svg(
    path: str | Path, grid: dict, ks: Sequence[int], rel_lengths: Sequence[float]
) -> None:
    """Heat map of success rate over the (k, L) plane."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    values = np.full((len(ks), len(rel_lengths)), np.nan)
    for i, k in enumerate(ks):
        for j, L in enumerate(rel_lengths):
            cell = grid.get(cell_name(k, L))
            if cell and cell.get("status") == "ok":
                v = cell["aggregate"].get("asr")
                if v is not None:
                    values[i, j] = v
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(rel_lengths), 1.2 + 0.7 * len(ks)))
    im = ax.imshow(values, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(rel_lengths)), [f"{L:g}" for L in rel_lengths])
    ax.set_yticks(range(len(ks)), [str(k) for k in ks])
    ax.set_xlabel("relative block length")
    ax.set_ylabel("block count")
    ax.set_title("attack success rate")
    fig.colorbar(im, ax=ax)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def write_sweep_svg(path: str | Path, xs: Sequence[float], series: dict[str, Sequence[float]], xlabel: str) -> None:
    """Line chart for one-dimensional sweeps (e.g. pixel value vs ASR/AP)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for label, ys in series.items():
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylim(0.0, 1.0)
    ax.legend()
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
