"""Panoptic Quality and part-aware Panoptic Quality.

Matching follows the standard panoptic protocol: prediction and ground
truth are split into (class, instance) segments, same-class pairs with
IoU strictly above 0.5 are true positives (the threshold makes the
matching unique), void ground-truth pixels are excluded from both
intersection and union, and unmatched predictions lying mostly on void
are discarded rather than counted as false positives.

PartPQ replaces each true positive's IoU with a part-aware score for
classes that have parts: the mean over the class's part ids of the part
map IoU restricted to the union of the two matched segments, skipping
part ids absent from both sides there, and falling back to the segment
IoU when every part id is absent.  This part-score rule is one concrete
reading of part-aware quality; it is documented in the README so results
can be compared like for like.

Scores aggregate over a dataset by pooling matched IoU sums and TP/FP/FN
counts before the final quotient, never by averaging per-image scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .containers import LabelTriple, PanopticSegment, derive_segments
from .errors import ValidationError
from .taxonomy import ClassTaxonomy

IOU_MATCH_THRESHOLD = 0.5
VOID_DISCARD_RATIO = 0.5


@dataclass(frozen=True)
class TruePositive:
    pred_segment: PanopticSegment
    gt_segment: PanopticSegment
    iou: float
    part_score: float  # part-aware IoU for classes with parts, else == iou


@dataclass(frozen=True)
class ClassMatch:
    tp: tuple[TruePositive, ...] = ()
    fp: tuple[PanopticSegment, ...] = ()
    fn: tuple[PanopticSegment, ...] = ()


@dataclass(frozen=True)
class MatchResult:
    """Per-class matching outcome of one image pair."""

    per_class: dict[int, ClassMatch]
    gt_classes: frozenset[int]
    pred_classes: frozenset[int]


@dataclass(frozen=True)
class ClassReport:
    pq: float | None  # None when the class is absent from ground truth
    part_pq: float | None
    tp: int
    fp: int
    fn: int
    present_in_gt: bool


@dataclass(frozen=True)
class MetricReport:
    """Per-class scores plus the aggregate over classes present in ground truth."""

    per_class: dict[int, ClassReport]
    mean_pq: float | None
    mean_part_pq: float | None


def match_segments(
    pred: LabelTriple, gt: LabelTriple, taxonomy: ClassTaxonomy
) -> MatchResult:
    """Match prediction segments against ground truth segments per class."""
    if pred.shape != gt.shape:
        raise ValidationError(
            f"prediction and ground truth differ in size: {pred.shape} vs {gt.shape}"
        )
    pred_segs = derive_segments(pred, taxonomy)
    gt_segs = derive_segments(gt, taxonomy)

    pred_key = _segment_keys(pred)
    gt_key = _segment_keys(gt)
    pair = gt_key.astype(np.uint64) << np.uint64(32)
    pair |= pred_key.astype(np.uint64)
    pair_ids, pair_counts = np.unique(pair, return_counts=True)
    intersections = dict(zip(pair_ids.tolist(), pair_counts.tolist()))

    pred_by_key = {_key_of(s): s for s in pred_segs}
    gt_by_key = {_key_of(s): s for s in gt_segs}

    void_overlap: dict[int, int] = {}
    for pk in pred_by_key:
        void_overlap[pk] = intersections.get(pk, 0)  # gt key 0 contributes high bits 0

    tp_by_class: dict[int, list[TruePositive]] = {}
    matched_pred: set[int] = set()
    matched_gt: set[int] = set()
    for combined, inter in intersections.items():
        gk = int(combined >> 32)
        pk = int(combined & 0xFFFFFFFF)
        if gk == 0 or pk == 0:
            continue
        if (gk >> 16) != (pk >> 16):  # different classes never match
            continue
        gt_seg = gt_by_key[gk]
        pred_seg = pred_by_key[pk]
        union = (
            gt_seg.pixel_count
            + pred_seg.pixel_count
            - inter
            - void_overlap[pk]
        )
        iou = inter / union
        if iou > IOU_MATCH_THRESHOLD:
            class_id = gk >> 16
            score = iou
            if taxonomy.parts_of(class_id):
                score = part_iou(pred, gt, pred_seg, gt_seg, iou, taxonomy)
            tp_by_class.setdefault(class_id, []).append(
                TruePositive(pred_seg, gt_seg, iou, score)
            )
            matched_pred.add(pk)
            matched_gt.add(gk)

    fp_by_class: dict[int, list[PanopticSegment]] = {}
    for pk, seg in pred_by_key.items():
        if pk in matched_pred:
            continue
        if void_overlap[pk] / seg.pixel_count > VOID_DISCARD_RATIO:
            continue  # mostly on void ground truth: ignored, not a false positive
        fp_by_class.setdefault(seg.class_id, []).append(seg)

    fn_by_class: dict[int, list[PanopticSegment]] = {}
    for gk, seg in gt_by_key.items():
        if gk not in matched_gt:
            fn_by_class.setdefault(seg.class_id, []).append(seg)

    classes = set(tp_by_class) | set(fp_by_class) | set(fn_by_class)
    per_class = {
        c: ClassMatch(
            tp=tuple(tp_by_class.get(c, ())),
            fp=tuple(fp_by_class.get(c, ())),
            fn=tuple(fn_by_class.get(c, ())),
        )
        for c in sorted(classes)
    }
    return MatchResult(
        per_class=per_class,
        gt_classes=frozenset(s.class_id for s in gt_segs),
        pred_classes=frozenset(s.class_id for s in pred_segs),
    )


def _segment_keys(triple: LabelTriple) -> np.ndarray:
    sem = triple.semantic_map.ravel().astype(np.uint32)
    inst = triple.instance_map.ravel().astype(np.uint32)
    keys = (sem << np.uint32(16)) | inst
    keys[sem == 0] = 0  # void pixels carry key 0 regardless of instance bits
    return keys


def _key_of(seg: PanopticSegment) -> int:
    return (seg.class_id << 16) | seg.instance_id


def part_iou(
    pred: LabelTriple,
    gt: LabelTriple,
    pred_segment: PanopticSegment,
    gt_segment: PanopticSegment,
    segment_iou: float,
    taxonomy: ClassTaxonomy,
) -> float:
    """Part-aware score of one matched pair.

    Over the union of the two segments' pixels, compute the part-map IoU
    for every part id of the segment class; average the ids whose union
    there is non-empty.  If every part id is absent on both sides, fall
    back to the segment IoU.
    """
    parts = taxonomy.parts_of(pred_segment.class_id)
    if not parts:
        raise ValidationError(
            f"class {pred_segment.class_id} has no parts; use the segment IoU"
        )
    region = np.union1d(pred_segment.pixels, gt_segment.pixels)
    pred_parts = pred.part_map.ravel()[region]
    gt_parts = gt.part_map.ravel()[region]
    ious = []
    for part in parts:
        p = pred_parts == part.id
        g = gt_parts == part.id
        union = int((p | g).sum())
        if union == 0:
            continue
        ious.append(int((p & g).sum()) / union)
    if not ious:
        return segment_iou
    return float(np.mean(ious))


def pq(match: MatchResult) -> tuple[dict[int, float], float | None]:
    """Per-class PQ and the mean over classes present in prediction or truth."""
    per_class: dict[int, float] = {}
    for class_id, cm in match.per_class.items():
        per_class[class_id] = _quotient(
            sum(t.iou for t in cm.tp), len(cm.tp), len(cm.fp), len(cm.fn)
        )
    mean = float(np.mean(list(per_class.values()))) if per_class else None
    return per_class, mean


def _quotient(iou_sum: float, tp: int, fp: int, fn: int) -> float:
    denom = tp + 0.5 * fp + 0.5 * fn
    return iou_sum / denom if denom > 0 else 0.0


def part_pq(
    pred: LabelTriple, gt: LabelTriple, taxonomy: ClassTaxonomy
) -> MetricReport:
    """Match one image pair and report PQ/PartPQ per class."""
    return aggregate_dataset([match_segments(pred, gt, taxonomy)], taxonomy)


def aggregate_dataset(
    matches: list[MatchResult], taxonomy: ClassTaxonomy
) -> MetricReport:
    """Pool match statistics over a dataset and compute the report.

    Classes never present in any ground truth are reported as absent
    (None) and excluded from the aggregate means.
    """
    if not matches:
        raise ValidationError("cannot aggregate an empty dataset")
    gt_present: set[int] = set()
    for m in matches:
        gt_present |= m.gt_classes

    per_class: dict[int, ClassReport] = {}
    pq_values: list[float] = []
    ppq_values: list[float] = []
    for cls in taxonomy.semantic_ids:
        tp = fp = fn = 0
        iou_sum = 0.0
        part_sum = 0.0
        for m in matches:
            cm = m.per_class.get(cls)
            if cm is None:
                continue
            tp += len(cm.tp)
            fp += len(cm.fp)
            fn += len(cm.fn)
            iou_sum += sum(t.iou for t in cm.tp)
            part_sum += sum(t.part_score for t in cm.tp)
        if cls in gt_present:
            cls_pq = _quotient(iou_sum, tp, fp, fn)
            cls_ppq = _quotient(part_sum, tp, fp, fn)
            pq_values.append(cls_pq)
            ppq_values.append(cls_ppq)
            per_class[cls] = ClassReport(cls_pq, cls_ppq, tp, fp, fn, True)
        else:
            per_class[cls] = ClassReport(None, None, tp, fp, fn, False)

    return MetricReport(
        per_class=per_class,
        mean_pq=float(np.mean(pq_values)) if pq_values else None,
        mean_part_pq=float(np.mean(ppq_values)) if ppq_values else None,
    )


def report_to_tsv(report: MetricReport, taxonomy: ClassTaxonomy) -> str:
    """Render a report as TSV: class, pq, part_pq, tp, fp, fn; '-' when absent."""
    lines = ["class\tpq\tpart_pq\ttp\tfp\tfn"]
    for cls in taxonomy.semantic_ids:
        row = report.per_class[cls]
        name = taxonomy.semantic_class(cls).name
        lines.append(
            f"{name}\t{_cell(row.pq)}\t{_cell(row.part_pq)}\t{row.tp}\t{row.fp}\t{row.fn}"
        )
    tp = sum(r.tp for r in report.per_class.values())
    fp = sum(r.fp for r in report.per_class.values())
    fn = sum(r.fn for r in report.per_class.values())
    lines.append(
        f"total\t{_cell(report.mean_pq)}\t{_cell(report.mean_part_pq)}\t{tp}\t{fp}\t{fn}"
    )
    return "\n".join(lines) + "\n"


def _cell(value: float | None) -> str:
    return "-" if value is None else f"{value:.9f}"


def render_table(
    rows: list[tuple[str, MetricReport]],
    taxonomy: ClassTaxonomy,
    percent: bool = False,
    metric: str = "part_pq",
    corner: str = "strategy",
) -> str:
    """Render reports as a text table: one row per label, one column per
    class plus a total column; '-' marks classes absent from ground truth."""
    if metric not in ("pq", "part_pq"):
        raise ValidationError(f"unknown metric {metric!r}")
    names = [taxonomy.semantic_class(c).name for c in taxonomy.semantic_ids]
    header = [corner] + names + ["total"]

    def fmt(value: float | None) -> str:
        if value is None:
            return "-"
        return f"{100.0 * value:.1f}" if percent else f"{value:.3f}"

    body: list[list[str]] = []
    for label, report in rows:
        cells = [label]
        for cls in taxonomy.semantic_ids:
            row = report.per_class[cls]
            cells.append(fmt(row.part_pq if metric == "part_pq" else row.pq))
        cells.append(fmt(report.mean_part_pq if metric == "part_pq" else report.mean_pq))
        body.append(cells)

    widths = [
        max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip()]
    for cells in body:
        out.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)).rstrip())
    return "\n".join(out) + "\n"
