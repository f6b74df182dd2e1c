"""Part-panoptic fusion: turn a LogitStack into a LabelTriple.

Two agreement functions drive the fusion.  Both amplify a pair of logits
when the heads agree, cancel them when the heads disagree, and pass the
informative logit through when one head is uncertain:

    agreement_part_sem(a, b) = (sigma'(a) + sigma'(b)) * (a + b)
    agreement_sem_inst(a, b) = (sigma(a)  + sigma(b))  * (a + b)

where sigma is the logistic function and sigma'(x) = 2*sigma(x) - 1
rescales it to (-1, 1).  The formulas are applied literally; no clamping
or sign fixing is performed for unusual input regimes.

Fusion runs in two branches: semantic-wise fusion folds each class's part
logits (max over the class's part channels) into its semantic channel,
and the enhanced semantic logits feed panoptic fusion with the instance
proposals; part-wise fusion folds each part's parent semantic logits into
its part channel, and the per-pixel argmax of those enhanced part logits
is the part map.  Three baseline strategies ("none", "consensus",
"topdown") skip the enhancement and resolve part/semantic conflicts by
keeping them, voiding everything, or voiding only the part label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .containers import LABEL_DTYPE, LabelTriple, LogitStack
from .errors import ValidationError
from .taxonomy import ClassTaxonomy

BASELINE_STRATEGIES = ("none", "consensus", "topdown")
STRATEGIES = ("partpanoptic",) + BASELINE_STRATEGIES


@dataclass(frozen=True)
class FusionParams:
    """Tunables of the panoptic stage; defaults follow common fusion practice."""

    confidence_min: float = 0.5
    overlap_discard_ratio: float = 0.5
    min_instance_area: int = 64
    mask_logit_threshold: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.confidence_min <= 1.0:
            raise ValidationError("confidence_min must be in [0, 1]")
        if not 0.0 < self.overlap_discard_ratio <= 1.0:
            raise ValidationError("overlap_discard_ratio must be in (0, 1]")
        if self.min_instance_area < 0:
            raise ValidationError("min_instance_area must be >= 0")
        if not np.isfinite(self.mask_logit_threshold):
            raise ValidationError("mask_logit_threshold must be finite")


@dataclass(frozen=True)
class EnhancedLogits:
    """Semantic and part logits after agreement-based enhancement."""

    enhanced_semantic: np.ndarray  # [C_sem, H, W]
    enhanced_part: np.ndarray  # [C_part, H, W]
    semantic_channel_ids: tuple[int, ...] = field(default=())
    part_channel_ids: tuple[int, ...] = field(default=())


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_rescaled(x):
    """2*sigma(x) - 1: the logistic function rescaled to (-1, 1)."""
    arr = np.asarray(x, dtype=np.float64)
    out = 2.0 * _stable_sigmoid(arr) - 1.0
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def agreement_part_sem(a, b):
    """(sigma'(a) + sigma'(b)) * (a + b); symmetric in its arguments."""
    aa = np.asarray(a, dtype=np.float64)
    bb = np.asarray(b, dtype=np.float64)
    out = (sigmoid_rescaled(aa) + sigmoid_rescaled(bb)) * (aa + bb)
    if np.isscalar(a) and np.isscalar(b):
        return float(out)
    return out


def agreement_sem_inst(a, b):
    """(sigma(a) + sigma(b)) * (a + b); symmetric in its arguments."""
    aa = np.asarray(a, dtype=np.float64)
    bb = np.asarray(b, dtype=np.float64)
    out = (_stable_sigmoid(aa) + _stable_sigmoid(bb)) * (aa + bb)
    if np.isscalar(a) and np.isscalar(b):
        return float(out)
    return out


def semantic_wise_fuse(stack: LogitStack, taxonomy: ClassTaxonomy) -> np.ndarray:
    """Enhance each semantic channel with its parts' evidence.

    For a class with parts, the part logits are flattened by a per-pixel
    maximum over the class's part channels and fused with the semantic
    channel through agreement_part_sem.  Classes without parts pass
    through unchanged.  Channel order matches the input stack.
    """
    stack.validate(taxonomy)
    sem = stack.semantic_logits.astype(np.float64, copy=False)
    enhanced = sem.copy()
    for channel, class_id in enumerate(stack.semantic_channel_ids):
        parts = taxonomy.parts_of(class_id)
        if not parts:
            continue
        part_channels = [stack.part_channel(p.id) for p in parts]
        flat = stack.part_logits[part_channels].astype(np.float64).max(axis=0)
        enhanced[channel] = agreement_part_sem(flat, sem[channel])
    return enhanced


def part_wise_fuse(
    stack: LogitStack, taxonomy: ClassTaxonomy
) -> tuple[np.ndarray, np.ndarray]:
    """Enhance each part channel with its parent's semantic evidence.

    Returns the enhanced part tensor (stack channel order) and the part
    map: per-pixel argmax over the enhanced part channels, ties broken by
    the lowest part id.  The part map is emitted everywhere; consumers
    decide whether to suppress parts on partless regions.
    """
    stack.validate(taxonomy)
    if not stack.part_channel_ids:
        raise ValidationError("part-wise fusion requires at least one part class")
    sem = stack.semantic_logits.astype(np.float64, copy=False)
    part = stack.part_logits.astype(np.float64, copy=False)
    enhanced = np.empty_like(part)
    for channel, part_id in enumerate(stack.part_channel_ids):
        parent = taxonomy.parent_of(part_id)
        parent_channel = stack.semantic_channel(parent)
        enhanced[channel] = agreement_part_sem(part[channel], sem[parent_channel])
    part_map = _argmax_labels(enhanced, stack.part_channel_ids)
    return enhanced, part_map


def _argmax_labels(
    tensor: np.ndarray, channel_ids: tuple[int, ...]
) -> np.ndarray:
    """Per-pixel argmax over channels, ties resolved by the lowest id."""
    order = np.argsort(np.asarray(channel_ids), kind="stable")
    winners = np.argmax(tensor[order], axis=0)
    ids = np.asarray(channel_ids, dtype=LABEL_DTYPE)[order]
    return ids[winners]


def compute_enhanced_logits(
    stack: LogitStack, taxonomy: ClassTaxonomy
) -> EnhancedLogits:
    """Run both enhancement branches and bundle the tensors."""
    enhanced_sem = semantic_wise_fuse(stack, taxonomy)
    enhanced_part, _ = part_wise_fuse(stack, taxonomy)
    return EnhancedLogits(
        enhanced_semantic=enhanced_sem,
        enhanced_part=enhanced_part,
        semantic_channel_ids=stack.semantic_channel_ids,
        part_channel_ids=stack.part_channel_ids,
    )


def panoptic_fuse(
    enhanced_semantic: np.ndarray,
    semantic_channel_ids: tuple[int, ...],
    proposals,
    taxonomy: ClassTaxonomy,
    params: FusionParams | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Merge stuff logits and instance proposals into semantic/instance maps.

    Proposals below the confidence floor are dropped; the rest are
    accepted greedily in descending confidence (ties by submission order)
    unless their thresholded footprint overlaps already-claimed pixels on
    at least ``overlap_discard_ratio`` of its own area.  Overlapped pixels
    are removed from the later proposal.  Each accepted instance competes
    per pixel with the stuff-class logits via agreement_sem_inst between
    its mask logits and its class's enhanced semantic channel; the winner
    is the highest score, ties to the lowest class id then lowest
    instance id.  Instances that end up with fewer than
    ``min_instance_area`` pixels are removed and their pixels relabelled
    by one repeat of the argmax without them.
    """
    params = params or FusionParams()
    if enhanced_semantic.ndim != 3:
        raise ValidationError("enhanced semantic tensor must be [C, H, W]")
    if enhanced_semantic.shape[0] != len(semantic_channel_ids):
        raise ValidationError("channel id mapping length mismatch")
    h, w = enhanced_semantic.shape[1:]
    enhanced_semantic = enhanced_semantic.astype(np.float64, copy=False)

    kept = [p for p in proposals if p.confidence >= params.confidence_min]
    order = sorted(
        range(len(kept)), key=lambda i: (-kept[i].confidence, i)
    )

    occupancy = np.zeros((h, w), dtype=bool)
    accepted: list[tuple[int, np.ndarray, np.ndarray]] = []  # (class, footprint, logits)
    for idx in order:
        prop = kept[idx]
        if prop.mask_logits.shape != (h, w):
            raise ValidationError("proposal mask dimensions disagree with logits")
        footprint = prop.mask_logits > params.mask_logit_threshold
        own = int(footprint.sum())
        if own == 0:
            continue
        overlap = int((footprint & occupancy).sum())
        if overlap / own >= params.overlap_discard_ratio:
            continue
        surviving = footprint & ~occupancy
        occupancy |= surviving
        accepted.append((prop.class_id, surviving, prop.mask_logits))

    # candidate rows: stuff classes then instances, sorted so that
    # np.argmax's first-maximum rule realizes the id-based tie breaking
    channel_of = {cid: ch for ch, cid in enumerate(semantic_channel_ids)}
    stuff = [
        (class_id, channel)
        for channel, class_id in enumerate(semantic_channel_ids)
        if taxonomy.has_semantic(class_id) and not taxonomy.is_thing(class_id)
    ]
    candidates: list[tuple[int, int, np.ndarray]] = []  # (class, instance, scores)
    for class_id, channel in stuff:
        candidates.append((class_id, 0, enhanced_semantic[channel]))
    for seq, (class_id, surviving, mask_logits) in enumerate(accepted, start=1):
        if class_id not in channel_of:
            raise ValidationError(f"no semantic channel for proposal class {class_id}")
        fused = agreement_sem_inst(
            mask_logits.astype(np.float64, copy=False),
            enhanced_semantic[channel_of[class_id]],
        )
        scores = np.where(surviving, fused, -np.inf)
        candidates.append((class_id, seq, scores))

    sem_map, inst_map = _argmax_panoptic(candidates, (h, w))

    if accepted and params.min_instance_area > 0:
        counts = {
            seq: int((inst_map == seq).sum()) for seq in range(1, len(accepted) + 1)
        }
        small = {seq for seq, n in counts.items() if n < params.min_instance_area}
        if small:
            survivors = [c for c in candidates if c[1] not in small]
            sem_map, inst_map = _argmax_panoptic(survivors, (h, w))

    # compact surviving instance ids to 1..M in acceptance order
    present = sorted({int(i) for i in np.unique(inst_map) if i != 0})
    remap = np.zeros(len(accepted) + 1, dtype=LABEL_DTYPE)
    for new_id, seq in enumerate(present, start=1):
        remap[seq] = new_id
    inst_map = remap[inst_map]
    return sem_map, inst_map


def _argmax_panoptic(
    candidates: list[tuple[int, int, np.ndarray]], shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    if not candidates:
        z = np.zeros(shape, dtype=LABEL_DTYPE)
        return z, z.copy()
    ranked = sorted(range(len(candidates)), key=lambda i: candidates[i][:2])
    scores = np.stack([candidates[i][2] for i in ranked])
    winner = np.argmax(scores, axis=0)
    valid = np.take_along_axis(scores, winner[None], axis=0)[0] > -np.inf
    class_ids = np.array([candidates[i][0] for i in ranked], dtype=LABEL_DTYPE)
    inst_ids = np.array([candidates[i][1] for i in ranked], dtype=np.int64)
    sem_map = np.where(valid, class_ids[winner], 0).astype(LABEL_DTYPE)
    inst_map = np.where(valid, inst_ids[winner], 0)
    return sem_map, inst_map


def fuse_part_panoptic(
    stack: LogitStack,
    taxonomy: ClassTaxonomy,
    params: FusionParams | None = None,
) -> LabelTriple:
    """Full part-panoptic fusion: enhancement, panoptic merge, part argmax."""
    enhanced_sem = semantic_wise_fuse(stack, taxonomy)
    _, part_map = part_wise_fuse(stack, taxonomy)
    sem_map, inst_map = panoptic_fuse(
        enhanced_sem,
        stack.semantic_channel_ids,
        stack.instance_proposals,
        taxonomy,
        params,
    )
    return LabelTriple.from_arrays(sem_map, inst_map, part_map)


def fuse_baseline(
    stack: LogitStack,
    taxonomy: ClassTaxonomy,
    params: FusionParams | None = None,
    strategy: str = "none",
) -> LabelTriple:
    """Ablation strategies that bypass the agreement-based enhancement.

    "none": panoptic merge on the raw semantic logits; part map is the raw
    per-pixel argmax of the part logits.  Part/semantic conflicts (the
    part's parent differs from the pixel's semantic label) are kept.
    "consensus": conflicting pixels have semantic, instance and part all
    set to void.  "topdown": conflicting pixels keep semantic and
    instance and only the part label is voided.
    """
    if strategy not in BASELINE_STRATEGIES:
        raise ValidationError(
            f"unknown strategy {strategy!r}; expected one of {BASELINE_STRATEGIES}"
        )
    stack.validate(taxonomy)
    raw_sem = stack.semantic_logits.astype(np.float64, copy=False)
    sem_map, inst_map = panoptic_fuse(
        raw_sem,
        stack.semantic_channel_ids,
        stack.instance_proposals,
        taxonomy,
        params,
    )
    if stack.part_channel_ids:
        part_map = _argmax_labels(
            stack.part_logits.astype(np.float64, copy=False),
            stack.part_channel_ids,
        )
    else:
        part_map = np.zeros_like(sem_map)

    if strategy == "none":
        return LabelTriple.from_arrays(sem_map, inst_map, part_map)

    parent_lut = np.zeros(int(part_map.max()) + 1, dtype=np.int64)
    for pid in stack.part_channel_ids:
        if pid <= part_map.max():
            parent_lut[pid] = taxonomy.parent_of(pid)
    conflict = (part_map != 0) & (parent_lut[part_map] != sem_map)

    sem_map = sem_map.copy()
    inst_map = inst_map.copy()
    part_map = part_map.copy()
    if strategy == "consensus":
        sem_map[conflict] = 0
        inst_map[conflict] = 0
        part_map[conflict] = 0
    else:  # topdown
        part_map[conflict] = 0
    return LabelTriple.from_arrays(sem_map, inst_map, part_map)


def fuse(
    stack: LogitStack,
    taxonomy: ClassTaxonomy,
    params: FusionParams | None = None,
    strategy: str = "partpanoptic",
) -> LabelTriple:
    """Dispatch on strategy name: "partpanoptic" or a baseline."""
    if strategy == "partpanoptic":
        return fuse_part_panoptic(stack, taxonomy, params)
    return fuse_baseline(stack, taxonomy, params, strategy)
