"""Training-label generation from a registered RGB image and point cloud.

Pipeline: the progressive morphological filter roughly separates objects
from the supporting surface; a RANSAC plane fit over the ground
candidates reclaims near-plane points the filter missed (transparent
objects produce noisy depth, so the two stages complement each other);
Euclidean clustering turns the remaining points into object instances.
Object points are assigned part ids by HSV colour rules, and all labels
are carried into pixel space by k-nearest-neighbour voting over the
projected points.

Background points on the fitted plane map to a configurable surface
class; leftover points that neither belong to the plane nor to a
surviving cluster vote as void.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .containers import LabelTriple
from .errors import ValidationError
from .imaging import HsvRange, Image, rgb_to_hsv
from .kdtree import KdTree
from .pointcloud import (
    CameraModel,
    PmfParams,
    PointCloud,
    euclidean_clusters,
    progressive_morphological_filter,
    project,
    ransac_plane,
)
from .taxonomy import ClassTaxonomy


@dataclass(frozen=True)
class PartColorRule:
    """Assign a part id to points/pixels whose colour falls in an HSV range;
    higher priority wins where ranges overlap."""

    part_id: int
    hsv_range: HsvRange
    priority: int = 0


@dataclass(frozen=True)
class LabeledPointCloud:
    """A cloud plus per-point object/instance/part annotations.

    ``table_flag`` marks background points lying on the fitted support
    plane; background points without it vote as void in pixel space.
    """

    cloud: PointCloud
    object_flag: np.ndarray  # (N,) bool
    instance_id: np.ndarray  # (N,) int64, 0 = background
    part_id: np.ndarray  # (N,) int64, 0 = none
    table_flag: np.ndarray  # (N,) bool

    def __post_init__(self):
        n = len(self.cloud)
        for name in ("object_flag", "instance_id", "part_id", "table_flag"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValidationError(f"{name} must have shape ({n},)")
            arr.setflags(write=False)
        if ((self.part_id != 0) & ~self.object_flag).any():
            raise ValidationError("part ids assigned to non-object points")
        if ((self.instance_id != 0) != self.object_flag).any():
            raise ValidationError("object points and instances must coincide")
        if (self.table_flag & self.object_flag).any():
            raise ValidationError("plane points cannot be object points")


@dataclass(frozen=True)
class RgbdLabelConfig:
    object_class_id: int
    background_class_id: int
    pmf: PmfParams = field(default_factory=PmfParams)
    ransac_iterations: int = 500
    ransac_threshold: float = 0.004
    seed: int = 0
    cluster_radius: float = 0.01
    cluster_min_points: int = 30
    part_rules: tuple[PartColorRule, ...] = ()
    catchall_part_id: int = 0
    knn_k: int = 5
    max_pixel_radius: float = 3.0

    def __post_init__(self):
        if self.knn_k < 1:
            raise ValidationError("knn_k must be >= 1")
        if self.max_pixel_radius <= 0:
            raise ValidationError("max_pixel_radius must be positive")
        object.__setattr__(self, "part_rules", tuple(self.part_rules))


def segment_objects(cloud: PointCloud, config: RgbdLabelConfig) -> LabeledPointCloud:
    """Split a cloud into plane background and clustered object instances."""
    if len(cloud) == 0:
        raise ValidationError("cannot segment an empty cloud")
    ground = progressive_morphological_filter(cloud, config.pmf)
    if int(ground.sum()) < 3:
        raise ValidationError("too few ground candidates for a plane fit")
    plane, _ = ransac_plane(
        cloud.xyz[ground],
        n_iterations=config.ransac_iterations,
        distance_threshold=config.ransac_threshold,
        seed=config.seed,
    )
    on_plane = plane.distance(cloud.xyz) <= config.ransac_threshold
    background = ground | on_plane

    instance = np.zeros(len(cloud), dtype=np.int64)
    remaining = np.nonzero(~background)[0]
    if remaining.size:
        labels = euclidean_clusters(
            cloud.xyz[remaining],
            radius=config.cluster_radius,
            min_points=config.cluster_min_points,
        )
        instance[remaining] = labels
    object_flag = instance != 0
    # plane/ground points are the support surface; non-clustered leftovers
    # stay unflagged and later vote as void
    table = background & ~object_flag
    return LabeledPointCloud(
        cloud=cloud,
        object_flag=object_flag,
        instance_id=instance,
        part_id=np.zeros(len(cloud), dtype=np.int64),
        table_flag=table,
    )


def label_parts(
    labeled: LabeledPointCloud,
    part_rules,
    taxonomy: ClassTaxonomy | None = None,
    catchall_part_id: int = 0,
) -> LabeledPointCloud:
    """Assign part ids to object points by colour thresholding.

    Rules are tried in descending priority (stable for equal priorities);
    the first match wins.  Unmatched object points receive the catch-all
    part id, or 0 if none is configured.
    """
    rules = sorted(
        enumerate(part_rules), key=lambda item: (-item[1].priority, item[0])
    )
    if taxonomy is not None:
        for _, rule in rules:
            taxonomy.part_class(rule.part_id)
        if catchall_part_id:
            taxonomy.part_class(catchall_part_id)

    part = np.full(len(labeled.cloud), catchall_part_id, dtype=np.int64)
    part[~labeled.object_flag] = 0
    obj_idx = np.nonzero(labeled.object_flag)[0]
    if obj_idx.size and rules:
        rgb = labeled.cloud.rgb[obj_idx]
        hsv = np.array([rgb_to_hsv(int(r), int(g), int(b)) for r, g, b in rgb])
        h, s, v = hsv[:, 0], hsv[:, 1], hsv[:, 2]
        assigned = np.zeros(obj_idx.size, dtype=bool)
        for _, rule in rules:
            hit = ~assigned & rule.hsv_range.contains(h, s, v)
            part[obj_idx[hit]] = rule.part_id
            assigned |= hit
    return replace(labeled, part_id=part)


def project_labels(
    labeled: LabeledPointCloud,
    camera: CameraModel,
    taxonomy: ClassTaxonomy,
    config: RgbdLabelConfig,
) -> LabelTriple:
    """Carry per-point labels into pixel space by k-NN voting.

    Pixels whose nearest projected point is farther than
    ``max_pixel_radius`` stay void.  Votes are counted independently per
    channel; a tied count is resolved in favour of the tied label whose
    supporting voter is nearest.
    """
    taxonomy.semantic_class(config.object_class_id)
    if config.background_class_id:
        taxonomy.semantic_class(config.background_class_id)

    proj = project(labeled.cloud, camera)
    idx = np.nonzero(proj.in_frame)[0]
    sem_map = np.zeros((camera.height, camera.width), dtype=np.uint16)
    inst_map = np.zeros_like(sem_map)
    part_map = np.zeros_like(sem_map)
    if idx.size == 0:
        return LabelTriple(sem_map, inst_map, part_map)

    sem_votes = np.where(
        labeled.object_flag[idx],
        config.object_class_id,
        np.where(labeled.table_flag[idx], config.background_class_id, 0),
    )
    inst_votes = labeled.instance_id[idx]
    part_votes = labeled.part_id[idx]

    coords = np.stack([proj.u[idx], proj.v[idx]], axis=1)
    tree = KdTree(coords)
    k = min(config.knn_k, idx.size)
    max_r = config.max_pixel_radius
    for row in range(camera.height):
        for col in range(camera.width):
            hits = tree.nearest((float(col), float(row)), k)
            if not hits or hits[0][0] > max_r:
                continue
            voters = [i for _, i in hits]
            sem_map[row, col] = _majority(sem_votes, voters)
            inst_map[row, col] = _majority(inst_votes, voters)
            part_map[row, col] = _majority(part_votes, voters)
    return LabelTriple(sem_map, inst_map, part_map)


def _majority(values: np.ndarray, voters: list[int]) -> int:
    """Most frequent label among voters; ties go to the tied label with
    the nearest (earliest-ranked) supporter."""
    counts: dict[int, int] = {}
    first_rank: dict[int, int] = {}
    for rank, voter in enumerate(voters):
        label = int(values[voter])
        counts[label] = counts.get(label, 0) + 1
        first_rank.setdefault(label, rank)
    best = max(counts.values())
    tied = [label for label, c in counts.items() if c == best]
    return min(tied, key=lambda label: first_rank[label])


def generate_rgbd_sample(
    rgb: Image,
    cloud: PointCloud,
    camera: CameraModel,
    taxonomy: ClassTaxonomy,
    config: RgbdLabelConfig,
) -> tuple[Image, LabelTriple]:
    """Run the full pipeline on one capture; the image passes through."""
    if (rgb.height, rgb.width) != (camera.height, camera.width):
        raise ValidationError(
            f"image is {rgb.width}x{rgb.height} but camera expects "
            f"{camera.width}x{camera.height}"
        )
    labeled = segment_objects(cloud, config)
    labeled = label_parts(
        labeled, config.part_rules, taxonomy, config.catchall_part_id
    )
    triple = project_labels(labeled, camera, taxonomy, config)
    return rgb, triple


def _hsv_range_from_json(raw: dict) -> HsvRange:
    return HsvRange(
        h_min=float(raw.get("h_min", 0.0)),
        h_max=float(raw.get("h_max", 360.0 - 1e-9)),
        s_min=float(raw.get("s_min", 0.0)),
        s_max=float(raw.get("s_max", 1.0)),
        v_min=float(raw.get("v_min", 0.0)),
        v_max=float(raw.get("v_max", 1.0)),
    )


def _rules_from_json(raw) -> tuple[PartColorRule, ...]:
    rules = []
    for entry in raw:
        rules.append(
            PartColorRule(
                part_id=int(entry["part_id"]),
                hsv_range=_hsv_range_from_json(entry.get("hsv_range", {})),
                priority=int(entry.get("priority", 0)),
            )
        )
    return tuple(rules)


def load_rgbd_config(path: str | Path) -> RgbdLabelConfig:
    """Read an RgbdLabelConfig from JSON."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    try:
        pmf = PmfParams(**raw.get("pmf", {}))
        return RgbdLabelConfig(
            object_class_id=int(raw["object_class_id"]),
            background_class_id=int(raw.get("background_class_id", 0)),
            pmf=pmf,
            ransac_iterations=int(raw.get("ransac_iterations", 500)),
            ransac_threshold=float(raw.get("ransac_threshold", 0.004)),
            seed=int(raw.get("seed", 0)),
            cluster_radius=float(raw.get("cluster_radius", 0.01)),
            cluster_min_points=int(raw.get("cluster_min_points", 30)),
            part_rules=_rules_from_json(raw.get("part_rules", [])),
            catchall_part_id=int(raw.get("catchall_part_id", 0)),
            knn_k=int(raw.get("knn_k", 5)),
            max_pixel_radius=float(raw.get("max_pixel_radius", 3.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed config: {exc}") from exc
