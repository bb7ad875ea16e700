from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .decoder import Detection
from .grid import CornerKind, iou


class BranchTagCollision(ValueError):
    pass


@dataclass(frozen=True)
class NmsConfig:
    iou_threshold: float = 0.45
    per_class: bool = True

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")


def nms(dets: Iterable[Detection], cfg: NmsConfig = NmsConfig()) -> list[Detection]:
    """Greedy suppression; output is ordered by descending score."""
    remaining = sorted(dets, key=Detection.sort_key)
    keep = []
    while remaining:
        top = remaining.pop(0)
        keep.append(top)
        remaining = [
            d for d in remaining
            if (cfg.per_class and d.class_id != top.class_id) or iou(top.box, d.box) <= cfg.iou_threshold
        ]
    return keep


def merge_branches(
    per_branch: Sequence[tuple[CornerKind, Sequence[Detection]]],
    cfg: NmsConfig = NmsConfig(),
) -> list[Detection]:
    """Pool the detections of the four branches and run NMS over them.

    ``per_branch`` is a sequence of ``(kind, detections)`` pairs, one per
    corner kind.
    """
    seen = set()
    pooled = []
    for kind, dets in per_branch:
        if kind in seen:
            raise BranchTagCollision(f"branch {kind.value} given twice")
        seen.add(kind)
        pooled.extend(dets)
    if len(seen) != 4:
        raise ValueError(f"expected four branches, got {len(seen)}")
    return nms(pooled, cfg)
