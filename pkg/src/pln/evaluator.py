"""VOC-style evaluation: greedy matching, per-class AP and mAP."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decoder import Detection
from .encoder import Scene
from .grid import iou


class APMode(enum.Enum):
    ELEVEN_POINT = "eleven_point"
    AREA = "area"


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    ap_mode: APMode = APMode.ELEVEN_POINT

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in (0, 1]")


@dataclass
class ClassResult:
    ap: float | None
    n_gt: int
    tp: int
    fp: int
    missed: int
    precision: list[float] = field(default_factory=list)
    recall: list[float] = field(default_factory=list)


@dataclass
class EvalReport:
    per_class: dict[int, ClassResult]
    mAP: float
    config: EvalConfig

    def to_json(self) -> dict:
        return {
            "mAP": self.mAP,
            "iou_threshold": self.config.iou_threshold,
            "ap_mode": self.config.ap_mode.value,
            "classes": {
                str(c): {
                    "ap": r.ap,
                    "n_gt": r.n_gt,
                    "tp": r.tp,
                    "fp": r.fp,
                    "missed": r.missed,
                    "precision": r.precision,
                    "recall": r.recall,
                }
                for c, r in sorted(self.per_class.items())
            },
        }


def match_detections(dets: Sequence[Detection], gts: Scene, iou_threshold: float = 0.5) -> list[bool]:
    """TP/FP flag for each detection, aligned with the input order.

    Detections are visited by descending score; each takes the unmatched
    same-class ground truth with the highest IoU if that IoU reaches the
    threshold.
    """
    order = sorted(range(len(dets)), key=lambda i: dets[i].sort_key())
    used = [False] * len(gts.boxes)
    flags = [False] * len(dets)
    for i in order:
        d = dets[i]
        best, best_iou = -1, -1.0
        for g, (box, cls) in enumerate(gts.boxes):
            if used[g] or cls != d.class_id:
                continue
            o = iou(d.box, box)
            if o > best_iou:
                best, best_iou = g, o
        if best >= 0 and best_iou >= iou_threshold:
            used[best] = True
            flags[i] = True
    return flags


def pr_curve(flags: Sequence[bool], n_gt: int) -> tuple[np.ndarray, np.ndarray]:
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    fp = np.cumsum(1.0 - np.asarray(flags, dtype=np.float64))
    recall = tp / n_gt if n_gt > 0 else np.zeros_like(tp)
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    return precision, recall


def average_precision(flags: Sequence[bool], n_gt: int, mode: APMode = APMode.ELEVEN_POINT) -> float | None:
    """AP of a score-ordered flag list; None when the class has nothing to score."""
    if n_gt < 0:
        raise ValueError("n_gt must be nonnegative")
    if n_gt == 0:
        return 0.0 if len(flags) else None
    if len(flags) == 0:
        return 0.0
    prec, rec = pr_curve(flags, n_gt)
    if mode is APMode.ELEVEN_POINT:
        points = []
        for i in range(11):
            sel = rec >= i / 10
            points.append(prec[sel].max() if sel.any() else 0.0)
        return float(sum(points) / 11)
    mrec = np.concatenate(([0.0], rec, [1.0]))
    mpre = np.concatenate(([0.0], prec, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    idx = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def evaluate(
    results: Sequence[tuple[Sequence[Detection], Scene]],
    n_classes: int | None = None,
    cfg: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Evaluate ``(detections, ground truth)`` pairs over one or more images."""
    if n_classes is None:
        n_classes = max(
            [s.n_classes for _, s in results] + [d.class_id + 1 for ds, _ in results for d in ds] + [0]
        )
    scored: dict[int, list[tuple[float, bool]]] = {c: [] for c in range(n_classes)}
    n_gt = {c: 0 for c in range(n_classes)}
    for dets, scene in results:
        dets = sorted(dets, key=Detection.sort_key)
        flags = match_detections(dets, scene, cfg.iou_threshold)
        for d, f in zip(dets, flags):
            scored.setdefault(d.class_id, []).append((d.score, f))
        for _, c in scene.boxes:
            n_gt[c] = n_gt.get(c, 0) + 1

    per_class = {}
    for c in sorted(set(scored) | set(n_gt)):
        # stable: equal scores keep their matching order
        items = sorted(scored.get(c, []), key=lambda sf: -sf[0])
        flags = [f for _, f in items]
        g = n_gt.get(c, 0)
        ap = average_precision(flags, g, cfg.ap_mode)
        prec, rec = pr_curve(flags, g) if flags else (np.zeros(0), np.zeros(0))
        tp = int(sum(flags))
        per_class[c] = ClassResult(
            ap=ap, n_gt=g, tp=tp, fp=len(flags) - tp, missed=g - tp,
            precision=prec.tolist(), recall=rec.tolist(),
        )
    # classes with ground truth define the mean
    aps = [r.ap for r in per_class.values() if r.n_gt > 0]
    mAP = float(np.mean(aps)) if aps else 0.0
    return EvalReport(per_class=per_class, mAP=mAP, config=cfg)
