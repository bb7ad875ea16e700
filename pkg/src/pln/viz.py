"""SVG overlays: ground truth in blue, true positives yellow, false positives red."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Sequence

from .decoder import Detection
from .encoder import Scene
from .evaluator import match_detections

SVG_NS = "http://www.w3.org/2000/svg"
GT_COLOR = "blue"
TP_COLOR = "yellow"
FP_COLOR = "red"


def _rect(parent, box, size, color, title, dashed=False):
    r = ET.SubElement(
        parent,
        "rect",
        x=f"{box.xmin * size:.3f}",
        y=f"{box.ymin * size:.3f}",
        width=f"{box.width * size:.3f}",
        height=f"{box.height * size:.3f}",
        fill="none",
        stroke=color,
        **{"stroke-width": "2"},
    )
    if dashed:
        r.set("stroke-dasharray", "6,3")
    ET.SubElement(r, "title").text = title
    return r


def render_svg(
    scene: Scene,
    dets: Sequence[Detection],
    size: int = 512,
    iou_threshold: float = 0.5,
    grid_cells: int | None = None,
) -> str:
    """Overlay of ``scene`` and ``dets`` as an SVG document string."""
    legend_h = 24
    root = ET.Element(
        "svg",
        xmlns=SVG_NS,
        width=str(size),
        height=str(size + legend_h),
        viewBox=f"0 0 {size} {size + legend_h}",
    )
    ET.SubElement(root, "rect", x="0", y="0", width=str(size), height=str(size), fill="white", stroke="black")
    if grid_cells:
        g = ET.SubElement(root, "g", stroke="#dddddd", **{"stroke-width": "1"})
        for i in range(1, grid_cells):
            p = f"{i * size / grid_cells:.3f}"
            ET.SubElement(g, "line", x1=p, y1="0", x2=p, y2=str(size))
            ET.SubElement(g, "line", x1="0", y1=p, x2=str(size), y2=p)

    names = scene.classes
    label = lambda c: names[c] if c < len(names) else str(c)  # noqa: E731
    gts = ET.SubElement(root, "g", id="ground-truth")
    for b, c in scene.boxes:
        _rect(gts, b, size, GT_COLOR, f"gt {label(c)}")

    flags = match_detections(dets, scene, iou_threshold) if dets else []
    dg = ET.SubElement(root, "g", id="detections")
    for d, tp in zip(dets, flags):
        title = f"{'TP' if tp else 'FP'} {label(d.class_id)} score={d.score:.3f} branch={d.branch.value}"
        _rect(dg, d.box, size, TP_COLOR if tp else FP_COLOR, title, dashed=True)

    legend = ET.SubElement(root, "g", id="legend", **{"font-family": "sans-serif", "font-size": "12"})
    for i, (text, color) in enumerate((("ground truth", GT_COLOR), ("true positive", TP_COLOR), ("false positive", FP_COLOR))):
        x = 8 + i * 130
        ET.SubElement(legend, "rect", x=str(x), y=str(size + 6), width="12", height="12", fill=color, stroke="black")
        ET.SubElement(legend, "text", x=str(x + 18), y=str(size + 17)).text = text
    return ET.tostring(root, encoding="unicode")


def render_pr_svg(curves: dict[int, tuple[Sequence[float], Sequence[float]]], size: int = 320) -> str:
    """Precision/recall curves, one polyline per class; input maps class -> (precision, recall)."""
    pad = 30
    root = ET.Element("svg", xmlns=SVG_NS, width=str(size + 2 * pad), height=str(size + 2 * pad))
    ET.SubElement(root, "rect", x=str(pad), y=str(pad), width=str(size), height=str(size), fill="white", stroke="black")
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
    for i, (c, (prec, rec)) in enumerate(sorted(curves.items())):
        if not len(prec):
            continue
        pts = " ".join(f"{pad + r * size:.2f},{pad + (1 - p) * size:.2f}" for p, r in zip(prec, rec))
        line = ET.SubElement(root, "polyline", points=pts, fill="none", stroke=palette[i % len(palette)])
        ET.SubElement(line, "title").text = f"class {c}"
    ET.SubElement(root, "text", x=str(pad + size // 2 - 15), y=str(size + 2 * pad - 8)).text = "recall"
    ET.SubElement(root, "text", x="2", y=str(pad - 8)).text = "precision"
    return ET.tostring(root, encoding="unicode")
