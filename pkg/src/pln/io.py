"""On-disk formats.

Tensor container (binary, little endian)::

    offset 0   4s   magic b"PLNT"
           4   u16  format version (1)
           6   u16  S
           8   u16  B
          10   u16  N
          12   u16  branch count
          14   ...  per branch: P, Q, x, y, lx, ly as float32, row-major
                    (cell row, cell col, slot, inner index)

A multi-branch container stores branches in canonical corner order
(left_top, right_top, left_bottom, right_bottom). Targets are stored as
tensors; their mask is recovered as ``P == 1``.

Scene files and detection lists are JSON.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .decoder import Detection, Provenance
from .encoder import Scene
from .grid import Box, CornerKind, GridSpec
from .tensors import FIELD_NAMES, field_shapes

MAGIC = b"PLNT"
VERSION = 1
HEADER = struct.Struct("<4sHHHHH")
_U16_MAX = 0xFFFF


class FormatError(ValueError):
    """Malformed input file; ``where`` is a byte offset or a JSON path."""

    def __init__(self, path, where, message: str):
        self.path = str(path)
        self.where = where
        loc = f"byte offset {where}" if isinstance(where, int) else f"at {where}"
        super().__init__(f"{self.path}: {loc}: {message}")


def atomic_write(path: str | os.PathLike, data: bytes | str) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- tensor container -----------------------------------------------------


def branch_nbytes(grid: GridSpec) -> int:
    return 4 * sum(int(np.prod(s)) for s in field_shapes(grid).values())


def pack_container(grid: GridSpec, branches: Sequence[Any]) -> bytes:
    """``branches`` are objects with P, Q, x, y, lx, ly arrays (tensors, raw params or targets)."""
    if not branches:
        raise ValueError("container needs at least one branch")
    for v in (grid.S, grid.B, grid.N, len(branches)):
        if v > _U16_MAX:
            raise ValueError(f"{v} does not fit in u16")
    parts = [HEADER.pack(MAGIC, VERSION, grid.S, grid.B, grid.N, len(branches))]
    shapes = field_shapes(grid)
    for br in branches:
        for name in FIELD_NAMES:
            arr = np.asarray(getattr(br, name))
            if arr.shape != shapes[name]:
                raise ValueError(f"{name} shape {arr.shape} != {shapes[name]}")
            parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def unpack_container(data: bytes, path: str = "<bytes>") -> tuple[GridSpec, list[dict[str, np.ndarray]]]:
    if len(data) < HEADER.size:
        raise FormatError(path, len(data), f"truncated header: need {HEADER.size} bytes, have {len(data)}")
    magic, version, S, B, N, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(path, 0, f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(path, 4, f"unsupported format version {version}")
    for off, name, v in ((6, "S", S), (8, "B", B), (10, "N", N), (12, "branch count", count)):
        if v < 1:
            raise FormatError(path, off, f"{name} must be positive, got {v}")
    grid = GridSpec(S, B, N)
    expected = HEADER.size + count * branch_nbytes(grid)
    if len(data) != expected:
        raise FormatError(
            path, min(len(data), expected),
            f"length {len(data)} does not match header (S={S}, B={B}, N={N}, branches={count}): expected {expected}",
        )
    branches = []
    pos = HEADER.size
    for _ in range(count):
        arrays = {}
        for name, shape in field_shapes(grid).items():
            n = int(np.prod(shape))
            arrays[name] = np.frombuffer(data, dtype="<f4", count=n, offset=pos).astype(np.float64).reshape(shape)
            pos += 4 * n
        branches.append(arrays)
    return grid, branches


def write_container(path, grid: GridSpec, branches: Sequence[Any]) -> None:
    atomic_write(path, pack_container(grid, branches))


def read_container(path) -> tuple[GridSpec, list[dict[str, np.ndarray]]]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(path, 0, f"cannot read: {e.strerror}") from e
    return unpack_container(data, str(path))


# -- scene JSON -----------------------------------------------------------


def _num(value, path, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(path, where, f"expected a number, got {value!r}")
    return float(value)


def scene_from_json(doc: Any, path: str = "<json>") -> Scene:
    if not isinstance(doc, dict):
        raise FormatError(path, "$", "scene must be a JSON object")
    classes = doc.get("classes", [])
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise FormatError(path, "$.classes", "must be a list of strings")
    if len(set(classes)) != len(classes):
        raise FormatError(path, "$.classes", "class names must be unique")
    boxes = doc.get("boxes", [])
    if not isinstance(boxes, list):
        raise FormatError(path, "$.boxes", "must be a list")
    out = []
    for i, b in enumerate(boxes):
        where = f"$.boxes[{i}]"
        if not isinstance(b, dict):
            raise FormatError(path, where, "box must be an object")
        coords = []
        for key in ("xmin", "ymin", "xmax", "ymax"):
            if key not in b:
                raise FormatError(path, f"{where}.{key}", "missing")
            coords.append(_num(b[key], path, f"{where}.{key}"))
        try:
            box = Box(*coords)
        except ValueError as e:
            raise FormatError(path, where, str(e)) from e
        cls = b.get("class")
        if isinstance(cls, str):
            if cls not in classes:
                raise FormatError(path, f"{where}.class", f"unknown class {cls!r}")
            cid = classes.index(cls)
        elif isinstance(cls, int) and not isinstance(cls, bool):
            if cls < 0 or (classes and cls >= len(classes)):
                raise FormatError(path, f"{where}.class", f"class index {cls} out of range")
            cid = cls
        else:
            raise FormatError(path, f"{where}.class", "must be a class name or index")
        out.append((box, cid))
    return Scene(boxes=tuple(out), classes=tuple(classes), scene_id=doc.get("id"))


def scene_to_json(scene: Scene) -> dict:
    names = scene.classes
    doc = {
        "classes": list(names),
        "boxes": [
            {"xmin": b.xmin, "ymin": b.ymin, "xmax": b.xmax, "ymax": b.ymax,
             "class": names[c] if c < len(names) else c}
            for b, c in scene.boxes
        ],
    }
    if scene.scene_id is not None:
        doc["id"] = scene.scene_id
    return doc


# -- detections JSON ------------------------------------------------------


def detection_to_json(d: Detection) -> dict:
    return {
        "xmin": d.box.xmin, "ymin": d.box.ymin, "xmax": d.box.xmax, "ymax": d.box.ymax,
        "class": d.class_id,
        "score": d.score,
        "branch": d.branch.value,
        "provenance": list(d.provenance.as_tuple()) if d.provenance else None,
    }


def detections_to_json(dets: Sequence[Detection]) -> dict:
    return {"detections": [detection_to_json(d) for d in sorted(dets, key=Detection.sort_key)]}


def detections_from_json(doc: Any, path: str = "<json>") -> list[Detection]:
    if isinstance(doc, dict):
        items = doc.get("detections")
        base = "$.detections"
    else:
        items, base = doc, "$"
    if not isinstance(items, list):
        raise FormatError(path, base, "must be a list of detections")
    out = []
    for i, it in enumerate(items):
        where = f"{base}[{i}]"
        if not isinstance(it, dict):
            raise FormatError(path, where, "detection must be an object")
        try:
            coords = [_num(it[k], path, f"{where}.{k}") for k in ("xmin", "ymin", "xmax", "ymax")]
            box = Box(*coords)
            cls = it["class"]
            if not isinstance(cls, int) or isinstance(cls, bool) or cls < 0:
                raise FormatError(path, f"{where}.class", "must be a nonnegative integer")
            score = _num(it["score"], path, f"{where}.score")
            branch = CornerKind.parse(it.get("branch", "left_top"))
            prov = it.get("provenance")
            provenance = Provenance(*map(int, prov)) if prov is not None else None
        except KeyError as e:
            raise FormatError(path, f"{where}.{e.args[0]}", "missing") from e
        except FormatError:
            raise
        except (ValueError, TypeError) as e:
            raise FormatError(path, where, str(e)) from e
        out.append(Detection(box=box, class_id=cls, score=score, branch=branch, provenance=provenance))
    return out


def load_json(path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(path, "$", f"cannot read: {e.strerror}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(path, e.pos, f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from e


def dump_json(path, doc: Any) -> None:
    atomic_write(path, json.dumps(doc, indent=2) + "\n")


def load_scene(path) -> Scene:
    return scene_from_json(load_json(path), str(path))


def load_detections(path) -> list[Detection]:
    return detections_from_json(load_json(path), str(path))


def trace_csv(trace: Sequence[float]) -> str:
    lines = ["iteration,loss"]
    lines += [f"{i},{v!r}" for i, v in enumerate(trace)]
    return "\n".join(lines) + "\n"
