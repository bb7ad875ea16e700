"""Scene -> per-branch ground-truth tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CORNER_KINDS, Box, CornerKind, GridSpec, center_of, corner_of, locate
from .tensors import BranchTarget, BranchTensor, field_shapes


class SlotOverflow(ValueError):
    """No free slot index for a point in its cell."""

    def __init__(self, message: str, cell: tuple[int, int], box_index: int):
        super().__init__(message)
        self.cell = cell
        self.box_index = box_index


@dataclass(frozen=True)
class Scene:
    boxes: tuple[tuple[Box, int], ...] = ()
    classes: tuple[str, ...] = ()
    scene_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple((b, int(c)) for b, c in self.boxes))
        object.__setattr__(self, "classes", tuple(self.classes))
        for _, c in self.boxes:
            if c < 0 or (self.classes and c >= len(self.classes)):
                raise ValueError(f"class id {c} out of range")

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def n_classes(self) -> int:
        if self.classes:
            return len(self.classes)
        return max((c for _, c in self.boxes), default=-1) + 1


def assignment_order(scene: Scene) -> list[int]:
    """Indices of scene boxes by ascending area, then xmin, then ymin."""
    return sorted(
        range(len(scene.boxes)),
        key=lambda i: (scene.boxes[i][0].area, scene.boxes[i][0].xmin, scene.boxes[i][0].ymin, i),
    )


def encode_scene(
    scene: Scene,
    grid: GridSpec,
    k: CornerKind,
    permissive: bool = False,
) -> BranchTarget:
    """Build the ground truth of branch ``k`` for ``scene``.

    Each box takes the lowest slot index ``j`` that is free both as a center
    slot in its center's cell and as corner slot ``j + B`` in its corner's
    cell, so that the center/corner pairing ``|j - t| = B`` holds. Boxes are
    placed smallest first. When no index is free, :class:`SlotOverflow` is
    raised, or with ``permissive=True`` the box is skipped and its index
    recorded in ``BranchTarget.dropped``.
    """
    S, B, N = grid.S, grid.B, grid.N
    arrays = {name: np.zeros(shape) for name, shape in field_shapes(grid).items()}
    mask = np.zeros((S, S, 2 * B), dtype=bool)
    dropped = []

    for idx in assignment_order(scene):
        box, cls = scene.boxes[idx]
        if not 0 <= cls < N:
            raise ValueError(f"box {idx}: class id {cls} not in [0, {N})")
        ce = locate(center_of(box), grid)
        co = locate(corner_of(box, k), grid)
        slot = next(
            (j for j in range(B) if not mask[ce.row, ce.col, j] and not mask[co.row, co.col, j + B]),
            None,
        )
        if slot is None:
            if permissive:
                dropped.append(idx)
                continue
            full = (ce.row, ce.col) if mask[ce.row, ce.col, :B].all() else (co.row, co.col)
            raise SlotOverflow(
                f"box {idx} ({k.value}): no common free slot index for center cell "
                f"{(ce.row, ce.col)} and corner cell {(co.row, co.col)} "
                f"(cell index {full[0] * S + full[1]})",
                cell=full,
                box_index=idx,
            )
        for loc, j, partner in ((ce, slot, co), (co, slot + B, ce)):
            r, c = loc.row, loc.col
            mask[r, c, j] = True
            arrays["P"][r, c, j] = 1.0
            arrays["Q"][r, c, j, cls] = 1.0
            arrays["x"][r, c, j] = loc.ox
            arrays["y"][r, c, j] = loc.oy
            arrays["lx"][r, c, j, partner.col] = 1.0
            arrays["ly"][r, c, j, partner.row] = 1.0

    return BranchTarget(mask=mask, kind=k, dropped=tuple(sorted(dropped)), **arrays)


def is_encodable(scene: Scene, grid: GridSpec, kinds=None) -> bool:
    try:
        for k in kinds or CORNER_KINDS:
            encode_scene(scene, grid, k)
    except SlotOverflow:
        return False
    return True


def perfect_prediction(t: BranchTarget) -> BranchTensor:
    """Tensor that reproduces ``t`` on masked slots and is silent elsewhere."""
    grid = t.grid
    m = t.mask
    out = {}
    uniform = {"Q": 1.0 / grid.N, "lx": 1.0 / grid.S, "ly": 1.0 / grid.S}
    for name, arr in t.arrays().items():
        if name in uniform:
            out[name] = np.where(m[..., None], arr, uniform[name])
        elif name == "P":
            out[name] = np.where(m, arr, 0.0)
        else:
            out[name] = arr.copy()
    return BranchTensor(**out)
