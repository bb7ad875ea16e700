"""Point-pair scoring and detection extraction.

Two decoders with identical output: :func:`decode_brute` scores every
(center cell, center slot, corner cell, class) combination at once;
:func:`decode_pruned` skips weak points, scans only corner cells on the
branch's side of each center and drops classes whose score bound is below
the threshold.

Both compare point positions in grid units (``col + x``, ``row + y``) and
compute scores with the same floating-point operation order, so pruning is
exactly lossless rather than approximately so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Box, CornerKind, GridSpec, Point2D, box_from_pair
from .tensors import BranchTensor


class SlotKindMismatch(ValueError):
    """A pair is not (center slot j, corner slot j + B)."""


@dataclass(frozen=True)
class Provenance:
    center_cell: int
    center_slot: int
    corner_cell: int
    corner_slot: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.center_cell, self.center_slot, self.corner_cell, self.corner_slot)


@dataclass(frozen=True)
class Detection:
    box: Box
    class_id: int
    score: float
    branch: CornerKind
    provenance: Provenance | None = None

    def sort_key(self):
        prov = self.provenance.as_tuple() if self.provenance else (-1, -1, -1, -1)
        return (-self.score, prov, self.class_id, self.branch.index)


@dataclass(frozen=True)
class DecodeConfig:
    score_threshold: float = 0.1
    max_detections: int = 200
    # None means "same as score_threshold"
    existence_floor: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0, 1]")
        if self.max_detections < 1:
            raise ValueError("max_detections must be positive")
        if self.existence_floor is not None and not 0.0 <= self.existence_floor <= 1.0:
            raise ValueError("existence_floor must be in [0, 1]")

    @property
    def floor(self) -> float:
        return self.score_threshold if self.existence_floor is None else self.existence_floor


def _link_term(t: BranchTensor, cr, cc, cj, kr, kc, kj):
    fwd = t.lx[cr, cc, cj, kc] * t.ly[cr, cc, cj, kr]
    bwd = t.lx[kr, kc, kj, cc] * t.ly[kr, kc, kj, cr]
    return (fwd + bwd) / 2.0


def pair_score(t: BranchTensor, center: tuple[int, int], corner: tuple[int, int], n: int) -> float:
    """Object probability of a (center, corner) point pair for class ``n``.

    ``center`` and ``corner`` are ``(cell index, slot)`` with cell index
    ``row * S + col``.
    """
    S, B = t.grid.S, t.grid.B
    (i, j), (s, tt) = center, corner
    if not (0 <= j < B and tt == j + B):
        raise SlotKindMismatch(f"slots ({j}, {tt}) do not form a center/corner link for B={B}")
    cr, cc = divmod(i, S)
    kr, kc = divmod(s, S)
    pp = t.P[cr, cc, j] * t.P[kr, kc, tt]
    qq = t.Q[cr, cc, j, n] * t.Q[kr, kc, tt, n]
    return float((pp * qq) * _link_term(t, cr, cc, j, kr, kc, tt))


def _quadrant_ok(k: CornerKind, cu, cv, ku, kv):
    ok_x = ku <= cu if k.is_left else ku >= cu
    ok_y = kv <= cv if k.is_top else kv >= cv
    return ok_x & ok_y


def _grid_coords(t: BranchTensor):
    S = t.grid.S
    cols = np.arange(S, dtype=np.float64)
    u = cols[None, :, None] + t.x  # (S, S, 2B) column + x offset
    v = cols[:, None, None] + t.y
    return u, v


def _make_detection(t, k, S, cr, cc, cj, kr, kc, kj, n, score, u, v) -> Detection:
    center = Point2D(u[cr, cc, cj] / S, v[cr, cc, cj] / S)
    corner = Point2D(u[kr, kc, kj] / S, v[kr, kc, kj] / S)
    return Detection(
        box=box_from_pair(center, corner, k),
        class_id=int(n),
        score=float(score),
        branch=k,
        provenance=Provenance(int(cr * S + cc), int(cj), int(kr * S + kc), int(kj)),
    )


def _finish(records, t, k, cfg, u, v) -> list[Detection]:
    """records: array of (score, ccell, cslot, kcell, kslot, n) rows."""
    if len(records) == 0:
        return []
    rec = np.asarray(records)
    score = rec[:, 0]
    order = np.lexsort((rec[:, 5], rec[:, 4], rec[:, 3], rec[:, 2], rec[:, 1], -score))
    S = t.grid.S
    out = []
    for r in order[: cfg.max_detections]:
        _, ci, cj, ki, kj, n = rec[r]
        cr, cc = divmod(int(ci), S)
        kr, kc = divmod(int(ki), S)
        out.append(_make_detection(t, k, S, cr, cc, int(cj), kr, kc, int(kj), int(n), score[r], u, v))
    return out


def decode_brute(t: BranchTensor, grid: GridSpec, k: CornerKind, cfg: DecodeConfig = DecodeConfig()) -> list[Detection]:
    S, B, N = grid.S, grid.B, grid.N
    if t.grid != grid:
        raise ValueError(f"tensor grid {t.grid} != {grid}")
    u, v = _grid_coords(t)
    C = S * S
    # flatten cells: arrays indexed [cell, slot, ...]
    P = t.P.reshape(C, 2 * B)
    Q = t.Q.reshape(C, 2 * B, N)
    lx = t.lx.reshape(C, 2 * B, S)
    ly = t.ly.reshape(C, 2 * B, S)
    uf, vf = u.reshape(C, 2 * B), v.reshape(C, 2 * B)
    rows, cols = np.divmod(np.arange(C), S)

    records = []
    for j in range(B):
        tt = j + B
        # axes: [center cell i, corner cell s, class n]
        pp = P[:, j][:, None] * P[:, tt][None, :]
        qq = Q[:, j, :][:, None, :] * Q[:, tt, :][None, :, :]
        fwd = lx[:, j, :][:, cols] * ly[:, j, :][:, rows]  # [i, s]
        bwd = (lx[:, tt, :][:, cols] * ly[:, tt, :][:, rows]).T  # [s, i] -> [i, s]
        link = (fwd + bwd) / 2.0
        score = (pp[:, :, None] * qq) * link[:, :, None]
        geo = _quadrant_ok(k, uf[:, j][:, None], vf[:, j][:, None], uf[:, tt][None, :], vf[:, tt][None, :])
        keep = (score >= cfg.score_threshold) & geo[:, :, None]
        ii, ss, nn = np.nonzero(keep)
        for a, b, n in zip(ii, ss, nn):
            records.append((score[a, b, n], a, j, b, tt, n))
    return _finish(records, t, k, cfg, u, v)


def _scan_range(pos: float, toward_low: bool, S: int) -> range:
    """Cells whose points can lie on the ``toward_low`` side of grid position ``pos``.

    A point in cell ``c`` has position in [c, c + 1], so ``c <= floor(pos)``
    covers the low side and ``c >= ceil(pos) - 1`` the high side. Both
    include the cell that holds ``pos``.
    """
    if toward_low:
        return range(0, min(int(math.floor(pos)), S - 1) + 1)
    return range(max(int(math.ceil(pos)) - 1, 0), S)


def decode_pruned(t: BranchTensor, grid: GridSpec, k: CornerKind, cfg: DecodeConfig = DecodeConfig()) -> list[Detection]:
    S, B = grid.S, grid.B
    if t.grid != grid:
        raise ValueError(f"tensor grid {t.grid} != {grid}")
    tau, eps = cfg.score_threshold, cfg.floor
    if eps > tau:
        raise ValueError(f"existence floor {eps} exceeds score threshold {tau}; pruning would be lossy")
    u, v = _grid_coords(t)
    strong = t.P >= eps
    records = []
    for j in range(B):
        tt = j + B
        centers = np.argwhere(strong[:, :, j])
        if len(centers) == 0:
            continue
        corner_ok = strong[:, :, tt]
        for cr, cc in centers:
            cu, cv = u[cr, cc, j], v[cr, cc, j]
            rr = _scan_range(cv, k.is_top, S)
            cr_range = _scan_range(cu, k.is_left, S)
            sub = corner_ok[rr.start:rr.stop, cr_range.start:cr_range.stop]
            hits = np.argwhere(sub)
            if len(hits) == 0:
                continue
            kr = hits[:, 0] + rr.start
            kc = hits[:, 1] + cr_range.start
            geo = _quadrant_ok(k, cu, cv, u[kr, kc, tt], v[kr, kc, tt])
            if not geo.any():
                continue
            kr, kc = kr[geo], kc[geo]
            pp = t.P[cr, cc, j] * t.P[kr, kc, tt]  # [m]
            qq = t.Q[cr, cc, j, :][None, :] * t.Q[kr, kc, tt, :]  # [m, N]
            bound = pp[:, None] * qq
            mi, nn = np.nonzero(bound >= tau)
            if len(mi) == 0:
                continue
            kr, kc = kr[mi], kc[mi]
            fwd = t.lx[cr, cc, j, kc] * t.ly[cr, cc, j, kr]
            bwd = t.lx[kr, kc, tt, cc] * t.ly[kr, kc, tt, cr]
            score = bound[mi, nn] * ((fwd + bwd) / 2.0)
            ok = score >= tau
            ccell = cr * S + cc
            for sc, a, b, n in zip(score[ok], kr[ok], kc[ok], nn[ok]):
                records.append((sc, ccell, j, a * S + b, tt, n))
    return _finish(records, t, k, cfg, u, v)


def decode(t: BranchTensor, grid: GridSpec, k: CornerKind, cfg: DecodeConfig = DecodeConfig(), method: str = "pruned") -> list[Detection]:
    if method == "brute":
        return decode_brute(t, grid, k, cfg)
    if method == "pruned":
        return decode_pruned(t, grid, k, cfg)
    raise ValueError(f"unknown decode method {method!r}")
