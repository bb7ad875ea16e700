"""Least-squares point loss and its gradient through the squashing maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import (
    FIELD_NAMES,
    BranchTarget,
    BranchTensor,
    RawParams,
    ShapeMismatch,
    activate,
)


@dataclass(frozen=True)
class LossWeights:
    w_class: float = 1.0
    w_coord: float = 1.0
    w_link: float = 1.0
    # divide the sum by S*S*2B
    normalize: bool = False

    def __post_init__(self):
        for name in ("w_class", "w_coord", "w_link"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class SlotView:
    """One slot's fields; Q, lx, ly are 1-d arrays."""

    P: float
    Q: np.ndarray
    x: float
    y: float
    lx: np.ndarray
    ly: np.ndarray

    @classmethod
    def of(cls, t, row: int, col: int, slot: int) -> "SlotView":
        return cls(*(np.asarray(getattr(t, k)[row, col, slot]) for k in FIELD_NAMES))


def point_loss(pred: SlotView, tgt: SlotView, w: LossWeights = LossWeights()) -> float:
    return float(
        (pred.P - 1.0) ** 2
        + w.w_class * np.sum((pred.Q - tgt.Q) ** 2)
        + w.w_coord * ((pred.x - tgt.x) ** 2 + (pred.y - tgt.y) ** 2)
        + w.w_link * (np.sum((pred.lx - tgt.lx) ** 2) + np.sum((pred.ly - tgt.ly) ** 2))
    )


def no_point_loss(pred: SlotView) -> float:
    return float(pred.P ** 2)


def _check(pred: BranchTensor, tgt: BranchTarget) -> None:
    for name in FIELD_NAMES:
        a, b = getattr(pred, name), getattr(tgt, name)
        if a.shape != b.shape:
            raise ShapeMismatch(f"{name}: prediction {a.shape} vs target {b.shape}")


def slot_losses(pred: BranchTensor, tgt: BranchTarget, w: LossWeights = LossWeights()) -> np.ndarray:
    """Per-slot loss array of shape (S, S, 2B)."""
    _check(pred, tgt)
    m = tgt.mask
    pt = (
        (pred.P - 1.0) ** 2
        + w.w_class * ((pred.Q - tgt.Q) ** 2).sum(-1)
        + w.w_coord * ((pred.x - tgt.x) ** 2 + (pred.y - tgt.y) ** 2)
        + w.w_link * (((pred.lx - tgt.lx) ** 2).sum(-1) + ((pred.ly - tgt.ly) ** 2).sum(-1))
    )
    nopt = pred.P ** 2
    return np.where(m, pt, nopt)


def _scale(grid, w: LossWeights) -> float:
    return 1.0 / (grid.S * grid.S * grid.n_slots) if w.normalize else 1.0


def total_loss(pred: BranchTensor, tgt: BranchTarget, w: LossWeights = LossWeights()) -> float:
    return float(slot_losses(pred, tgt, w).sum() * _scale(tgt.grid, w))


def _softmax_backward(s: np.ndarray, g: np.ndarray) -> np.ndarray:
    return s * (g - (g * s).sum(-1, keepdims=True))


def loss_and_gradient(
    raw: RawParams, tgt: BranchTarget, w: LossWeights = LossWeights()
) -> tuple[float, RawParams]:
    t = activate(raw)
    loss = total_loss(t, tgt, w)
    m = tgt.mask.astype(np.float64)
    c = _scale(tgt.grid, w)

    # derivative w.r.t. the activated value, then through sigmoid / softmax
    gP = np.where(tgt.mask, 2.0 * (t.P - 1.0), 2.0 * t.P)
    gx = m * w.w_coord * 2.0 * (t.x - tgt.x)
    gy = m * w.w_coord * 2.0 * (t.y - tgt.y)
    gQ = m[..., None] * w.w_class * 2.0 * (t.Q - tgt.Q)
    glx = m[..., None] * w.w_link * 2.0 * (t.lx - tgt.lx)
    gly = m[..., None] * w.w_link * 2.0 * (t.ly - tgt.ly)

    grad = RawParams(
        P=c * gP * t.P * (1.0 - t.P),
        Q=c * _softmax_backward(t.Q, gQ),
        x=c * gx * t.x * (1.0 - t.x),
        y=c * gy * t.y * (1.0 - t.y),
        lx=c * _softmax_backward(t.lx, glx),
        ly=c * _softmax_backward(t.ly, gly),
    )
    return loss, grad


def loss_gradient(raw: RawParams, tgt: BranchTarget, w: LossWeights = LossWeights()) -> RawParams:
    return loss_and_gradient(raw, tgt, w)[1]


def raw_loss(raw: RawParams, tgt: BranchTarget, w: LossWeights = LossWeights()) -> float:
    return total_loss(activate(raw), tgt, w)


def finite_diff_check(
    raw: RawParams,
    tgt: BranchTarget,
    w: LossWeights = LossWeights(),
    step: float = 1e-4,
    floor: float = 1e-8,
) -> float:
    """Max relative error of the analytic gradient against central differences.

    Only entries with ``|analytic| > floor`` take part.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    analytic = loss_gradient(raw, tgt, w).flat()
    numeric = numeric_gradient(raw, tgt, w, step).flat()
    sel = np.abs(analytic) > floor
    if not sel.any():
        return 0.0
    return float(np.max(np.abs(analytic[sel] - numeric[sel]) / np.abs(analytic[sel])))


def numeric_gradient(
    raw: RawParams, tgt: BranchTarget, w: LossWeights = LossWeights(), step: float = 1e-4
) -> RawParams:
    grid = tgt.grid
    theta = raw.flat().copy()
    out = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + step
        up = raw_loss(RawParams.from_flat(theta, grid), tgt, w)
        theta[i] = orig - step
        down = raw_loss(RawParams.from_flat(theta, grid), tgt, w)
        theta[i] = orig
        out[i] = (up - down) / (2.0 * step)
    return RawParams.from_flat(out, grid)
