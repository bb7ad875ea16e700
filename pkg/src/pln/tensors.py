"""Per-branch tensor fields.

Every field is a float64 array indexed ``[row, col, slot, ...]``. Slots
``0..B-1`` hold center points and ``B..2B-1`` hold corner points; slot ``j``
links only to slot ``j + B`` (and back).

Shapes for a grid (S, B, N)::

    P, x, y     (S, S, 2B)
    Q           (S, S, 2B, N)
    lx, ly      (S, S, 2B, S)   lx is over columns, ly over rows
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import CornerKind, GridSpec

FIELD_NAMES = ("P", "Q", "x", "y", "lx", "ly")


class ShapeMismatch(ValueError):
    pass


def field_shapes(grid: GridSpec) -> dict[str, tuple[int, ...]]:
    S, n2, N = grid.S, grid.n_slots, grid.N
    return {
        "P": (S, S, n2),
        "Q": (S, S, n2, N),
        "x": (S, S, n2),
        "y": (S, S, n2),
        "lx": (S, S, n2, S),
        "ly": (S, S, n2, S),
    }


def _grid_from_arrays(P: np.ndarray, Q: np.ndarray) -> GridSpec:
    if P.ndim != 3 or P.shape[0] != P.shape[1] or P.shape[2] % 2:
        raise ShapeMismatch(f"bad P shape {P.shape}")
    return GridSpec(S=P.shape[0], B=P.shape[2] // 2, N=Q.shape[-1])


def _check_shapes(obj, grid: GridSpec) -> None:
    for name, shape in field_shapes(grid).items():
        arr = getattr(obj, name)
        if arr.shape != shape:
            raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shape}")


class _Fields:
    P: np.ndarray
    Q: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lx: np.ndarray
    ly: np.ndarray

    def __post_init__(self):
        for name in FIELD_NAMES:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        _check_shapes(self, self.grid)

    @property
    def grid(self) -> GridSpec:
        return _grid_from_arrays(self.P, self.Q)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in FIELD_NAMES}

    def copy(self):
        return replace(self, **{k: v.copy() for k, v in self.arrays().items()})


@dataclass(frozen=True, eq=False)
class BranchTensor(_Fields):
    """Activated predictions of one branch."""

    P: np.ndarray
    Q: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lx: np.ndarray
    ly: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "BranchTensor":
        return cls(**{k: np.zeros(s) for k, s in field_shapes(grid).items()})


@dataclass(frozen=True, eq=False)
class RawParams(_Fields):
    """Unconstrained pre-activation values; same layout as BranchTensor."""

    P: np.ndarray
    Q: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lx: np.ndarray
    ly: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RawParams":
        return cls(**{k: np.zeros(s) for k, s in field_shapes(grid).items()})

    @classmethod
    def random(cls, grid: GridSpec, rng: np.random.Generator, scale: float = 1.0) -> "RawParams":
        return cls(**{k: scale * rng.standard_normal(s) for k, s in field_shapes(grid).items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in FIELD_NAMES])

    @classmethod
    def from_flat(cls, vec: np.ndarray, grid: GridSpec) -> "RawParams":
        out, pos = {}, 0
        for k, shape in field_shapes(grid).items():
            size = int(np.prod(shape))
            out[k] = vec[pos:pos + size].reshape(shape)
            pos += size
        return cls(**out)


@dataclass(frozen=True, eq=False)
class BranchTarget(_Fields):
    """Ground truth for one branch.

    ``mask`` is the point-presence indicator; its complement is the
    no-point indicator. Where ``mask`` is 0 every field is 0.
    """

    mask: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lx: np.ndarray
    ly: np.ndarray
    kind: CornerKind = CornerKind.LEFT_TOP
    # indices into scene.boxes that were dropped by the permissive encoder
    dropped: tuple[int, ...] = field(default=())

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))
        if self.mask.shape != self.P.shape:
            raise ShapeMismatch(f"mask shape {self.mask.shape} != P shape {self.P.shape}")

    def as_tensor(self) -> BranchTensor:
        return BranchTensor(**{k: v.copy() for k, v in self.arrays().items()})

    @classmethod
    def from_tensor(cls, t: BranchTensor, kind: CornerKind = CornerKind.LEFT_TOP) -> "BranchTarget":
        """Inverse of :meth:`as_tensor`: slots with P == 1 are the masked ones."""
        mask = t.P == 1.0
        arrays = {}
        for k, v in t.arrays().items():
            m = mask.reshape(mask.shape + (1,) * (v.ndim - mask.ndim))
            arrays[k] = np.where(m, v, 0.0)
        return cls(mask=mask, kind=kind, **arrays)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def activate(raw: RawParams) -> BranchTensor:
    return BranchTensor(
        P=sigmoid(raw.P),
        Q=softmax(raw.Q),
        x=sigmoid(raw.x),
        y=sigmoid(raw.y),
        lx=softmax(raw.lx),
        ly=softmax(raw.ly),
    )


def random_tensor(
    grid: GridSpec,
    rng: np.random.Generator,
    active_fraction: float | None = None,
    low: float = 0.0,
    peak: float = 2.0,
) -> BranchTensor:
    """Random valid tensor for tests and benchmarks.

    With ``active_fraction`` set, that share of slots gets P in [0.5, 1) and
    the rest get P in [low, 0.05); otherwise P is uniform in [0, 1).
    Q and link rows are softmaxes of normal logits scaled by ``peak``;
    larger values give more nearly one-hot rows and hence more pairs above
    a given score threshold.
    """
    shapes = field_shapes(grid)
    if active_fraction is None:
        P = rng.random(shapes["P"])
    else:
        active = rng.random(shapes["P"]) < active_fraction
        P = np.where(active, 0.5 + 0.5 * rng.random(shapes["P"]), low + (0.05 - low) * rng.random(shapes["P"]))
    return BranchTensor(
        P=P,
        Q=softmax(peak * rng.standard_normal(shapes["Q"])),
        x=rng.random(shapes["x"]),
        y=rng.random(shapes["y"]),
        lx=softmax(peak * rng.standard_normal(shapes["lx"])),
        ly=softmax(peak * rng.standard_normal(shapes["ly"])),
    )


def random_target(grid: GridSpec, rng: np.random.Generator, density: float = 0.5) -> BranchTarget:
    """Random target with valid field values: one-hot class and link rows, offsets in [0, 1].

    The mask is drawn per slot, so center/corner pairing is not enforced;
    the loss does not depend on it.
    """
    shapes = field_shapes(grid)
    mask = rng.random(shapes["P"]) < density

    def one_hot(shape):
        out = np.zeros(shape)
        idx = rng.integers(shape[-1], size=shape[:-1])
        np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
        return np.where(mask[..., None], out, 0.0)

    return BranchTarget(
        mask=mask,
        P=mask.astype(np.float64),
        Q=one_hot(shapes["Q"]),
        x=np.where(mask, rng.random(shapes["x"]), 0.0),
        y=np.where(mask, rng.random(shapes["y"]), 0.0),
        lx=one_hot(shapes["lx"]),
        ly=one_hot(shapes["ly"]),
    )


__all__ = [
    "FIELD_NAMES",
    "BranchTarget",
    "BranchTensor",
    "RawParams",
    "ShapeMismatch",
    "activate",
    "field_shapes",
    "random_target",
    "random_tensor",
    "sigmoid",
    "softmax",
]

