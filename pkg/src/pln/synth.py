"""Synthetic scenes and direct-parameter fitting.

Instead of training a network, :func:`fit_direct` runs momentum gradient
descent on the raw pre-activation tensors of all four branches so that
they reproduce one scene. This exercises the same loss, gradient and
decode path a trained model would.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .encoder import Scene, SlotOverflow, encode_scene, is_encodable
from .grid import CORNER_KINDS, Box, CornerKind, GridSpec
from .loss import LossWeights, loss_and_gradient
from .tensors import BranchTarget, BranchTensor, RawParams, activate, random_tensor

log = logging.getLogger(__name__)


class RejectionExhausted(RuntimeError):
    pass


class Diverged(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneGenConfig:
    seed: int = 0
    n_boxes: tuple[int, int] = (1, 3)
    min_side: float = 0.1
    max_side: float = 0.6
    # in normalized units; 2/S keeps centers in distinct cells
    min_center_distance: float = 0.0
    N: int = 3
    S: int = 8
    B: int = 2
    max_attempts: int = 1000

    def __post_init__(self):
        lo, hi = self.n_boxes
        if not 0 <= lo <= hi:
            raise ValueError(f"bad n_boxes range {self.n_boxes}")
        if not 0.0 < self.min_side <= self.max_side <= 1.0:
            raise ValueError("need 0 < min_side <= max_side <= 1")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.S, self.B, self.N)


def _sample_box(rng: np.random.Generator, cfg: SceneGenConfig) -> Box:
    w, h = rng.uniform(cfg.min_side, cfg.max_side, size=2)
    x0 = rng.uniform(0.0, 1.0 - w)
    y0 = rng.uniform(0.0, 1.0 - h)
    return Box(float(x0), float(y0), float(x0 + w), float(y0 + h))


def generate_scene(cfg: SceneGenConfig) -> Scene:
    """Sample a scene encodable for all four branches (rejection sampling)."""
    rng = np.random.default_rng(cfg.seed)
    grid = cfg.grid
    classes = tuple(f"class{i}" for i in range(cfg.N))
    for _ in range(cfg.max_attempts):
        n = int(rng.integers(cfg.n_boxes[0], cfg.n_boxes[1] + 1))
        boxes, centers = [], []
        for _ in range(n):
            b = _sample_box(rng, cfg)
            c = np.array([(b.xmin + b.xmax) / 2, (b.ymin + b.ymax) / 2])
            if any(np.hypot(*(c - o)) < cfg.min_center_distance for o in centers):
                break
            boxes.append((b, int(rng.integers(cfg.N))))
            centers.append(c)
        else:
            scene = Scene(boxes=tuple(boxes), classes=classes, scene_id=f"synth-{cfg.seed}")
            if is_encodable(scene, grid):
                return scene
    raise RejectionExhausted(f"no encodable scene after {cfg.max_attempts} attempts (seed {cfg.seed})")


@dataclass(frozen=True)
class FitConfig:
    initial_rate: float = 1.0
    raised_rate: float = 20.0
    # rate ramps linearly from initial to raised over this many iterations
    switch_iteration: int = 200
    momentum: float = 0.9
    weight_decay: float = 0.0
    max_iterations: int = 5000
    loss_threshold: float = 1e-3
    # starting logit of every existence probability
    init_existence_logit: float = 0.0

    def __post_init__(self):
        if self.initial_rate <= 0 or self.raised_rate <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")

    def rate(self, it: int) -> float:
        if it >= self.switch_iteration or self.switch_iteration <= 0:
            return self.raised_rate
        frac = it / self.switch_iteration
        return self.initial_rate + frac * (self.raised_rate - self.initial_rate)


@dataclass
class FitResult:
    params: dict[CornerKind, RawParams]
    targets: dict[CornerKind, BranchTarget]
    trace: list[float] = field(default_factory=list)
    loss_threshold: float = 1e-3

    @property
    def final_loss(self) -> float:
        return self.trace[-1]

    @property
    def converged(self) -> bool:
        return self.trace[-1] < self.loss_threshold

    def tensors(self):
        return {k: activate(p) for k, p in self.params.items()}


def init_params(grid: GridSpec, cfg: FitConfig) -> RawParams:
    raw = RawParams.zeros(grid)
    raw.P[...] = cfg.init_existence_logit
    return raw


def _total(params, targets, w):
    loss, grads = 0.0, {}
    for k, tgt in targets.items():
        l, g = loss_and_gradient(params[k], tgt, w)
        loss += l
        grads[k] = g
    return loss, grads


def fit_direct(
    scene: Scene,
    grid: GridSpec,
    w: LossWeights = LossWeights(),
    cfg: FitConfig = FitConfig(),
    kinds=CORNER_KINDS,
) -> FitResult:
    targets = {k: encode_scene(scene, grid, k) for k in kinds}
    params = {k: init_params(grid, cfg) for k in kinds}
    velocity = {k: RawParams.zeros(grid) for k in kinds}

    loss, grads = _total(params, targets, w)
    initial = loss
    trace = [loss]
    for it in range(cfg.max_iterations):
        if loss < cfg.loss_threshold:
            break
        lr = cfg.rate(it)
        for k in kinds:
            p, g, v = params[k], grads[k], velocity[k]
            for name, arr in p.arrays().items():
                step = g.arrays()[name]
                if cfg.weight_decay:
                    step = step + cfg.weight_decay * arr
                vel = v.arrays()[name]
                vel *= cfg.momentum
                vel -= lr * step
                arr += vel
        loss, grads = _total(params, targets, w)
        trace.append(loss)
        if not np.isfinite(loss) or loss > 10.0 * initial:
            raise Diverged(f"loss {loss:.4g} at iteration {it + 1} exceeds 10x initial {initial:.4g}")
    log.debug("fit finished after %d iterations, loss %.3g", len(trace) - 1, loss)
    return FitResult(params=params, targets=targets, trace=trace, loss_threshold=cfg.loss_threshold)


def planted_tensor(
    grid: GridSpec,
    k: CornerKind,
    rng: np.random.Generator,
    n_objects: int = 5,
    active_fraction: float = 0.05,
    blend: float = 0.85,
) -> tuple[BranchTensor, Scene]:
    """Sparse random tensor with the points of a random scene written into it.

    Background slots follow :func:`random_tensor`; slots of planted objects
    get P in [0.7, 1) and rows mixing ``blend`` of the one-hot truth with
    random noise, so they decode to real detections.
    """
    t = random_tensor(grid, rng, active_fraction=active_fraction).copy()
    scene = generate_scene(SceneGenConfig(
        seed=int(rng.integers(2**31)), n_boxes=(n_objects, n_objects),
        S=grid.S, B=grid.B, N=grid.N, min_side=0.05, max_side=0.5,
    ))
    tgt = encode_scene(scene, grid, k)
    m = tgt.mask
    noise = random_tensor(grid, rng)
    t.P[m] = 0.7 + 0.3 * rng.random(int(m.sum()))
    t.x[m], t.y[m] = tgt.x[m], tgt.y[m]
    for name in ("Q", "lx", "ly"):
        getattr(t, name)[m] = blend * getattr(tgt, name)[m] + (1 - blend) * getattr(noise, name)[m]
    return t, scene


__all__ = [
    "Diverged",
    "FitConfig",
    "FitResult",
    "RejectionExhausted",
    "SceneGenConfig",
    "SlotOverflow",
    "fit_direct",
    "generate_scene",
    "planted_tensor",
]
