"""Command-line entry point: ``pln <subcommand> ...``.

Exit status 0 on success, 1 on malformed input, 2 on constraint violations.
Defaults for loss weights and thresholds can come from a JSON config file
named by ``--config`` or the ``PLN_CONFIG`` environment variable, e.g.::

    {"loss": {"w_link": 2.0}, "decode": {"score_threshold": 0.2},
     "nms": {"iou_threshold": 0.5}, "fit": {"max_iterations": 3000}}
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import fields

import numpy as np

from . import io
from .decoder import DecodeConfig, decode_brute, decode_pruned
from .encoder import SlotOverflow, encode_scene, perfect_prediction
from .evaluator import APMode, EvalConfig, evaluate
from .fusion import BranchTagCollision, NmsConfig, merge_branches, nms
from .grid import CORNER_KINDS, CornerKind, GridSpec, QuadrantViolation
from .loss import LossWeights, finite_diff_check, total_loss
from .synth import Diverged, FitConfig, RejectionExhausted, SceneGenConfig, fit_direct, generate_scene, planted_tensor
from .tensors import BranchTarget, BranchTensor, RawParams, ShapeMismatch, random_target
from .viz import render_pr_svg, render_svg

CONFIG_ENV = "PLN_CONFIG"

EXIT_MALFORMED = 1
EXIT_CONSTRAINT = 2


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    doc = io.load_json(path)
    if not isinstance(doc, dict):
        raise io.FormatError(path, "$", "config must be a JSON object")
    return doc


def _build(cls, section: dict, overrides: dict):
    names = {f.name for f in fields(cls)}
    kwargs = {k: v for k, v in section.items() if k in names}
    kwargs.update({k: v for k, v in overrides.items() if v is not None and k in names})
    return cls(**kwargs)


def _weights(args, cfg) -> LossWeights:
    return _build(LossWeights, cfg.get("loss", {}), {
        "w_class": args.w_class, "w_coord": args.w_coord, "w_link": args.w_link,
        "normalize": True if args.normalize else None,
    })


def _emit(text: str, out: str | None) -> None:
    if out:
        io.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _branch_objects(path, kind_cls):
    grid, branches = io.read_container(path)
    return grid, [kind_cls(**b) for b in branches]


def _pick_branch(objs, kind: CornerKind, path):
    if len(objs) == 1:
        return objs[0]
    if len(objs) == 4:
        return objs[kind.index]
    raise UsageError(f"{path}: container holds {len(objs)} branches; expected 1 or 4")


def _targets(path, kinds=None):
    grid, tensors = _branch_objects(path, BranchTensor)
    if kinds is None:
        kinds = CORNER_KINDS if len(tensors) == 4 else [CornerKind.LEFT_TOP] * len(tensors)
    return grid, [BranchTarget.from_tensor(t, k) for t, k in zip(tensors, kinds)]


# -- subcommands ------------------------------------------------------------


def cmd_encode(args, cfg):
    scene = io.load_scene(args.scene)
    N = args.N or max(scene.n_classes, 1)
    grid = GridSpec(args.S, args.B, N)
    kinds = CORNER_KINDS if args.branch == "all" else [CornerKind.parse(args.branch)]
    targets = [encode_scene(scene, grid, k, permissive=args.permissive) for k in kinds]
    for t in targets:
        if t.dropped:
            print(f"{t.kind.value}: dropped boxes {list(t.dropped)}", file=sys.stderr)
    io.write_container(args.output, grid, targets)
    print(f"wrote {args.output}: S={grid.S} B={grid.B} N={grid.N} branches={len(targets)}")


def cmd_loss(args, cfg):
    w = _weights(args, cfg)
    grid_p, preds = _branch_objects(args.prediction, BranchTensor)
    grid_t, tgts = _targets(args.target)
    if grid_p != grid_t or len(preds) != len(tgts):
        raise ShapeMismatch(f"prediction {grid_p} x{len(preds)} vs target {grid_t} x{len(tgts)}")
    print(repr(sum(total_loss(p, t, w) for p, t in zip(preds, tgts))))


def cmd_gradcheck(args, cfg):
    w = _weights(args, cfg)
    rng = np.random.default_rng(args.seed)
    if args.raw:
        grid, raws = _branch_objects(args.raw, RawParams)
    else:
        grid = GridSpec(args.S, args.B, args.N)
        raws = [RawParams.random(grid, rng)]
    if args.target:
        grid_t, tgts = _targets(args.target)
        if grid_t != grid or len(tgts) != len(raws):
            raise ShapeMismatch(f"raw {grid} x{len(raws)} vs target {grid_t} x{len(tgts)}")
    else:
        tgts = [random_target(grid, rng) for _ in raws]
    err = max(finite_diff_check(r, t, w, step=args.step) for r, t in zip(raws, tgts))
    print(f"max relative error: {err:.3e}")


def _decode_cfg(args, cfg) -> DecodeConfig:
    return _build(DecodeConfig, cfg.get("decode", {}), {
        "score_threshold": args.threshold, "max_detections": args.max_detections,
        "existence_floor": args.existence_floor,
    })


def cmd_decode(args, cfg):
    kind = CornerKind.parse(args.branch)
    grid, tensors = _branch_objects(args.container, BranchTensor)
    t = _pick_branch(tensors, kind, args.container)
    if args.perfect:
        t = perfect_prediction(BranchTarget.from_tensor(t, kind))
    dcfg = _decode_cfg(args, cfg)
    fn = decode_brute if args.brute else decode_pruned
    dets = fn(t, grid, kind, dcfg)
    _emit(json.dumps(io.detections_to_json(dets), indent=2) + "\n", args.output)


def cmd_fuse(args, cfg):
    if len(args.detections) != 4:
        raise UsageError("fuse needs exactly four detection files")
    kinds = [CornerKind.parse(b) for b in args.branches.split(",")] if args.branches else list(CORNER_KINDS)
    if len(kinds) != 4:
        raise UsageError("--branches needs four comma-separated corner kinds")
    per_branch = [(k, io.load_detections(p)) for k, p in zip(kinds, args.detections)]
    ncfg = _build(NmsConfig, cfg.get("nms", {}), {"iou_threshold": args.iou})
    merged = merge_branches(per_branch, ncfg)
    _emit(json.dumps(io.detections_to_json(merged), indent=2) + "\n", args.output)


def cmd_nms(args, cfg):
    ncfg = _build(NmsConfig, cfg.get("nms", {}), {"iou_threshold": args.iou})
    _emit(json.dumps(io.detections_to_json(nms(io.load_detections(args.detections), ncfg)), indent=2) + "\n", args.output)


def cmd_eval(args, cfg):
    dets = io.load_detections(args.detections)
    scene = io.load_scene(args.scene)
    section = dict(cfg.get("eval", {}))
    mode = args.mode or section.pop("ap_mode", None)
    ecfg = _build(EvalConfig, section, {"iou_threshold": args.iou, "ap_mode": APMode(mode) if mode else None})
    report = evaluate([(dets, scene)], n_classes=args.N, cfg=ecfg)
    _emit(json.dumps(report.to_json(), indent=2) + "\n", args.output)
    if args.pr_svg:
        curves = {c: (r.precision, r.recall) for c, r in report.per_class.items()}
        io.atomic_write(args.pr_svg, render_pr_svg(curves))


def cmd_synth(args, cfg):
    section = dict(cfg.get("synth", {}))
    if "n_boxes" in section:
        section["n_boxes"] = tuple(section["n_boxes"])
    n_boxes = (args.n_min, args.n_max) if args.n_min is not None or args.n_max is not None else None
    if n_boxes is not None:
        base = section.get("n_boxes", SceneGenConfig.n_boxes)
        n_boxes = (args.n_min if args.n_min is not None else base[0], args.n_max if args.n_max is not None else base[1])
    gcfg = _build(SceneGenConfig, section, {
        "seed": args.seed, "n_boxes": n_boxes, "S": args.S, "B": args.B, "N": args.N,
        "min_side": args.min_side, "max_side": args.max_side,
        "min_center_distance": args.min_center_distance,
    })
    scene = generate_scene(gcfg)
    _emit(json.dumps(io.scene_to_json(scene), indent=2) + "\n", args.output)


def cmd_fit(args, cfg):
    scene = io.load_scene(args.scene)
    N = args.N or max(scene.n_classes, 1)
    grid = GridSpec(args.S, args.B, N)
    w = _weights(args, cfg)
    fcfg = _build(FitConfig, cfg.get("fit", {}), {
        "max_iterations": args.iterations, "initial_rate": args.lr, "raised_rate": args.raised_lr,
        "momentum": args.momentum, "weight_decay": args.weight_decay,
    })
    result = fit_direct(scene, grid, w, fcfg)
    tensors = result.tensors()
    io.write_container(args.output, grid, [tensors[k] for k in CORNER_KINDS])
    if args.raw_output:
        io.write_container(args.raw_output, grid, [result.params[k] for k in CORNER_KINDS])
    if args.trace:
        io.atomic_write(args.trace, io.trace_csv(result.trace))
    dcfg = _decode_cfg(args, cfg)
    ncfg = _build(NmsConfig, cfg.get("nms", {}), {"iou_threshold": args.iou})
    merged = merge_branches([(k, decode_pruned(tensors[k], grid, k, dcfg)) for k in CORNER_KINDS], ncfg)
    if args.detections:
        io.dump_json(args.detections, io.detections_to_json(merged))
    if args.svg:
        io.atomic_write(args.svg, render_svg(scene, merged, grid_cells=grid.S))
    report = evaluate([(merged, scene)], n_classes=grid.N)
    print(f"iterations: {len(result.trace) - 1}")
    print(f"final loss: {result.final_loss:.6g}")
    print(f"converged: {str(result.converged).lower()}")
    print(f"detections: {len(merged)}")
    print(f"mAP@0.5: {report.mAP:.4f}")


def bench_decode(S: int, B: int, N: int, active: float, threshold: float, repeats: int, seed: int, objects: int = 5) -> dict:
    grid = GridSpec(S, B, N)
    rng = np.random.default_rng(seed)
    dcfg = DecodeConfig(score_threshold=threshold, max_detections=10**6)
    kind = CornerKind.RIGHT_TOP
    t_brute, t_pruned, identical, n_dets, frac = 0.0, 0.0, True, 0, 0.0
    for _ in range(repeats):
        t, _ = planted_tensor(grid, kind, rng, n_objects=objects, active_fraction=active)
        frac += float((t.P >= dcfg.floor).mean())
        t0 = time.perf_counter()
        a = decode_brute(t, grid, kind, dcfg)
        t1 = time.perf_counter()
        b = decode_pruned(t, grid, kind, dcfg)
        t2 = time.perf_counter()
        t_brute += t1 - t0
        t_pruned += t2 - t1
        identical &= a == b
        n_dets += len(a)
    return {
        "brute_s": t_brute / repeats,
        "pruned_s": t_pruned / repeats,
        "speedup": t_brute / max(t_pruned, 1e-12),
        "identical": identical,
        "detections": n_dets,
        "strong_fraction": frac / repeats,
    }


def cmd_bench(args, cfg):
    r = bench_decode(args.S, args.B, args.N, args.active, args.threshold, args.repeats, args.seed, args.objects)
    print(f"grid: S={args.S} B={args.B} N={args.N}  threshold: {args.threshold}  planted objects: {args.objects}")
    print(f"slots with P >= floor: {r['strong_fraction']:.2%}")
    print(f"{'decoder':<10}{'mean time (ms)':>16}")
    print(f"{'brute':<10}{r['brute_s'] * 1e3:>16.3f}")
    print(f"{'pruned':<10}{r['pruned_s'] * 1e3:>16.3f}")
    print(f"speedup: {r['speedup']:.1f}x")
    print(f"detections per run: {r['detections'] / args.repeats:.1f}")
    print(f"outputs identical: {str(r['identical']).lower()}")
    return 0 if r["identical"] else EXIT_CONSTRAINT


# -- parser -----------------------------------------------------------------


def _add_weights(p):
    p.add_argument("--w-class", type=float)
    p.add_argument("--w-coord", type=float)
    p.add_argument("--w-link", type=float)
    p.add_argument("--normalize", action="store_true", help="divide the loss by S*S*2B")


def _add_decode(p):
    p.add_argument("--threshold", type=float, help="score threshold (default 0.1)")
    p.add_argument("--existence-floor", type=float, help="skip points with P below this (default: threshold)")
    p.add_argument("--max-detections", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pln", description="Point-linking detection codec.")
    parser.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="scene JSON -> target container")
    p.add_argument("scene")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--B", type=int, default=1)
    p.add_argument("--N", type=int, help="number of classes (default: from the scene)")
    p.add_argument("--branch", default="all", help="corner kind or 'all' (default)")
    p.add_argument("--permissive", action="store_true", help="drop boxes that do not fit instead of failing")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("loss", help="total loss of a prediction container against a target container")
    p.add_argument("prediction")
    p.add_argument("target")
    _add_weights(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradient")
    p.add_argument("raw", nargs="?", help="container of raw parameters (default: random)")
    p.add_argument("target", nargs="?", help="target container (default: random)")
    p.add_argument("--S", type=int, default=3)
    p.add_argument("--B", type=int, default=1)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    _add_weights(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("decode", help="container -> detections JSON")
    p.add_argument("container")
    p.add_argument("--branch", default="left_top")
    p.add_argument("--perfect", action="store_true", help="treat the container as a target and decode its perfect prediction")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--brute", action="store_true")
    g.add_argument("--pruned", action="store_true", help="(default)")
    _add_decode(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("fuse", help="merge four branch detection files with NMS")
    p.add_argument("detections", nargs="+")
    p.add_argument("--branches", help="comma-separated corner kinds of the files (default lt,rt,lb,rb)")
    p.add_argument("--iou", type=float, help="NMS IoU threshold (default 0.45)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("nms", help="class-wise NMS over one detection file")
    p.add_argument("detections")
    p.add_argument("--iou", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_nms)

    p = sub.add_parser("eval", help="detections + scene -> evaluation report JSON")
    p.add_argument("detections")
    p.add_argument("scene")
    p.add_argument("--iou", type=float)
    p.add_argument("--mode", choices=[m.value for m in APMode])
    p.add_argument("--N", type=int)
    p.add_argument("--pr-svg")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a random encodable scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--S", type=int)
    p.add_argument("--B", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--min-side", type=float)
    p.add_argument("--max-side", type=float)
    p.add_argument("--min-center-distance", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit raw tensors to a scene by gradient descent")
    p.add_argument("scene")
    p.add_argument("-o", "--output", required=True, help="fitted (activated) four-branch container")
    p.add_argument("--raw-output")
    p.add_argument("--trace", help="loss trace CSV")
    p.add_argument("--svg", help="overlay of fused detections on the scene")
    p.add_argument("--detections", help="fused detections JSON")
    p.add_argument("--S", type=int, default=8)
    p.add_argument("--B", type=int, default=2)
    p.add_argument("--N", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--raised-lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--iou", type=float, help="NMS IoU threshold")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; fitting is deterministic")
    _add_weights(p)
    _add_decode(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="time brute vs pruned decoding")
    p.add_argument("--S", type=int, default=20)
    p.add_argument("--B", type=int, default=2)
    p.add_argument("--N", type=int, default=20)
    p.add_argument("--active", type=float, default=0.04, help="fraction of background slots with high existence")
    p.add_argument("--objects", type=int, default=5, help="planted objects per tensor")
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        status = args.func(args, cfg)
    except io.FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MALFORMED
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MALFORMED
    except (SlotOverflow, BranchTagCollision, ShapeMismatch, Diverged, RejectionExhausted, QuadrantViolation) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONSTRAINT
    return status or 0


if __name__ == "__main__":
    sys.exit(main())
