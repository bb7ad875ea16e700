"""Point-linking detection codec: encode boxes into grid point/link tensors,
score and decode point pairs, fuse corner branches, evaluate."""

from .decoder import DecodeConfig, Detection, decode_brute, decode_pruned, pair_score
from .encoder import Scene, SlotOverflow, encode_scene, perfect_prediction
from .evaluator import APMode, EvalConfig, average_precision, evaluate, match_detections
from .fusion import NmsConfig, merge_branches, nms
from .grid import (
    CORNER_KINDS,
    Box,
    CellLocation,
    CornerKind,
    GridSpec,
    Point2D,
    box_from_pair,
    center_of,
    corner_of,
    iou,
    locate,
)
from .loss import LossWeights, finite_diff_check, loss_gradient, total_loss
from .tensors import BranchTarget, BranchTensor, RawParams, activate

__version__ = "0.1.0"
