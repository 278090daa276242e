"""
NucleiGrind — Training losses with analytic gradients.

Every elementary loss returns (loss, grad) where grad has the shape of the
prediction. Losses are pixel means so values compare across scales.
"""
import logging

import numpy as np

from content.models import EncodingConfig, LossConfig
from engine.encodings import structure_encoding
from engine.errors import DimensionMismatch, MissingScale
from engine.grid import downsample_field, downsample_semantic, semantic_from_labels
from engine.validator import as_label_map, as_scalar_field, as_semantic_mask

logger = logging.getLogger(__name__)

_DEFAULT_CONFIG = LossConfig()

# decoder block 4 is full resolution, each earlier block halves it
FULL_RESOLUTION_BLOCK = 4


def _check_prob_field(pred, target):
    pred = as_scalar_field(pred)
    target = as_semantic_mask(target)
    if pred.shape[:2] != target.shape:
        raise DimensionMismatch(f"prediction grid {pred.shape[:2]} does not match target {target.shape}")
    if target.size and target.max() >= pred.shape[2]:
        raise DimensionMismatch(f"target class {target.max()} needs more than {pred.shape[2]} channel(s)")
    return pred, target


def one_hot(target, num_classes):
    """H×W class ids to an H×W×C one-hot float field."""
    target = as_label_map(target)
    return (target[:, :, None] == np.arange(num_classes)).astype(np.float64)


# ═══════════════════════════════════════════════════════════
#  ELEMENTARY LOSSES
# ═══════════════════════════════════════════════════════════

def cross_entropy(pred, target, cfg=_DEFAULT_CONFIG):
    """-mean log(max(p_true, eps)); gradient is zero where the clamp is active."""
    pred, target = _check_prob_field(pred, target)
    n = target.size
    grad = np.zeros_like(pred)
    if n == 0:
        return 0.0, grad
    rows, cols = np.indices(target.shape)
    p_true = pred[rows, cols, target]
    clamped = np.maximum(p_true, cfg.epsilon_ce)
    loss = float(-np.log(clamped).sum() / n)
    active = p_true > cfg.epsilon_ce
    grad[rows[active], cols[active], target[active]] = -1.0 / (n * p_true[active])
    return loss, grad


def dice_loss(pred, target, cfg=_DEFAULT_CONFIG):
    """
    1 - mean over classes of (2·Σpg + eps) / (Σp + Σg + eps).
    Background counts as a class.
    """
    pred, target = _check_prob_field(pred, target)
    eps = cfg.epsilon_dice
    classes = pred.shape[2]
    g = one_hot(target, classes)
    intersection = (pred * g).sum(axis=(0, 1))
    denominator = pred.sum(axis=(0, 1)) + g.sum(axis=(0, 1)) + eps
    numerator = 2.0 * intersection + eps
    loss = float(1.0 - np.mean(numerator / denominator))
    grad = -(2.0 * g * denominator - numerator) / (denominator ** 2) / classes
    return loss, grad


def mse(pred, target):
    """Mean squared error over every entry; grad = 2(pred - target)/N."""
    pred = as_scalar_field(pred)
    target = as_scalar_field(target)
    if pred.shape != target.shape:
        raise DimensionMismatch(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    n = diff.size
    if n == 0:
        return 0.0, np.zeros_like(diff)
    return float((diff * diff).sum() / n), 2.0 * diff / n


# ═══════════════════════════════════════════════════════════
#  MULTI-SCALE AGGREGATES
# ═══════════════════════════════════════════════════════════

def _scale_pairs(preds, targets, cfg):
    for block in cfg.scale_blocks:
        if block not in preds:
            raise MissingScale(f"no prediction for decoder block {block}")
        if block not in targets:
            raise MissingScale(f"no target for decoder block {block}")
        yield block, preds[block], targets[block]


def semantic_loss(preds, targets, cfg=_DEFAULT_CONFIG):
    """Σ over configured blocks of cross-entropy + Dice."""
    total = 0.0
    for block, pred, target in _scale_pairs(preds, targets, cfg):
        ce, _ = cross_entropy(pred, target, cfg)
        dl, _ = dice_loss(pred, target, cfg)
        logger.debug("semantic_loss block %d: ce=%.6f dice=%.6f", block, ce, dl)
        total += ce + dl
    return total


def structure_loss(preds, targets, cfg=_DEFAULT_CONFIG):
    """Σ over configured blocks of the structure-field MSE."""
    total = 0.0
    for block, pred, target in _scale_pairs(preds, targets, cfg):
        value, _ = mse(pred, target)
        logger.debug("structure_loss block %d: mse=%.6f", block, value)
        total += value
    return total


def position_loss(pred_sem, pred_str, target):
    """Position regression of both branches against the same target."""
    sem, _ = mse(pred_sem, target)
    struct, _ = mse(pred_str, target)
    return sem + struct


def total_loss(l_sem, l_str, l_pos, cfg=_DEFAULT_CONFIG):
    return l_sem + cfg.lambda1 * l_str + cfg.lambda2 * l_pos


# ═══════════════════════════════════════════════════════════
#  TARGETS
# ═══════════════════════════════════════════════════════════

def scale_factor(block):
    return 2 ** (FULL_RESOLUTION_BLOCK - int(block))


def build_scale_targets(labels, blocks=(2, 3, 4), cfg: EncodingConfig = EncodingConfig()):
    """
    Per-block supervision from one full-resolution label map.

    Returns (semantic_targets, structure_targets), two dicts keyed by block.
    The semantic mask is downsampled by majority vote and the structure
    field by block averaging; block k uses factor 2^(4-k).
    """
    labels = as_label_map(labels)
    semantic = semantic_from_labels(labels)
    structure = structure_encoding(labels, cfg)
    semantic_targets, structure_targets = {}, {}
    for block in sorted(set(blocks)):
        if not 1 <= block <= FULL_RESOLUTION_BLOCK:
            raise MissingScale(f"decoder block {block} does not exist (1..{FULL_RESOLUTION_BLOCK})")
        factor = scale_factor(block)
        semantic_targets[block] = downsample_semantic(semantic, factor)
        structure_targets[block] = downsample_field(structure, factor)
    return semantic_targets, structure_targets
