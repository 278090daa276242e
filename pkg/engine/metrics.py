"""
NucleiGrind — Instance segmentation metrics: Dice, AJI, Hausdorff distance, PQ.

All metrics work from one pairwise intersection table built with a single
bincount; instance ids are arbitrary positive integers.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from content.models import Match, MetricsReport
from engine.grid import extract_contour
from engine.validator import as_label_map, check_same_grid

logger = logging.getLogger(__name__)

PQ_IOU_THRESHOLD = 0.5


@dataclass
class OverlapTable:
    """
    Pixel counts shared by every (gt, pred) instance pair.

    gt_ids / pred_ids are the sorted present ids; intersections[i, j] counts
    pixels with gt == gt_ids[i] and pred == pred_ids[j].
    """
    gt_ids: np.ndarray
    pred_ids: np.ndarray
    gt_areas: np.ndarray
    pred_areas: np.ndarray
    intersections: np.ndarray

    @property
    def unions(self):
        return self.gt_areas[:, None] + self.pred_areas[None, :] - self.intersections

    @property
    def ious(self):
        unions = self.unions
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(unions > 0, self.intersections / np.maximum(unions, 1), 0.0)


def _compact(labels):
    """Map labels to 0..n with 0 kept for background; returns (ids, compact)."""
    ids, inverse = np.unique(labels, return_inverse=True)
    inverse = inverse.reshape(labels.shape)
    if ids.size and ids[0] == 0:
        return ids[1:], inverse
    return ids, inverse + 1


def overlap_table(pred, gt):
    pred = as_label_map(pred)
    gt = as_label_map(gt)
    check_same_grid(pred, gt, names=["pred", "gt"])
    gt_ids, gt_idx = _compact(gt)
    pred_ids, pred_idx = _compact(pred)
    n_gt, n_pred = gt_ids.size + 1, pred_ids.size + 1
    joint = np.bincount((gt_idx * n_pred + pred_idx).ravel(), minlength=n_gt * n_pred)
    joint = joint.reshape(n_gt, n_pred).astype(np.int64)
    return OverlapTable(
        gt_ids=gt_ids,
        pred_ids=pred_ids,
        gt_areas=joint[1:, :].sum(axis=1),
        pred_areas=joint[:, 1:].sum(axis=0),
        intersections=joint[1:, 1:],
    )


# ═══════════════════════════════════════════════════════════
#  PIXEL / AGGREGATED METRICS
# ═══════════════════════════════════════════════════════════

def dice_score(pred, gt):
    """Binary foreground Dice; two empty foregrounds score 1.0."""
    pred = as_label_map(pred)
    gt = as_label_map(gt)
    check_same_grid(pred, gt, names=["pred", "gt"])
    p, g = pred > 0, gt > 0
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total


def aji_score(pred, gt, table=None):
    """
    Aggregated Jaccard Index.

    GT instances are visited in ascending id order; each picks the prediction
    with the highest Jaccard (ties go to the lower pred id, a prediction may
    be picked more than once). A GT instance that overlaps nothing scores 0
    against every prediction and so picks the lowest pred id. Predictions
    never picked add their full area to the union.
    """
    if table is None:
        table = overlap_table(pred, gt)
    if table.gt_ids.size == 0 and table.pred_ids.size == 0:
        return 1.0
    intersection_sum = 0
    union_sum = 0
    used = np.zeros(table.pred_ids.size, dtype=bool)
    unions = table.unions
    for i in range(table.gt_ids.size):
        if table.pred_ids.size == 0:
            union_sum += int(table.gt_areas[i])
            continue
        overlaps = table.intersections[i]
        jaccard = overlaps / unions[i]
        j = int(np.argmax(jaccard))   # first maximum, lowest pred id
        intersection_sum += int(overlaps[j])
        union_sum += int(unions[i, j])
        used[j] = True
    union_sum += int(table.pred_areas[~used].sum())
    return intersection_sum / union_sum if union_sum else 0.0


# ═══════════════════════════════════════════════════════════
#  PANOPTIC QUALITY
# ═══════════════════════════════════════════════════════════

def pq_matches(table):
    """All pairs with IoU > 0.5, ordered by gt id; such pairs are one-to-one."""
    ious = table.ious
    gi, pj = np.nonzero(ious > PQ_IOU_THRESHOLD)
    return [
        Match(gt_id=int(table.gt_ids[i]), pred_id=int(table.pred_ids[j]), iou=float(ious[i, j]))
        for i, j in zip(gi, pj)
    ]


def pq_components(pred, gt, table=None):
    """Returns (pq, dq, sq, matches)."""
    if table is None:
        table = overlap_table(pred, gt)
    matches = pq_matches(table)
    tp = len(matches)
    fp = table.pred_ids.size - tp
    fn = table.gt_ids.size - tp
    denominator = tp + 0.5 * fp + 0.5 * fn
    if denominator == 0:
        return 1.0, 1.0, 1.0, matches
    iou_sum = sum(m.iou for m in matches)
    dq = tp / denominator
    sq = iou_sum / tp if tp else 0.0
    return iou_sum / denominator, dq, sq, matches


def pq_score(pred, gt):
    """Panoptic quality and the IoU > 0.5 matches behind it."""
    pq, _, _, matches = pq_components(pred, gt)
    return pq, matches


# ═══════════════════════════════════════════════════════════
#  HAUSDORFF
# ═══════════════════════════════════════════════════════════

def contour_hausdorff(a, b):
    """
    Symmetric Hausdorff distance between two point sets given as N×2
    (row, col) arrays. Two empty sets are 0 apart, one empty set is inf away.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if a.shape[0] == 0 and b.shape[0] == 0:
        return 0.0
    if a.shape[0] == 0 or b.shape[0] == 0:
        return float("inf")
    d = cdist(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def greedy_pairs(table):
    """One-to-one pairs with IoU > 0, greedily by descending IoU (ties by gt then pred id)."""
    ious = table.ious
    gi, pj = np.nonzero(ious > 0)
    order = sorted(zip(gi, pj), key=lambda ij: (-ious[ij[0], ij[1]], ij[0], ij[1]))
    gt_used, pred_used = set(), set()
    pairs = []
    for i, j in order:
        if i in gt_used or j in pred_used:
            continue
        gt_used.add(i)
        pred_used.add(j)
        pairs.append((int(i), int(j)))
    return pairs


def hausdorff_distance(pred, gt, table=None):
    """
    Mean Hausdorff distance over paired instances, each unpaired instance on
    either side costing the image diagonal. Two empty maps give 0.
    """
    pred = as_label_map(pred)
    gt = as_label_map(gt)
    if table is None:
        table = overlap_table(pred, gt)
    height, width = gt.shape
    diagonal = float(np.hypot(height - 1, width - 1))
    pairs = greedy_pairs(table)
    terms = []
    for i, j in pairs:
        gt_points = np.argwhere(extract_contour(gt, int(table.gt_ids[i])))
        pred_points = np.argwhere(extract_contour(pred, int(table.pred_ids[j])))
        terms.append(contour_hausdorff(gt_points, pred_points))
    unpaired = (table.gt_ids.size - len(pairs)) + (table.pred_ids.size - len(pairs))
    terms.extend([diagonal] * unpaired)
    if not terms:
        return 0.0
    return float(np.mean(terms))


def evaluate(pred, gt):
    """All four metrics from one shared overlap table."""
    table = overlap_table(pred, gt)
    pq, dq, sq, matches = pq_components(pred, gt, table)
    report = MetricsReport(
        dice=dice_score(pred, gt),
        aji=aji_score(pred, gt, table),
        hausdorff=hausdorff_distance(pred, gt, table),
        pq=pq,
        matches=matches,
        dq=dq,
        sq=sq,
    )
    logger.debug("evaluate: %d gt, %d pred, %d match(es)", table.gt_ids.size, table.pred_ids.size, len(matches))
    return report
