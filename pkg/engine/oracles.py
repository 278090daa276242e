"""
NucleiGrind — Brute-force reference implementations.

Slow, obviously-correct versions of the production algorithms. The tests and
the self-check compare the fast code against these.
"""
import numpy as np
from scipy.spatial.distance import cdist

from engine.grid import contour_mask
from engine.validator import as_label_map, instance_ids


# ═══════════════════════════════════════════════════════════
#  DISTANCES
# ═══════════════════════════════════════════════════════════

def brute_structure_distances(labels):
    """Signed nearest-contour distances by scanning every contour pixel."""
    labels = as_label_map(labels)
    contour = contour_mask(labels)
    if not contour.any():
        return None
    raw = np.zeros(labels.shape, dtype=np.float64)
    contour_points = np.argwhere(contour)

    background = np.argwhere(labels == 0)
    if background.size:
        d = cdist(background, contour_points).min(axis=1)
        raw[background[:, 0], background[:, 1]] = -d

    for instance_id in instance_ids(labels):
        own_contour = np.argwhere(contour & (labels == instance_id))
        inside = np.argwhere((labels == instance_id) & ~contour)
        if inside.size == 0:
            continue
        d = cdist(inside, own_contour).min(axis=1)
        raw[inside[:, 0], inside[:, 1]] = d
    return raw


def brute_position_encoding(labels):
    """Distance to the float mean coordinate of each instance."""
    labels = as_label_map(labels)
    field = np.zeros(labels.shape, dtype=np.float64)
    for instance_id in instance_ids(labels):
        points = np.argwhere(labels == instance_id).astype(np.float64)
        centre = points.mean(axis=0)
        d = np.sqrt(((points - centre) ** 2).sum(axis=1))
        idx = points.astype(np.int64)
        field[idx[:, 0], idx[:, 1]] = d
    return field[:, :, None]


# ═══════════════════════════════════════════════════════════
#  METRICS
# ═══════════════════════════════════════════════════════════

def naive_overlaps(pred, gt):
    """
    Pixel-by-pixel counts: (intersections {(g, p): n}, gt_areas {g: n}, pred_areas {p: n}).
    """
    pred = as_label_map(pred).tolist()
    gt = as_label_map(gt).tolist()
    intersections, gt_areas, pred_areas = {}, {}, {}
    for gt_row, pred_row in zip(gt, pred):
        for g, p in zip(gt_row, pred_row):
            if g:
                gt_areas[g] = gt_areas.get(g, 0) + 1
            if p:
                pred_areas[p] = pred_areas.get(p, 0) + 1
            if g and p:
                intersections[(g, p)] = intersections.get((g, p), 0) + 1
    return intersections, gt_areas, pred_areas


def naive_dice(pred, gt):
    _, gt_areas, pred_areas = naive_overlaps(pred, gt)
    both = sum(1 for g_row, p_row in zip(as_label_map(gt).tolist(), as_label_map(pred).tolist())
               for g, p in zip(g_row, p_row) if g and p)
    total = sum(gt_areas.values()) + sum(pred_areas.values())
    return 1.0 if total == 0 else 2.0 * both / total


def naive_aji(pred, gt):
    intersections, gt_areas, pred_areas = naive_overlaps(pred, gt)
    if not gt_areas and not pred_areas:
        return 1.0
    used = set()
    c_sum = u_sum = 0
    for g in sorted(gt_areas):
        best = None
        for p in sorted(pred_areas):
            inter = intersections.get((g, p), 0)
            union = gt_areas[g] + pred_areas[p] - inter
            # strict '>' keeps the lowest pred id on ties
            if best is None or inter / union > best[0]:
                best = (inter / union, p, inter, union)
        if best is None:
            u_sum += gt_areas[g]
            continue
        c_sum += best[2]
        u_sum += best[3]
        used.add(best[1])
    u_sum += sum(area for p, area in pred_areas.items() if p not in used)
    return c_sum / u_sum if u_sum else 0.0


def naive_pq(pred, gt):
    intersections, gt_areas, pred_areas = naive_overlaps(pred, gt)
    matched = []
    for (g, p), inter in intersections.items():
        iou = inter / (gt_areas[g] + pred_areas[p] - inter)
        if iou > 0.5:
            matched.append(iou)
    tp = len(matched)
    denominator = tp + 0.5 * (len(pred_areas) - tp) + 0.5 * (len(gt_areas) - tp)
    return 1.0 if denominator == 0 else sum(matched) / denominator


# ═══════════════════════════════════════════════════════════
#  GRADIENTS
# ═══════════════════════════════════════════════════════════

def finite_difference(loss_fn, x, step=1e-5):
    """Central differences of a scalar loss with respect to every entry of x."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_x.size):
        original = flat_x[i]
        flat_x[i] = original + step
        upper = loss_fn(x)
        flat_x[i] = original - step
        lower = loss_fn(x)
        flat_x[i] = original
        flat_grad[i] = (upper - lower) / (2.0 * step)
    return grad


def gradient_error(analytic, numeric):
    """‖a - n‖ / max(‖a‖, ‖n‖, 1e-12)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)
