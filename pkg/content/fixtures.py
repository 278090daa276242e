"""
NucleiGrind — Synthetic label maps.

generate_fixture   : seeded non-overlapping disks / ellipses / squares
random_label_map   : overlapping random rectangles, for oracle comparisons
named fixtures     : small hand-checkable maps used by tests and the self-check
"""
import logging

import numpy as np
from skimage import draw

from content.models import CONTOUR, INSIDE, FixtureSpec, ShapeFamily
from engine.errors import InfeasiblePacking
from engine.grid import dilate

logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000


# ═══════════════════════════════════════════════════════════
#  SEEDED GENERATOR
# ═══════════════════════════════════════════════════════════

def _rasterize(shape, rng, height, width, radius):
    """
    Draw one instance fully inside the image, or return None if the
    image is too small for this radius.
    """
    if 2 * radius + 1 > height or 2 * radius + 1 > width:
        return None
    row = int(rng.integers(radius, height - radius))
    col = int(rng.integers(radius, width - radius))
    mask = np.zeros((height, width), dtype=bool)
    if shape is ShapeFamily.DISK:
        rr, cc = draw.disk((row, col), radius, shape=mask.shape)
    elif shape is ShapeFamily.ELLIPSE:
        minor = int(rng.integers(max(1, radius // 2), radius + 1))
        if rng.integers(2):
            rr, cc = draw.ellipse(row, col, radius, minor, shape=mask.shape)
        else:
            rr, cc = draw.ellipse(row, col, minor, radius, shape=mask.shape)
    else:
        rr, cc = draw.rectangle((row - radius, col - radius), (row + radius, col + radius), shape=mask.shape)
    mask[rr, cc] = True
    return mask


def _blocked(labels, gap):
    """Pixels a new instance may not touch: existing nuclei grown by gap."""
    occupied = labels > 0
    if gap == 0 or not occupied.any():
        return occupied
    return dilate(occupied, gap)


def generate_fixture(spec: FixtureSpec):
    """
    Place spec.count instances with ids 1..count in placement order.
    Every instance lies fully inside the image and at least spec.min_gap
    background pixels from every other one. The seed fixes the output.
    """
    rng = np.random.default_rng(spec.seed)
    labels = np.zeros((spec.height, spec.width), dtype=np.int64)
    for instance_id in range(1, spec.count + 1):
        blocked = _blocked(labels, spec.min_gap)
        for attempt in range(MAX_PLACEMENT_ATTEMPTS):
            radius = int(rng.integers(spec.radius_min, spec.radius_max + 1))
            mask = _rasterize(spec.shape, rng, spec.height, spec.width, radius)
            if mask is not None and mask.any() and not (mask & blocked).any():
                labels[mask] = instance_id
                break
        else:
            raise InfeasiblePacking(
                f"could not place instance {instance_id} of {spec.count} "
                f"in {MAX_PLACEMENT_ATTEMPTS} attempts ({spec.height}x{spec.width}, gap {spec.min_gap})"
            )
        logger.debug("Placed instance %d after %d attempt(s)", instance_id, attempt + 1)
    return labels


def fixture_set(count=10, height=48, width=48, radius_max=8, seed=0):
    """A deterministic mix of all three shape families."""
    fixtures = []
    shapes = list(ShapeFamily)
    for k in range(count):
        spec = FixtureSpec(
            height=height, width=width, count=3 + k % 3, shape=shapes[k % len(shapes)],
            radius_min=2, radius_max=radius_max, min_gap=2, seed=seed + k,
        )
        fixtures.append(generate_fixture(spec))
    return fixtures


def random_label_map(rng, height=32, width=32, max_instances=12):
    """
    Random axis-aligned rectangles painted in order; later ones overwrite
    earlier ones, so instances may touch, nest or split.
    """
    labels = np.zeros((height, width), dtype=np.int64)
    count = int(rng.integers(0, max_instances + 1))
    for instance_id in range(1, count + 1):
        r0, r1 = sorted(rng.integers(0, height, size=2))
        c0, c1 = sorted(rng.integers(0, width, size=2))
        labels[r0:r1 + 1, c0:c1 + 1] = instance_id
    return labels


# ═══════════════════════════════════════════════════════════
#  NAMED FIXTURES
# ═══════════════════════════════════════════════════════════

def square5():
    """5×5 map holding one 3×3 square (rows/cols 1..3)."""
    labels = np.zeros((5, 5), dtype=np.int64)
    labels[1:4, 1:4] = 1
    return labels


def two_squares_shared_column():
    """
    (semantic, contour) of two 3×3 squares whose facing edges share column 3.
    """
    semantic = np.zeros((5, 7), dtype=np.int64)
    semantic[1:4, 1:6] = CONTOUR
    semantic[2, 2] = INSIDE
    semantic[2, 4] = INSIDE
    contour = semantic == CONTOUR
    return semantic, contour


def aji_construction():
    """
    (pred, gt): two 2×2 GT nuclei one column apart, one prediction covering
    both plus the two gap pixels.
    """
    gt = np.zeros((4, 7), dtype=np.int64)
    gt[1:3, 1:3] = 1
    gt[1:3, 4:6] = 2
    pred = np.zeros_like(gt)
    pred[1:3, 1:6] = 1
    return pred, gt


def disk(radius=8, size=None, center=None):
    size = size or 2 * radius + 5
    center = center or (size // 2, size // 2)
    labels = np.zeros((size, size), dtype=np.int64)
    rr, cc = draw.disk(center, radius, shape=labels.shape)
    labels[rr, cc] = 1
    return labels


def l_shape():
    labels = np.zeros((12, 12), dtype=np.int64)
    labels[2:10, 2:5] = 1
    labels[7:10, 5:9] = 1
    return labels


def triangle():
    labels = np.zeros((14, 14), dtype=np.int64)
    rr, cc = draw.polygon([2, 11, 11], [2, 2, 10], shape=labels.shape)
    labels[rr, cc] = 1
    return labels


def tilted_ellipse():
    labels = np.zeros((20, 20), dtype=np.int64)
    rr, cc = draw.ellipse(9, 10, 7, 3, shape=labels.shape, rotation=np.pi / 6)
    labels[rr, cc] = 1
    return labels


def nonsymmetric_fixtures():
    """Instances without mirror or rotation symmetry, one map each plus a mixed map."""
    mixed = np.zeros((32, 32), dtype=np.int64)
    mixed[2:14, 2:14] = np.where(l_shape() > 0, 1, 0)
    mixed[16:30, 16:30] = np.where(triangle() > 0, 2, 0)
    return [l_shape(), triangle(), tilted_ellipse(), mixed]
