"""
NucleiGrind — Grid primitives: morphology, connected components, contours,
centroids and downsampling.

Structuring elements are squares (Chebyshev balls). Pixels outside the image
count as 0 for erosion, so instances cut by the tile edge still close.
"""
import logging

import numpy as np
from scipy import ndimage

from content.models import BACKGROUND, CONTOUR, INSIDE, Centroid
from engine.errors import ConfigError, DimensionMismatch, UnknownInstance
from engine.validator import (
    as_binary_mask,
    as_label_map,
    as_scalar_field,
    as_semantic_mask,
)

logger = logging.getLogger(__name__)

_STRUCTURE_4 = ndimage.generate_binary_structure(2, 1)
_STRUCTURE_8 = ndimage.generate_binary_structure(2, 2)


def _square(radius):
    if int(radius) != radius or radius < 1:
        raise ConfigError(f"radius must be a positive integer, got {radius!r}")
    side = 2 * int(radius) + 1
    return np.ones((side, side), dtype=bool)


# ═══════════════════════════════════════════════════════════
#  MORPHOLOGY
# ═══════════════════════════════════════════════════════════

def dilate(mask, radius=1):
    """1 iff any input pixel within Chebyshev distance radius is 1."""
    mask = as_binary_mask(mask)
    return ndimage.binary_dilation(mask, structure=_square(radius))


def erode(mask, radius=1):
    """1 iff every pixel within Chebyshev distance radius is 1; outside the image counts as 0."""
    mask = as_binary_mask(mask)
    return ndimage.binary_erosion(mask, structure=_square(radius), border_value=0)


def extract_contour(labels, instance_id, radius=1):
    """Inner boundary of one instance: its mask minus the mask's erosion."""
    labels = as_label_map(labels)
    instance = labels == instance_id
    if instance_id <= 0 or not instance.any():
        raise UnknownInstance(f"instance {instance_id} is not present in the label map")
    return instance & ~erode(instance, radius)


def contour_mask(labels):
    """
    Union of every instance's radius-1 inner contour.
    A pixel of instance k is interior iff its whole 3×3 neighbourhood is k,
    which is erosion of each instance mask with the zero border policy.
    """
    labels = as_label_map(labels)
    height, width = labels.shape
    padded = np.pad(labels, 1, mode="constant", constant_values=0)
    interior = labels > 0
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            shifted = padded[1 + dr:1 + dr + height, 1 + dc:1 + dc + width]
            interior &= shifted == labels
    return (labels > 0) & ~interior


def semantic_from_labels(labels):
    """Three-class mask: contour where a pixel is on its instance's contour, inside otherwise, else background."""
    labels = as_label_map(labels)
    semantic = np.full(labels.shape, BACKGROUND, dtype=np.int64)
    semantic[labels > 0] = INSIDE
    semantic[contour_mask(labels)] = CONTOUR
    return semantic


# ═══════════════════════════════════════════════════════════
#  CONNECTED COMPONENTS
# ═══════════════════════════════════════════════════════════

def relabel_raster(labels):
    """
    Renumber the nonzero labels to 1..N in raster order of each label's first pixel.
    Makes any labelling independent of the order it was produced in.
    """
    labels = as_label_map(labels)
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids > 0
    ids, first = ids[keep], first[keep]
    if ids.size == 0:
        return np.zeros_like(labels)
    ordered = ids[np.argsort(first, kind="stable")]
    lookup = np.zeros(int(ids.max()) + 1, dtype=np.int64)
    lookup[ordered] = np.arange(1, ordered.size + 1, dtype=np.int64)
    return lookup[labels]


def connected_components(mask, connectivity=4):
    """Label the maximal 4- or 8-connected regions of 1-pixels as 1..N in raster order."""
    mask = as_binary_mask(mask)
    if connectivity == 4:
        structure = _STRUCTURE_4
    elif connectivity == 8:
        structure = _STRUCTURE_8
    else:
        raise ConfigError(f"connectivity must be 4 or 8, got {connectivity!r}")
    labelled, count = ndimage.label(mask, structure=structure)
    logger.debug("connected_components: %d component(s), connectivity %d", count, connectivity)
    return relabel_raster(labelled.astype(np.int64))


# ═══════════════════════════════════════════════════════════
#  CENTROIDS
# ═══════════════════════════════════════════════════════════

def _coordinate_sums(labels):
    """Per-label pixel counts and row/col coordinate sums, exact int64."""
    height, width = labels.shape
    rows, cols = np.indices((height, width))
    flat = labels.ravel()
    size = int(flat.max()) + 1 if flat.size else 1
    counts = np.bincount(flat, minlength=size).astype(np.int64)
    row_sums = np.bincount(flat, weights=rows.ravel(), minlength=size).astype(np.int64)
    col_sums = np.bincount(flat, weights=cols.ravel(), minlength=size).astype(np.int64)
    return counts, row_sums, col_sums


def centroid_offsets(labels):
    """
    Scaled centrifugal vectors for every pixel.

    Returns (d_row, d_col, n) as int64 grids where n is the pixel count of the
    pixel's instance and (d_row, d_col) = n * ((row, col) - centroid). Keeping
    the offsets integral makes distances and angles exact under rigid
    transforms. Background pixels get zeros (n = 0).
    """
    labels = as_label_map(labels)
    height, width = labels.shape
    counts, row_sums, col_sums = _coordinate_sums(labels)
    rows, cols = np.indices((height, width))
    n = counts[labels]
    d_row = n * rows - row_sums[labels]
    d_col = n * cols - col_sums[labels]
    background = labels == 0
    d_row[background] = 0
    d_col[background] = 0
    n = np.where(background, 0, n)
    return d_row, d_col, n


def instance_centroids(labels):
    """Mean (row, col) of each instance, sorted by instance id."""
    labels = as_label_map(labels)
    if not labels.any():
        return []
    counts, row_sums, col_sums = _coordinate_sums(labels)
    ids = np.flatnonzero(counts)
    return [
        Centroid(row=row_sums[k] / counts[k], col=col_sums[k] / counts[k], instance_id=int(k))
        for k in ids if k > 0
    ]


# ═══════════════════════════════════════════════════════════
#  DOWNSAMPLING
# ═══════════════════════════════════════════════════════════

def _blocks(arr, factor):
    if int(factor) != factor or factor < 1:
        raise ConfigError(f"factor must be a positive integer, got {factor!r}")
    height, width = arr.shape[:2]
    if height % factor or width % factor:
        raise DimensionMismatch(f"factor {factor} does not divide {height}x{width}")
    rest = arr.shape[2:]
    blocks = arr.reshape(height // factor, factor, width // factor, factor, *rest)
    # (h, w, factor*factor, ...) with in-block raster order
    return np.moveaxis(blocks, 2, 1).reshape(height // factor, width // factor, factor * factor, *rest)


def downsample_field(field, factor):
    """Block-average pooling over factor×factor blocks, per channel."""
    field = as_scalar_field(field)
    return _blocks(field, factor).mean(axis=2)


def downsample_semantic(mask, factor):
    """Majority vote over factor×factor blocks; ties go to the lowest class id."""
    mask = as_semantic_mask(mask)
    blocks = _blocks(mask, factor)
    classes = int(mask.max()) + 1 if mask.size else 1
    votes = (blocks[..., None] == np.arange(classes)).sum(axis=2)
    return np.argmax(votes, axis=-1).astype(np.int64)


def upsample_constant(field, factor):
    """Nearest-neighbour upsampling; the inverse companion of block pooling."""
    arr = np.asarray(field)
    return np.repeat(np.repeat(arr, factor, axis=0), factor, axis=1)
