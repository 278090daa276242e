"""
NucleiGrind — Ground-truth target encodings.

structure_encoding : signed distance to the nearest contour, normalized per instance
hv_encoding        : horizontal / vertical offsets to the instance centroid
dir_encoding       : quantized centrifugal direction class
position_encoding  : distance to the instance centroid
"""
import logging

import numpy as np
from scipy import ndimage

from content.models import Encoder, EncodingConfig
from engine.grid import centroid_offsets, contour_mask
from engine.validator import as_label_map

logger = logging.getLogger(__name__)

_DEFAULT_CONFIG = EncodingConfig()


def _object_slices(labels):
    """ndimage.find_objects for the present ids only, as {id: (row_slice, col_slice)}."""
    slices = ndimage.find_objects(labels)
    return {k + 1: s for k, s in enumerate(slices) if s is not None}


# ═══════════════════════════════════════════════════════════
#  STRUCTURE ENCODING
# ═══════════════════════════════════════════════════════════

def structure_distances(labels):
    """
    Raw signed contour distances, before normalization.

    inside pixel  : +distance to the nearest contour pixel of its own instance
    outside pixel : -distance to the nearest contour pixel of any instance
    contour pixel : 0
    Images without instances return None.
    """
    labels = as_label_map(labels)
    contour = contour_mask(labels)
    if not contour.any():
        return None
    raw = np.zeros(labels.shape, dtype=np.float64)

    background = labels == 0
    if background.any():
        # zeros of the EDT input are the contour pixels
        outside = ndimage.distance_transform_edt(~contour)
        raw[background] = -outside[background]

    inside = (labels > 0) & ~contour
    for instance_id, (rs, cs) in _object_slices(labels).items():
        crop_labels = labels[rs, cs]
        crop_inside = inside[rs, cs] & (crop_labels == instance_id)
        if not crop_inside.any():
            continue
        crop_contour = contour[rs, cs] & (crop_labels == instance_id)
        dist = ndimage.distance_transform_edt(~crop_contour)
        raw[rs, cs][crop_inside] = dist[crop_inside]
    return raw


def _background_normalizer(raw, background, cfg):
    if cfg.uses_global_max:
        return float(-raw[background].min())
    return float(cfg.background_norm_cap)


def normalize_structure(raw, labels, cfg=_DEFAULT_CONFIG):
    """Per-instance interior scaling to (0, 1] and background scaling to [-1, 0)."""
    labels = as_label_map(labels)
    field = np.zeros(labels.shape, dtype=np.float64)
    background = labels == 0
    if background.any():
        norm = _background_normalizer(raw, background, cfg)
        field[background] = np.maximum(raw[background] / norm, -1.0)
        clipped = int(np.count_nonzero(raw[background] < -norm))
        if clipped:
            logger.debug("structure_encoding: %d background pixel(s) clipped at cap %.3f", clipped, norm)
    positive = raw > 0
    if positive.any():
        peaks = _per_instance_max(np.where(positive, raw, 0.0), labels)
        field[positive] = raw[positive] / peaks[labels[positive]]
    return field


def structure_encoding(labels, cfg=_DEFAULT_CONFIG):
    """
    Contour-based structure encoding as an H×W×1 field.
    Inside values lie in (0, 1], contour pixels are exactly 0, background in [-1, 0).
    A map without instances is all -1.
    """
    labels = as_label_map(labels)
    raw = structure_distances(labels)
    if raw is None:
        return np.full(labels.shape + (1,), -1.0)
    return normalize_structure(raw, labels, cfg)[:, :, None]


# ═══════════════════════════════════════════════════════════
#  CENTROID-BASED ENCODINGS
# ═══════════════════════════════════════════════════════════

def _per_instance_max(values, labels):
    size = int(labels.max()) + 1 if labels.size else 1
    out = np.zeros(size, dtype=values.dtype)
    np.maximum.at(out, labels.ravel(), values.ravel())
    return out


def hv_encoding(labels):
    """
    Horizontal and vertical centroid offsets, each divided by the instance's
    largest absolute offset on that axis. Returns H×W×2 (h, v); zero extent
    and background give 0.
    """
    labels = as_label_map(labels)
    d_row, d_col, _ = centroid_offsets(labels)
    field = np.zeros(labels.shape + (2,), dtype=np.float64)
    if not labels.any():
        return field
    for channel, offsets in ((0, d_col), (1, d_row)):
        extent = _per_instance_max(np.abs(offsets), labels)[labels]
        nonzero = extent > 0
        field[:, :, channel][nonzero] = offsets[nonzero] / extent[nonzero]
    return field


def quantize_angle(d_row, d_col, class_count):
    """
    Direction class 1..K of the angle atan2(d_row, d_col) (row axis points down).
    The zero vector maps to class 1.
    """
    d_row = np.asarray(d_row, dtype=np.float64)
    d_col = np.asarray(d_col, dtype=np.float64)
    # -0.0 components would give atan2 = -pi
    zero = (d_row == 0) & (d_col == 0)
    theta = np.where(zero, 0.0, np.mod(np.arctan2(d_row, d_col), 2.0 * np.pi))
    classes = np.floor(theta * class_count / (2.0 * np.pi)).astype(np.int64)
    return np.clip(classes, 0, class_count - 1) + 1


def dir_encoding(labels, cfg=_DEFAULT_CONFIG):
    """Quantized centrifugal direction class per instance pixel; background 0."""
    labels = as_label_map(labels)
    d_row, d_col, _ = centroid_offsets(labels)
    classes = quantize_angle(d_row.astype(np.float64), d_col.astype(np.float64), cfg.dir_class_count)
    return np.where(labels > 0, classes, 0).astype(np.int64)


def position_encoding(labels):
    """Euclidean distance (pixels) from each instance pixel to its centroid; background 0. H×W×1."""
    labels = as_label_map(labels)
    d_row, d_col, n = centroid_offsets(labels)
    field = np.zeros(labels.shape, dtype=np.float64)
    nuclei = labels > 0
    squared = d_row[nuclei].astype(np.float64) ** 2 + d_col[nuclei].astype(np.float64) ** 2
    field[nuclei] = np.sqrt(squared) / n[nuclei]
    return field[:, :, None]


def encode(labels, method, cfg=_DEFAULT_CONFIG):
    """Dispatch by encoder name ('se', 'hv', 'dir', 'pos')."""
    method = Encoder(method)
    if method is Encoder.SE:
        return structure_encoding(labels, cfg)
    if method is Encoder.HV:
        return hv_encoding(labels)
    if method is Encoder.DIR:
        return dir_encoding(labels, cfg)
    return position_encoding(labels)
