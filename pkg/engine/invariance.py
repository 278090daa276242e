"""
NucleiGrind — Direction-invariance lab.

Measures how each target encoding reacts to rigid grid transforms, how much a
deterministic decode of those targets loses under the same transforms, and
how closely HV / Dir follow the structure-encoding gradient.
"""
import logging
from typing import Sequence, Union

import numpy as np
from scipy import ndimage

from content.models import (
    Encoder,
    EncodingConfig,
    InvarianceReport,
    PostprocConfig,
    RelationReport,
    RigidTransform,
)
from engine.encodings import encode, hv_encoding, quantize_angle, structure_encoding
from engine.errors import ConfigError, TooSmallInstance
from engine.grid import connected_components, contour_mask, erode, semantic_from_labels
from engine.metrics import dice_score
from engine.postproc import run_pipeline
from engine.validator import as_label_map

logger = logging.getLogger(__name__)

TransformChain = Union[RigidTransform, Sequence[RigidTransform]]

# identity first, then the five non-trivial transforms
ALL_TRANSFORMS = tuple(RigidTransform)
NONTRIVIAL_TRANSFORMS = tuple(t for t in RigidTransform if t is not RigidTransform.IDENTITY)


# ═══════════════════════════════════════════════════════════
#  TRANSFORM GROUP
# ═══════════════════════════════════════════════════════════

def _apply_one(arr, t):
    t = RigidTransform(t)
    if t is RigidTransform.IDENTITY:
        return arr.copy()
    if t is RigidTransform.ROT90:
        return np.rot90(arr, -1, axes=(0, 1)).copy()
    if t is RigidTransform.ROT180:
        return np.rot90(arr, 2, axes=(0, 1)).copy()
    if t is RigidTransform.ROT270:
        return np.rot90(arr, 1, axes=(0, 1)).copy()
    if t is RigidTransform.FLIP_H:
        return arr[:, ::-1].copy()
    return arr[::-1].copy()


def apply_transform(arr, t: TransformChain):
    """
    Move the grid of a label map or field; channels are carried along unchanged.
    A sequence of transforms is applied left to right.
    """
    arr = np.asarray(arr)
    if isinstance(t, (RigidTransform, str)):
        return _apply_one(arr, t)
    for step in t:
        arr = _apply_one(arr, step)
    return arr


_INVERSES = {
    RigidTransform.ROT90: RigidTransform.ROT270,
    RigidTransform.ROT270: RigidTransform.ROT90,
}


def inverse(t):
    t = RigidTransform(t)
    return _INVERSES.get(t, t)


def compose(*transforms):
    """
    Collapse 'apply these in order' into one transform when one of the six
    named transforms does the same thing; otherwise return the chain as a tuple.
    """
    chain = tuple(RigidTransform(t) for t in transforms)
    probe = np.arange(6).reshape(2, 3)
    moved = apply_transform(probe, chain)
    for candidate in ALL_TRANSFORMS:
        direct = _apply_one(probe, candidate)
        if direct.shape == moved.shape and np.array_equal(direct, moved):
            return candidate
    return chain


# ═══════════════════════════════════════════════════════════
#  ENCODER EQUIVARIANCE
# ═══════════════════════════════════════════════════════════

def equivariance_error(encoder, labels, t: TransformChain, cfg=EncodingConfig()):
    """
    Compare encode(T(labels)) with T(encode(labels)).

    Continuous encodings report max / mean absolute difference. Dir reports
    the fraction of nucleus pixels whose class changed, for both numbers.
    """
    encoder = Encoder(encoder)
    labels = as_label_map(labels)
    moved_labels = apply_transform(labels, t)
    encoded_after = encode(moved_labels, encoder, cfg)
    encoded_before = apply_transform(encode(labels, encoder, cfg), t)
    if encoder is Encoder.DIR:
        nuclei = moved_labels > 0
        total = int(nuclei.sum())
        mismatch = int((encoded_after != encoded_before)[nuclei].sum())
        fraction = mismatch / total if total else 0.0
        max_err = mean_err = fraction
    else:
        diff = np.abs(encoded_after - encoded_before)
        max_err = float(diff.max()) if diff.size else 0.0
        mean_err = float(diff.mean()) if diff.size else 0.0
    transform = RigidTransform(t) if isinstance(t, (RigidTransform, str)) else compose(*t)
    return InvarianceReport(encoder=encoder, transform=transform,
                            max_abs_error=max_err, mean_abs_error=mean_err)


# ═══════════════════════════════════════════════════════════
#  PIPELINE BIAS
# ═══════════════════════════════════════════════════════════

def _class_vectors(dir_map, class_count):
    """Unit vector (row, col) at the centre of each pixel's direction bin; background 0."""
    centre = (dir_map - 0.5) * (2.0 * np.pi / class_count)
    nuclei = dir_map > 0
    return np.where(nuclei, np.sin(centre), 0.0), np.where(nuclei, np.cos(centre), 0.0)


def _divergence(u_row, u_col):
    """Sobel estimate of d(u_row)/d(row) + d(u_col)/d(col)."""
    return ndimage.sobel(u_row, axis=0) + ndimage.sobel(u_col, axis=1)


def _centrifugal_decode(semantic, u_row, u_col, cfg):
    """
    Keep nucleus evidence where the offset field spreads outward
    (non-negative divergence); instances are the kept components.
    """
    evidence = semantic > 0
    keep = evidence & (_divergence(u_row, u_col) >= 0)
    return connected_components(keep, cfg.connectivity)


def _decode(encoder, semantic, encoded, cfg, encoding_cfg):
    if encoder is Encoder.SE:
        return run_pipeline(semantic, encoded, cfg)
    if encoder is Encoder.HV:
        return _centrifugal_decode(semantic, encoded[:, :, 1], encoded[:, :, 0], cfg)
    u_row, u_col = _class_vectors(encoded, encoding_cfg.dir_class_count)
    return _centrifugal_decode(semantic, u_row, u_col, cfg)


def pipeline_bias(labels, t: TransformChain, cfg=PostprocConfig(), encoder=Encoder.SE,
                  encoding_cfg=EncodingConfig()):
    """
    Dice change caused by feeding transformed targets to a fixed decoder.

    The targets of the transformed tile are T(encode(labels)), which is what
    augmenting an image together with its precomputed target maps yields.
    SE decodes through the contour-band pipeline. HV and Dir decode by
    keeping pixels whose offset field diverges outward.
    """
    encoder = Encoder(encoder)
    if encoder is Encoder.POS:
        raise ConfigError("the position map has no decoder; use se, hv or dir")
    labels = as_label_map(labels)
    semantic = semantic_from_labels(labels)
    encoded = encode(labels, encoder, encoding_cfg)

    baseline = _decode(encoder, semantic, encoded, cfg, encoding_cfg)
    moved = _decode(encoder, apply_transform(semantic, t), apply_transform(encoded, t), cfg, encoding_cfg)
    bias = dice_score(moved, apply_transform(labels, t)) - dice_score(baseline, labels)
    logger.debug("pipeline_bias %s under %s: %.6f", encoder.value, t, bias)
    return float(bias)


# ═══════════════════════════════════════════════════════════
#  ENCODING RELATIONS
# ═══════════════════════════════════════════════════════════

def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    norm = np.sqrt((a * a).sum() * (b * b).sum())
    if norm == 0:
        return 0.0
    return float((a * b).sum() / norm)


def relation_check(labels, cfg=EncodingConfig()):
    """
    Correlate the outward structure-encoding slope with HV and Dir.

    Uses central differences of the SE field at interior pixels (pixels whose
    3×3 neighbourhood lies in one instance). The outward direction is the
    negative SE gradient, since SE peaks at the instance core. At least one
    instance needs an interior holding a full 3×3 block.
    """
    labels = as_label_map(labels)
    interior = (labels > 0) & ~contour_mask(labels)
    # interiors of different instances never touch, so one eroded union suffices
    if not erode(interior, 1).any():
        raise TooSmallInstance("no instance has a 3x3 interior")
    count = int(interior.sum())

    se = structure_encoding(labels, cfg)[:, :, 0]
    padded = np.pad(se, 1, mode="edge")
    grad_row = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    grad_col = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    out_row, out_col = -grad_row[interior], -grad_col[interior]

    hv = hv_encoding(labels)
    corr_h = _pearson(out_col, hv[:, :, 0][interior])
    corr_v = _pearson(out_row, hv[:, :, 1][interior])

    dir_map = encode(labels, Encoder.DIR, cfg)
    slope_classes = quantize_angle(out_row, out_col, cfg.dir_class_count)
    agreement = float(np.mean(slope_classes == dir_map[interior]))
    return RelationReport(corr_h=corr_h, corr_v=corr_v, dir_agreement=agreement, interior_pixels=count)


# ═══════════════════════════════════════════════════════════
#  LAB RUN
# ═══════════════════════════════════════════════════════════

def invariance_table(fixtures, encoders=tuple(Encoder), transforms=NONTRIVIAL_TRANSFORMS,
                     postproc_cfg=PostprocConfig(), encoding_cfg=EncodingConfig()):
    """
    One row per (encoder, transform): the worst equivariance error over the
    fixtures and, for decodable encoders, the worst pipeline bias.
    """
    rows = []
    for encoder in encoders:
        encoder = Encoder(encoder)
        for t in transforms:
            reports = [equivariance_error(encoder, f, t, encoding_cfg) for f in fixtures]
            bias = None
            if encoder is not Encoder.POS:
                biases = [pipeline_bias(f, t, postproc_cfg, encoder, encoding_cfg) for f in fixtures]
                bias = max(biases, key=abs) if biases else 0.0
            rows.append(InvarianceReport(
                encoder=encoder,
                transform=RigidTransform(t),
                max_abs_error=max((r.max_abs_error for r in reports), default=0.0),
                mean_abs_error=float(np.mean([r.mean_abs_error for r in reports])) if reports else 0.0,
                pipeline_dice_bias=bias,
            ))
    return rows
