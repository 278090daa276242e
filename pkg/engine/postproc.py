"""
NucleiGrind — Testing-phase fusion of the semantic and structure predictions.

contour_from_structure : threshold the structure field into a thin contour band
fuse_and_label         : split nucleus evidence along the contours, regrow the cut pixels
run_pipeline           : both steps in sequence
"""
import logging

import numpy as np

from content.models import BACKGROUND, CONTOUR, PostprocConfig
from engine.grid import connected_components, relabel_raster
from engine.validator import as_binary_mask, as_scalar_field, as_semantic_mask, check_same_grid

logger = logging.getLogger(__name__)

_DEFAULT_CONFIG = PostprocConfig()


def contour_from_structure(structure, cfg=_DEFAULT_CONFIG):
    """1 where t_n < value < t_p (both bounds exclusive)."""
    field = as_scalar_field(structure, channels=1)[:, :, 0]
    return (field > cfg.t_n) & (field < cfg.t_p)


# ── Regrowth ─────────────────────────────────────────────

def _neighbour_min(labels):
    """
    Smallest positive label among each pixel's 4-neighbours (0 if none).
    """
    height, width = labels.shape
    big = np.iinfo(np.int64).max
    padded = np.pad(np.where(labels > 0, labels, big), 1, mode="constant", constant_values=big)
    best = np.full(labels.shape, big, dtype=np.int64)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        best = np.minimum(best, padded[1 + dr:1 + dr + height, 1 + dc:1 + dc + width])
    return np.where(best == big, 0, best)


def regrow(seeds, allowed):
    """
    Multi-source breadth-first growth of seed labels over the allowed pixels.

    Level by level, each unlabelled allowed pixel next to pixels labelled in
    earlier levels takes the lowest of their labels. Pixels no seed can reach
    stay 0.
    """
    labels = seeds.copy()
    unassigned = allowed & (labels == 0)
    levels = 0
    while unassigned.any():
        candidates = _neighbour_min(labels)
        frontier = unassigned & (candidates > 0)
        if not frontier.any():
            break
        labels[frontier] = candidates[frontier]
        unassigned &= ~frontier
        levels += 1
    logger.debug("regrow: %d level(s), %d pixel(s) unreached", levels, int(unassigned.sum()))
    return labels


def _drop_small(labels, min_area):
    if min_area <= 0 or not labels.any():
        return labels
    areas = np.bincount(labels.ravel())
    small = areas < min_area
    small[0] = False
    if small.any():
        logger.debug("Dropping %d instance(s) below %d px", int(small.sum()), min_area)
        labels = np.where(small[labels], 0, labels)
    return labels


def fuse_and_label(semantic, contour, cfg=_DEFAULT_CONFIG):
    """
    Refined instance map from a 3-class semantic mask and a contour mask.

    Seeds are the connected components of nucleus evidence with every
    separator pixel removed. Separator pixels on evidence are then handed to
    the nearest seed. Evidence components that hold no seed at all are kept
    as instances of their own.
    """
    semantic = as_semantic_mask(semantic)
    contour = as_binary_mask(contour)
    check_same_grid(semantic, contour, names=["semantic", "contour"])

    evidence = semantic != BACKGROUND
    separator = contour | (semantic == CONTOUR)
    seeds = connected_components(evidence & ~separator, cfg.connectivity)
    labels = regrow(seeds, evidence)

    unreached = evidence & (labels == 0)
    if unreached.any():
        orphans = connected_components(unreached, cfg.connectivity)
        offset = int(labels.max())
        labels = np.where(orphans > 0, orphans + offset, labels)
        logger.debug("fuse_and_label: %d seedless region(s) kept", int(orphans.max()))

    labels = _drop_small(labels, cfg.min_instance_area)
    return relabel_raster(labels)


def run_pipeline(semantic, structure, cfg=_DEFAULT_CONFIG):
    semantic = as_semantic_mask(semantic)
    contour = contour_from_structure(structure, cfg)
    check_same_grid(semantic, contour, names=["semantic", "structure"])
    return fuse_and_label(semantic, contour, cfg)
