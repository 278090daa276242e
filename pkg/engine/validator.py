"""
NucleiGrind — Input validation.
Normalizes arrays to the dtypes and shapes the engine expects and rejects
anything that breaks a grid invariant.
"""
import numpy as np

from content.models import NUM_SEMANTIC_CLASSES
from engine.errors import DimensionMismatch, FormatError


def as_label_map(labels):
    """Return labels as a 2-D int64 array with non-negative values."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise DimensionMismatch(f"label map must be 2-D, got shape {arr.shape}")
    if arr.dtype.kind == "b":
        arr = arr.astype(np.int64)
    if arr.dtype.kind not in "iu":
        if arr.dtype.kind == "f" and np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        else:
            raise FormatError(f"label map must hold integers, got dtype {arr.dtype}")
    arr = arr.astype(np.int64, copy=False)
    if arr.size and arr.min() < 0:
        raise FormatError("label map values must be >= 0")
    return arr


def as_binary_mask(mask):
    """Return mask as a 2-D bool array; only 0/1 (or bool) values are accepted."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise DimensionMismatch(f"binary mask must be 2-D, got shape {arr.shape}")
    if arr.dtype.kind == "b":
        return arr
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise FormatError("binary mask values must be exactly 0 or 1")
    return arr.astype(bool)


def as_semantic_mask(mask):
    """Return mask as a 2-D int64 array with values in {0, 1, 2}."""
    arr = as_label_map(mask)
    if arr.size and arr.max() >= NUM_SEMANTIC_CLASSES:
        raise FormatError(f"semantic mask values must be < {NUM_SEMANTIC_CLASSES}, found {arr.max()}")
    return arr


def as_scalar_field(field, channels=None):
    """
    Return field as a float64 H×W×C array.
    2-D input is promoted to a single channel. Non-finite values are rejected.
    """
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise DimensionMismatch(f"scalar field must be H×W or H×W×C, got shape {arr.shape}")
    if channels is not None and arr.shape[2] != channels:
        raise DimensionMismatch(f"expected {channels} channel(s), got {arr.shape[2]}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("scalar field contains NaN or Inf")
    return arr


def as_feature_map(features):
    """Feature maps are H×W×C with finite values; same rules as scalar fields."""
    return as_scalar_field(features)


def check_same_grid(*arrays, names=None):
    """Raise DimensionMismatch unless every array shares the same H×W."""
    shapes = [np.shape(a)[:2] for a in arrays]
    if len(set(shapes)) > 1:
        names = names or [f"arg{i}" for i in range(len(arrays))]
        detail = ", ".join(f"{n}={s[0]}x{s[1]}" for n, s in zip(names, shapes))
        raise DimensionMismatch(f"grid sizes differ: {detail}")
    return shapes[0] if shapes else None


def instance_ids(labels):
    """Sorted positive ids present in a label map."""
    ids = np.unique(labels)
    return ids[ids > 0]
