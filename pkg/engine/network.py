"""
NucleiGrind — Reference forward passes for feature fusion and structure-guided attention.

Framework-free numpy code meant for invariant checks and attention-field
export, not for training. Feature maps are H×W×C float64 arrays.
"""
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from content.models import AttentionForm, AttentionMap, ConvWeights, SGAWeights
from engine.errors import ConfigError, DimensionMismatch
from engine.validator import as_feature_map, check_same_grid

logger = logging.getLogger(__name__)

# queries handled per chunk in the full form, bounds the HW×HW×C temporaries
_FULL_CHUNK = 256


# ═══════════════════════════════════════════════════════════
#  CONVOLUTION & FUSION
# ═══════════════════════════════════════════════════════════

def conv2d(features, w: ConvWeights):
    """Cross-correlation with zero 'same' padding; kernel size 1 or 3."""
    features = as_feature_map(features)
    if features.shape[2] != w.in_channels:
        raise DimensionMismatch(
            f"conv expects {w.in_channels} input channel(s), feature map has {features.shape[2]}"
        )
    pad = w.kernel_size // 2
    padded = np.pad(features, ((pad, pad), (pad, pad), (0, 0)))
    windows = sliding_window_view(padded, (w.kernel_size, w.kernel_size), axis=(0, 1))
    # windows: H×W×Cin×k×k
    return np.einsum("hwcij,ijco->hwo", windows, w.weights) + w.bias


def sff_fuse(f_c1, g_c1, w_f: ConvWeights, w_g: ConvWeights):
    """
    Semantic feature fusion.
    f_c2 = conv(f_c1); g_c2 = conv(concat(f_c1, g_c1)) with the semantic block first.
    """
    f_c1 = as_feature_map(f_c1)
    g_c1 = as_feature_map(g_c1)
    check_same_grid(f_c1, g_c1, names=["f_c1", "g_c1"])
    f_c2 = conv2d(f_c1, w_f)
    g_c2 = conv2d(np.concatenate([f_c1, g_c1], axis=2), w_g)
    return f_c2, g_c2


# ═══════════════════════════════════════════════════════════
#  ATTENTION CORE
# ═══════════════════════════════════════════════════════════

def _softmax_rows(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def _attention_rows(queries, keys):
    """
    Softmax(q·k / sqrt(C)) for each query over its own candidate keys.
    queries: M×C, keys: M×N×C (may be a broadcast view). Returns M×N.
    """
    scale = 1.0 / np.sqrt(queries.shape[-1])
    logits = (queries[:, None, :] * keys).sum(axis=-1) * scale
    return _softmax_rows(logits)


def _weighted_sum(weights, values):
    """Σ_n w[m, n] · v[m, n, :], accumulated in ascending candidate order."""
    out = np.zeros((weights.shape[0], values.shape[-1]))
    for n in range(weights.shape[1]):
        out += weights[:, n, None] * values[:, n, :]
    return out


def _check_attention_inputs(q, k, *values):
    q = as_feature_map(q)
    k = as_feature_map(k)
    values = [as_feature_map(v) for v in values]
    check_same_grid(q, k, *values, names=["Q", "K"] + [f"V{i}" for i in range(len(values))])
    if q.shape[2] != k.shape[2]:
        raise DimensionMismatch(f"Q has {q.shape[2]} channel(s), K has {k.shape[2]}")
    return q, k, values


# ═══════════════════════════════════════════════════════════
#  FULL SELF-ATTENTION
# ═══════════════════════════════════════════════════════════

def full_attention(q, k):
    """S = softmax(Q·Kᵀ/√C) over all HW keys, as an AttentionMap."""
    q, k, _ = _check_attention_inputs(q, k)
    height, width, channels = q.shape
    qf = q.reshape(-1, channels)
    kf = k.reshape(-1, channels)
    rows = []
    for start in range(0, qf.shape[0], _FULL_CHUNK):
        chunk = qf[start:start + _FULL_CHUNK]
        keys = np.broadcast_to(kf[None], (chunk.shape[0],) + kf.shape)
        rows.append(_attention_rows(chunk, keys))
    return AttentionMap(AttentionForm.FULL, height, width, np.concatenate(rows, axis=0))


def _apply_full(attention, v):
    height, width, channels = v.shape
    vf = v.reshape(-1, channels)
    out = []
    for start in range(0, attention.weights.shape[0], _FULL_CHUNK):
        w = attention.weights[start:start + _FULL_CHUNK]
        values = np.broadcast_to(vf[None], (w.shape[0],) + vf.shape)
        out.append(_weighted_sum(w, values))
    return np.concatenate(out, axis=0).reshape(height, width, channels)


def sga_full(q, k, v_str, v_sem):
    """
    Structure-guided self-attention.
    One attention map S drives both updates: g_next = S·V_str, f_next = S·V_sem.
    Returns (S, g_next, f_next).
    """
    q, k, (v_str, v_sem) = _check_attention_inputs(q, k, v_str, v_sem)
    attention = full_attention(q, k)
    return attention, _apply_full(attention, v_str), _apply_full(attention, v_sem)


# ═══════════════════════════════════════════════════════════
#  CRISS-CROSS ATTENTION
# ═══════════════════════════════════════════════════════════

def criss_cross_candidates(height, width):
    """
    For every flat position m, the H+W-1 flat indices sharing its row or
    column (m itself once), in ascending order. Shape HW×(H+W-1).
    """
    rows, cols = np.divmod(np.arange(height * width), width)
    same_row = rows[:, None] * width + np.arange(width)[None, :]
    other_rows = np.arange(height)[None, :].repeat(height * width, axis=0)
    keep = other_rows != rows[:, None]
    other_rows = other_rows[keep].reshape(height * width, height - 1)
    same_col = other_rows * width + cols[:, None]
    return np.sort(np.concatenate([same_row, same_col], axis=1), axis=1)


def criss_cross_attention(q, k):
    """Attention of each query over its criss-cross key set, as an AttentionMap."""
    q, k, _ = _check_attention_inputs(q, k)
    height, width, channels = q.shape
    candidates = criss_cross_candidates(height, width)
    kf = k.reshape(-1, channels)
    weights = _attention_rows(q.reshape(-1, channels), kf[candidates])
    return AttentionMap(AttentionForm.CRISS_CROSS, height, width, weights, candidates)


def _apply_criss_cross(attention, v):
    height, width, channels = v.shape
    vf = v.reshape(-1, channels)
    return _weighted_sum(attention.weights, vf[attention.candidates]).reshape(height, width, channels)


def criss_cross_pass(q, k, v):
    """One criss-cross aggregation of V using Q/K attention."""
    q, k, (v,) = _check_attention_inputs(q, k, v)
    return _apply_criss_cross(criss_cross_attention(q, k), v)


def sga_criss_cross(q, k, v_str, v_sem, passes=2, w_q=None, w_k=None):
    """
    Stacked criss-cross structure-guided attention.

    Each pass updates both value streams with the same attention weights.
    Recomputing attention between passes needs the projections: with w_q / w_k,
    Q and K are re-derived from the updated structure feature before the next
    pass. Called with Q, K and the values alone there is nothing to re-derive
    them from, so every pass reuses the given Q and K. sga_block always passes
    its projections.
    Returns (g_next, f_next).
    """
    if int(passes) != passes or passes < 1:
        raise ConfigError(f"passes must be a positive integer, got {passes!r}")
    if (w_q is None) != (w_k is None):
        raise ConfigError("w_q and w_k must be given together")
    q, k, (g, f) = _check_attention_inputs(q, k, v_str, v_sem)
    if w_q is not None:
        for name, w in (("w_q", w_q), ("w_k", w_k)):
            if w.in_channels != g.shape[2]:
                raise DimensionMismatch(
                    f"{name} reads {w.in_channels} channel(s) but V_str has {g.shape[2]}"
                )
        if w_q.out_channels != q.shape[2] or w_k.out_channels != k.shape[2]:
            raise DimensionMismatch("w_q / w_k must reproduce the Q / K width")
    for step in range(int(passes)):
        if step > 0 and w_q is not None:
            q = conv2d(g, w_q)
            k = conv2d(g, w_k)
        attention = criss_cross_attention(q, k)
        g = _apply_criss_cross(attention, g)
        f = _apply_criss_cross(attention, f)
    logger.debug("sga_criss_cross: %d pass(es) on %dx%d", passes, q.shape[0], q.shape[1])
    return g, f


def sga_block(g_c2, f_c2, weights: SGAWeights, form=AttentionForm.CRISS_CROSS, passes=2):
    """
    Project SFF outputs with the four 1×1 convolutions and run attention.
    Q, K, V_str come from the structure feature, V_sem from the semantic one.
    Returns (g_next, f_next).
    """
    q = conv2d(g_c2, weights.query)
    k = conv2d(g_c2, weights.key)
    v_str = conv2d(g_c2, weights.value_str)
    v_sem = conv2d(f_c2, weights.value_sem)
    if AttentionForm(form) is AttentionForm.FULL:
        _, g_next, f_next = sga_full(q, k, v_str, v_sem)
        return g_next, f_next
    return sga_criss_cross(q, k, v_str, v_sem, passes=passes, w_q=weights.query, w_k=weights.key)


# ═══════════════════════════════════════════════════════════
#  EXPORT
# ═══════════════════════════════════════════════════════════

def attention_weight_map(attention: AttentionMap, query):
    """One query's attention weights laid out on the H×W grid (H×W×1 field)."""
    height, width = attention.height, attention.width
    if isinstance(query, tuple):
        row, col = query
        query = row * width + col
    if not 0 <= query < height * width:
        raise DimensionMismatch(f"query {query} outside a {height}x{width} grid")
    grid = np.zeros(height * width)
    if attention.form is AttentionForm.FULL or attention.candidates is None:
        grid[:] = attention.weights[query]
    else:
        grid[attention.candidates[query]] = attention.weights[query]
    return grid.reshape(height, width, 1)
