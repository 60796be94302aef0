"""Attribute view: a small CNN over stacked (attribute, value) rows and its losses.

Parameters live under the names ``attr_ent`` (entity matrix of this view),
``attr`` (attribute matrix), ``conv`` (filters, shape ``(F, 2, c)``),
``dense_w`` (``(F * (d - c + 1), d)``) and ``dense_b`` (``(d,)``). Value
embeddings are an external frozen matrix indexed per fact.
"""

from __future__ import annotations

from typing import Dict, Mapping, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .optim import xavier_init
from .relation_view import cross_relation_facts, sigmoid, softplus

ENT = "attr_ent"
ATTR = "attr"
CONV = "conv"
DENSE_W = "dense_w"
DENSE_B = "dense_b"
PARAM_NAMES = (ENT, ATTR, CONV, DENSE_W, DENSE_B)


def init_cnn_params(d: int, kernel_width: int = 4, filters: int = 2,
                    rng: np.random.Generator = None) -> Dict[str, np.ndarray]:
    if not 0 < kernel_width < d:
        raise ValueError(f"kernel width must satisfy 0 < c < d, got c={kernel_width}, d={d}")
    rng = rng or np.random.default_rng(0)
    width = d - kernel_width + 1
    return {
        CONV: xavier_init((filters, 2, kernel_width), rng=rng),
        DENSE_W: xavier_init((filters * width, d), rng=rng),
        DENSE_B: np.zeros(d),
    }


def cnn_forward(a: np.ndarray, v: np.ndarray, conv: np.ndarray, dense_w: np.ndarray,
                dense_b: np.ndarray, return_cache: bool = False):
    """``tanh(vec(tanh(<a; v> * conv)) W + b)`` for one pair or a batch of rows.

    Valid convolution with stride 1; each filter spans both rows, so a
    filter produces ``d - c + 1`` features.
    """
    single = np.ndim(a) == 1
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if a.shape != v.shape:
        raise ValueError(f"attribute/value shape mismatch: {a.shape} vs {v.shape}")
    filters, rows, c = conv.shape
    d = a.shape[1]
    width = d - c + 1
    if rows != 2 or width < 1 or dense_w.shape != (filters * width, dense_b.shape[0]):
        raise ValueError("CNN parameter shapes do not match the input dimension")
    x = np.stack([a, v], axis=1)                       # (B, 2, d)
    windows = sliding_window_view(x, c, axis=2)        # (B, 2, width, c)
    feat = np.tanh(np.einsum("bplk,fpk->bfl", windows, conv))
    flat = feat.reshape(len(a), filters * width)
    out = np.tanh(flat @ dense_w + dense_b)
    if single:
        out = out[0]
    if return_cache:
        return out, (windows, feat, flat, np.atleast_2d(out), conv, dense_w)
    return out


def cnn_backward(cache, d_out: np.ndarray):
    """Gradients w.r.t. the attribute rows, conv filters, dense weights and bias."""
    windows, feat, flat, out, conv, dense_w = cache
    n, filters, width = feat.shape
    c = conv.shape[2]
    d_pre = np.atleast_2d(d_out) * (1.0 - out * out)
    g_w = flat.T @ d_pre
    g_b = d_pre.sum(axis=0)
    d_feat = (d_pre @ dense_w.T).reshape(n, filters, width) * (1.0 - feat * feat)
    g_conv = np.einsum("bfl,bplk->fpk", d_feat, windows)
    d_attr = np.zeros((n, width + c - 1))
    for k in range(c):
        d_attr[:, k:k + width] += d_feat.transpose(0, 2, 1) @ conv[:, 0, k]
    return d_attr, g_conv, g_w, g_b


def score_attr(h, a, v, conv, dense_w, dense_b):
    """``-||h - CNN(<a; v>)||_2``."""
    out = cnn_forward(a, v, conv, dense_w, dense_b)
    s = -np.linalg.norm(np.asarray(h) - out, axis=-1)
    return float(s) if np.ndim(s) == 0 else s


def attribute_loss(params: Mapping[str, np.ndarray], heads, attrs, values: np.ndarray,
                   weights=None) -> Tuple[float, Dict[str, np.ndarray]]:
    """``sum_i w_i * log(1 + exp(-f_attr(h_i, a_i, v_i)))`` over positive facts.

    ``values`` holds one value embedding row per fact; it receives no
    gradient.
    """
    ent, attr = params[ENT], params[ATTR]
    grads = {name: np.zeros_like(params[name]) for name in PARAM_NAMES}
    heads = np.asarray(heads, dtype=np.int64)
    attrs = np.asarray(attrs, dtype=np.int64)
    if len(heads) == 0:
        return 0.0, grads
    weights = np.ones(len(heads)) if weights is None else np.asarray(weights, dtype=np.float64)
    out, cache = cnn_forward(attr[attrs], values, params[CONV], params[DENSE_W],
                             params[DENSE_B], return_cache=True)
    diff = ent[heads] - out
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    loss = float(np.sum(weights * softplus(dist)))
    coef = weights * sigmoid(dist)
    unit = np.where(dist[:, None] > 0, diff / np.where(dist > 0, dist, 1.0)[:, None], 0.0)
    d_diff = coef[:, None] * unit
    np.add.at(grads[ENT], heads, d_diff)
    d_attr, g_conv, g_w, g_b = cnn_backward(cache, -d_diff)
    np.add.at(grads[ATTR], attrs, d_attr)
    grads[CONV] = g_conv
    grads[DENSE_W] = g_w
    grads[DENSE_B] = g_b
    return loss, grads


def loss_attribute_view(params, facts: np.ndarray, value_embeddings: np.ndarray):
    """Positive-only loss; ``facts`` rows are ``(head, attribute, value index)``."""
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    return attribute_loss(params, facts[:, 0], facts[:, 1], value_embeddings[facts[:, 2]])


def cross_entity_attr_facts(facts: np.ndarray, counterpart: Mapping[int, int]) -> np.ndarray:
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    if not counterpart or len(facts) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    hit = np.isin(facts[:, 0], np.fromiter(counterpart.keys(), dtype=np.int64))
    sub = facts[hit].copy()
    sub[:, 0] = [counterpart[h] for h in sub[:, 0].tolist()]
    return sub


def loss_cross_entity_attr(params, facts: np.ndarray, value_embeddings: np.ndarray,
                           counterpart: Mapping[int, int]):
    """Attribute facts of seed-aligned heads with the counterpart swapped in."""
    swapped = cross_entity_attr_facts(facts, counterpart)
    return attribute_loss(params, swapped[:, 0], swapped[:, 1], value_embeddings[swapped[:, 2]])


def loss_cross_attr_alignment(params, facts: np.ndarray, value_embeddings: np.ndarray,
                              alignment):
    """Soft attribute alignment: counterpart attribute substituted, weighted by sim."""
    swapped, weights = cross_relation_facts(facts, alignment)
    return attribute_loss(params, swapped[:, 0], swapped[:, 1], value_embeddings[swapped[:, 2]],
                          weights=weights)
