"""View combination: weighted view averaging, shared space learning, in-training combination.

View matrices are passed as a list ``[H1, H2, ...]`` of ``(n, d)`` arrays. An
optional boolean ``masks`` array of shape ``(n, D)`` marks which views exist
for each entity (a missing name excludes view 1 for that row).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .optim import AdaGrad

WVA, SSL, ITC = "wva", "ssl", "itc"
STRATEGIES = (WVA, SSL, ITC)


@dataclass
class CombinedEmbeddings:
    matrix: np.ndarray
    strategy: str
    mappings: List[np.ndarray] = field(default_factory=list)
    weights: Optional[np.ndarray] = None


def _masks(views: Sequence[np.ndarray], masks) -> np.ndarray:
    n = views[0].shape[0]
    if masks is None:
        return np.ones((n, len(views)), dtype=bool)
    masks = np.asarray(masks, dtype=bool)
    if masks.shape != (n, len(views)):
        raise ValueError(f"mask shape {masks.shape} != {(n, len(views))}")
    return masks


def view_mean(views: Sequence[np.ndarray], masks=None) -> np.ndarray:
    """Per-entity mean over the views present for that entity."""
    m = _masks(views, masks).astype(np.float64)
    stacked = np.stack(views, axis=1)                    # (n, D, d)
    count = np.maximum(m.sum(axis=1, keepdims=True), 1.0)
    return np.einsum("nv,nvd->nd", m, stacked) / count


def combine_wva(views: Sequence[np.ndarray], masks=None, guard: float = 1e-6
                ) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted view averaging.

    ``w_i = cos(h_i, mean) / sum_j cos(h_j, mean)`` per entity, falling back to
    uniform weights over present views when the denominator is ``<= guard``.
    Returns ``(combined, weights)`` with weights of shape ``(n, D)``.
    """
    views = [np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in views]
    m = _masks(views, masks)
    mean = view_mean(views, m)
    stacked = np.stack(views, axis=1)
    norms = np.linalg.norm(stacked, axis=2) * np.linalg.norm(mean, axis=1, keepdims=True)
    dots = np.einsum("nvd,nd->nv", stacked, mean)
    cos = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    cos = np.where(m, cos, 0.0)
    denom = cos.sum(axis=1, keepdims=True)
    uniform = m / np.maximum(m.sum(axis=1, keepdims=True), 1)
    safe = np.where(denom > guard, denom, 1.0)
    weights = np.where(denom > guard, cos / safe, uniform)
    combined = np.einsum("nv,nvd->nd", weights, stacked)
    return combined, weights


def ssl_loss(combined: np.ndarray, mappings: Sequence[np.ndarray], views: Sequence[np.ndarray],
             masks=None) -> Tuple[float, Dict[str, np.ndarray]]:
    """``sum_i ||H - H_i Z_i||_F^2 + ||I - Z_i^T Z_i||_F^2`` with masked rows.

    Gradient keys are ``"combined"`` and ``"z{i}"`` (0-based view index).
    """
    m = _masks(views, masks).astype(np.float64)
    eye = np.eye(combined.shape[1])
    loss = 0.0
    grads = {"combined": np.zeros_like(combined)}
    for i, (view, z) in enumerate(zip(views, mappings)):
        resid = (combined - view @ z) * m[:, i:i + 1]
        ortho = eye - z.T @ z
        loss += float(np.sum(resid * resid) + np.sum(ortho * ortho))
        grads["combined"] += 2.0 * resid
        grads[f"z{i}"] = -2.0 * view.T @ resid - 4.0 * z @ ortho
    return loss, grads


def orthogonality_residual(z: np.ndarray) -> float:
    """``||I - Z^T Z||_F``."""
    return float(np.linalg.norm(np.eye(z.shape[1]) - z.T @ z))


def train_shared_space(views: Sequence[np.ndarray], epochs: int = 100,
                       learning_rate: float = 0.001, masks=None
                       ) -> Tuple[CombinedEmbeddings, List[float]]:
    """Minimize the shared-space loss with AdaGrad, one full-batch step per epoch.

    The combined matrix starts at the per-entity view mean and every mapping
    at the identity. Returns the combined embeddings (with mappings) and the
    loss recorded before each step plus the final loss.
    """
    views = [np.asarray(v, dtype=np.float64) for v in views]
    m = _masks(views, masks)
    d = views[0].shape[1]
    params = {"combined": view_mean(views, m)}
    for i in range(len(views)):
        params[f"z{i}"] = np.eye(d)
    opt = AdaGrad(learning_rate)
    history = []
    for _ in range(epochs):
        loss, grads = ssl_loss(params["combined"], [params[f"z{i}"] for i in range(len(views))],
                               views, m)
        history.append(loss)
        opt.step(params, grads)
    mappings = [params[f"z{i}"] for i in range(len(views))]
    history.append(ssl_loss(params["combined"], mappings, views, m)[0])
    return CombinedEmbeddings(params["combined"], SSL, mappings), history


def loss_itc(combined: np.ndarray, views: Sequence[np.ndarray], masks=None,
             rows: Optional[np.ndarray] = None) -> Tuple[float, Dict[str, np.ndarray]]:
    """``sum_i ||H - H_i||_F^2``, optionally restricted to ``rows``.

    Returns gradients ``"combined"`` and ``"view{i}"`` (dense, full shape).
    Callers decide which view gradients to apply; a frozen view's gradient
    is simply ignored.
    """
    m = _masks(views, masks).astype(np.float64)
    if rows is None:
        rows = np.arange(combined.shape[0])
    grads = {"combined": np.zeros_like(combined)}
    loss = 0.0
    h = combined[rows]
    for i, view in enumerate(views):
        resid = (h - view[rows]) * m[rows, i:i + 1]
        loss += float(np.sum(resid * resid))
        grads["combined"][rows] += 2.0 * resid
        g = np.zeros_like(view)
        g[rows] = -2.0 * resid
        grads[f"view{i}"] = g
    return loss, grads
