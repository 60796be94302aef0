"""Translational relation view: scoring, negative sampling and its three losses.

Every loss takes a parameter mapping holding ``rel_ent`` (entity matrix of
the relation view) and ``rel`` (relation matrix) and returns
``(loss, grads)`` where ``grads`` has dense arrays shaped like those two
tensors.
"""

from __future__ import annotations

from typing import Dict, Mapping, Optional, Tuple

import numpy as np

ENT = "rel_ent"
REL = "rel"


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def _norm(x: np.ndarray, norm: str) -> np.ndarray:
    if norm == "L2":
        return np.sqrt(np.sum(x * x, axis=-1))
    if norm == "L1":
        return np.sum(np.abs(x), axis=-1)
    raise ValueError(f"unknown norm {norm!r}")


def _norm_grad(x: np.ndarray, dist: np.ndarray, norm: str) -> np.ndarray:
    if norm == "L1":
        return np.sign(x)
    safe = np.where(dist > 0, dist, 1.0)
    return np.where(dist[..., None] > 0, x / safe[..., None], 0.0)


def score_rel(h, r, t, norm: str = "L2"):
    """``-||h + r - t||``; works on single vectors or row batches."""
    h, r, t = (np.asarray(v, dtype=np.float64) for v in (h, r, t))
    if not (h.shape[-1] == r.shape[-1] == t.shape[-1]):
        raise ValueError(f"dimension mismatch: {h.shape}, {r.shape}, {t.shape}")
    s = -_norm(h + r - t, norm)
    return float(s) if np.ndim(s) == 0 else s


def prob_rel(h, r, t, norm: str = "L2"):
    """Probability that the fact is real: ``sigmoid(score_rel)``."""
    return sigmoid(score_rel(h, r, t, norm))


def encode_facts(facts: np.ndarray, n_entities: int, n_relations: int) -> np.ndarray:
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    return (facts[:, 0] * n_relations + facts[:, 1]) * n_entities + facts[:, 2]


def sample_negatives(facts: np.ndarray, k: int, n_entities: int, rng: np.random.Generator,
                     positives: Optional[np.ndarray] = None, n_relations: Optional[int] = None,
                     max_tries: int = 100) -> np.ndarray:
    """``k`` corruptions per fact, replacing head or tail (fair coin) uniformly.

    ``positives`` are sorted fact codes from :func:`encode_facts`; corruptions
    that hit a positive are resampled up to ``max_tries`` times and then kept.
    Row ``i * k + j`` is the j-th corruption of fact ``i``.
    """
    if n_entities < 2:
        raise ValueError("need at least two entities to corrupt facts")
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    neg = np.repeat(facts, k, axis=0)
    if len(neg) == 0:
        return neg
    side = np.where(rng.random(len(neg)) < 0.5, 0, 2)
    rows = np.arange(len(neg))
    neg[rows, side] = rng.integers(n_entities, size=len(neg))
    if positives is None or len(positives) == 0:
        return neg
    if n_relations is None:
        n_relations = int(facts[:, 1].max()) + 1
    bad = np.isin(encode_facts(neg, n_entities, n_relations), positives)
    tries = 0
    while bad.any() and tries < max_tries:
        idx = np.flatnonzero(bad)
        neg[idx, side[idx]] = rng.integers(n_entities, size=len(idx))
        bad[idx] = np.isin(encode_facts(neg[idx], n_entities, n_relations), positives)
        tries += 1
    return neg


def translational_loss(params: Mapping[str, np.ndarray], heads, rels, tails, labels=None,
                       weights=None, norm: str = "L2") -> Tuple[float, Dict[str, np.ndarray]]:
    """``sum_i w_i * log(1 + exp(-label_i * f_rel(h_i, r_i, t_i)))``.

    ``labels`` default to +1 and ``weights`` to 1; weights are constants.
    """
    ent, rel = params[ENT], params[REL]
    heads = np.asarray(heads, dtype=np.int64)
    rels = np.asarray(rels, dtype=np.int64)
    tails = np.asarray(tails, dtype=np.int64)
    grads = {ENT: np.zeros_like(ent), REL: np.zeros_like(rel)}
    if len(heads) == 0:
        return 0.0, grads
    labels = np.ones(len(heads)) if labels is None else np.asarray(labels, dtype=np.float64)
    weights = np.ones(len(heads)) if weights is None else np.asarray(weights, dtype=np.float64)
    x = ent[heads] + rel[rels] - ent[tails]
    dist = _norm(x, norm)
    # loss term: softplus(label * dist) since f_rel = -dist
    loss = float(np.sum(weights * softplus(labels * dist)))
    coef = weights * labels * sigmoid(labels * dist)
    dx = coef[:, None] * _norm_grad(x, dist, norm)
    np.add.at(grads[ENT], heads, dx)
    np.add.at(grads[ENT], tails, -dx)
    np.add.at(grads[REL], rels, dx)
    return loss, grads


def loss_relation_view(params, positives: np.ndarray, negatives: Optional[np.ndarray] = None,
                       norm: str = "L2"):
    """Logistic loss over positive facts (label +1) and sampled negatives (-1)."""
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    if negatives is None:
        negatives = np.zeros((0, 3), dtype=np.int64)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 3)
    facts = np.concatenate([positives, negatives])
    labels = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
    return translational_loss(params, facts[:, 0], facts[:, 1], facts[:, 2], labels, norm=norm)


def counterpart_map(seed_pairs: np.ndarray) -> Dict[int, int]:
    """Both directions of each seed pair (entity index -> aligned index)."""
    mapping: Dict[int, int] = {}
    for a, b in np.asarray(seed_pairs, dtype=np.int64).reshape(-1, 2):
        mapping[int(a)] = int(b)
        mapping[int(b)] = int(a)
    return mapping


def cross_entity_facts(facts: np.ndarray, counterpart: Mapping[int, int]) -> np.ndarray:
    """Facts with a seed-aligned head or tail, the aligned entity swapped in.

    A fact whose head and tail are both aligned yields two rows.
    """
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    if not counterpart or len(facts) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    keys = np.fromiter(counterpart.keys(), dtype=np.int64)
    vals = np.fromiter(counterpart.values(), dtype=np.int64)
    lookup = dict(zip(keys.tolist(), vals.tolist()))
    out = []
    head_hit = np.isin(facts[:, 0], keys)
    if head_hit.any():
        sub = facts[head_hit].copy()
        sub[:, 0] = [lookup[h] for h in sub[:, 0].tolist()]
        out.append(sub)
    tail_hit = np.isin(facts[:, 2], keys)
    if tail_hit.any():
        sub = facts[tail_hit].copy()
        sub[:, 2] = [lookup[t] for t in sub[:, 2].tolist()]
        out.append(sub)
    if not out:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(out)


def loss_cross_entity_rel(params, facts: np.ndarray, counterpart: Mapping[int, int],
                          norm: str = "L2"):
    """Entity identity inference: positives with aligned entities swapped in."""
    swapped = cross_entity_facts(facts, counterpart)
    return translational_loss(params, swapped[:, 0], swapped[:, 1], swapped[:, 2], norm=norm)


def cross_relation_facts(facts: np.ndarray, alignment) -> Tuple[np.ndarray, np.ndarray]:
    """Facts whose relation is soft-aligned, counterpart substituted.

    ``alignment`` is an iterable of ``(r, r_hat, sim)``; each entry is used in
    both directions. Returns ``(facts, weights)``.
    """
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    partners: Dict[int, list] = {}
    for a, b, sim in alignment:
        partners.setdefault(int(a), []).append((int(b), float(sim)))
        partners.setdefault(int(b), []).append((int(a), float(sim)))
    if not partners or len(facts) == 0:
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0)
    rows, weights = [], []
    for rel_id, plist in partners.items():
        sel = facts[facts[:, 1] == rel_id]
        for other, sim in plist:
            sub = sel.copy()
            sub[:, 1] = other
            rows.append(sub)
            weights.append(np.full(len(sub), sim))
    return np.concatenate(rows), np.concatenate(weights)


def loss_cross_rel_alignment(params, facts: np.ndarray, alignment, norm: str = "L2"):
    """Relation identity inference weighted by soft-alignment similarity."""
    swapped, weights = cross_relation_facts(facts, alignment)
    return translational_loss(params, swapped[:, 0], swapped[:, 1], swapped[:, 2],
                              weights=weights, norm=norm)
