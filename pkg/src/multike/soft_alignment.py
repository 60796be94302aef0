"""Soft relation/attribute alignment discovered from name and embedding similarity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


def cosine(x, y) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0))


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine between rows; rows with zero norm give 0."""
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    a_unit = np.divide(a, na, out=np.zeros_like(a, dtype=np.float64), where=na > 0)
    b_unit = np.divide(b, nb, out=np.zeros_like(b, dtype=np.float64), where=nb > 0)
    return np.clip(a_unit @ b_unit.T, -1.0, 1.0)


def similarity(name_x, name_y, emb_x, emb_y, alpha1: float = 0.6, alpha2: float = 0.4) -> float:
    """``alpha1 * cos(names) + alpha2 * cos(embeddings)``."""
    return alpha1 * cosine(name_x, name_y) + alpha2 * cosine(emb_x, emb_y)


@dataclass
class SoftAlignment:
    kind: str
    threshold: float
    entries: List[Tuple[int, int, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_tsv(self, labels: Sequence[str] = None) -> str:
        def label(i):
            return labels[i] if labels is not None else str(i)
        return "".join(f"{label(a)}\t{label(b)}\t{s:.6f}\n" for a, b, s in self.entries)


def update_soft_alignment(kind: str, name_vectors: np.ndarray, embeddings: np.ndarray,
                          n_source: int, threshold: float = 0.9, alpha1: float = 0.6,
                          alpha2: float = 0.4) -> SoftAlignment:
    """Score every cross-KG pair and keep those with similarity >= ``threshold``.

    Rows ``[0, n_source)`` of ``name_vectors``/``embeddings`` belong to the
    source KG, the rest to the target KG. The result replaces any previous
    alignment.
    """
    if kind not in ("relation", "attribute"):
        raise ValueError(f"unknown kind {kind!r}")
    sims = (alpha1 * cosine_matrix(name_vectors[:n_source], name_vectors[n_source:])
            + alpha2 * cosine_matrix(embeddings[:n_source], embeddings[n_source:]))
    rows, cols = np.nonzero(sims >= threshold)
    entries = [(int(i), int(j) + n_source, float(sims[i, j])) for i, j in zip(rows, cols)]
    return SoftAlignment(kind, threshold, entries)
