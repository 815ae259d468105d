"""Evaluation metrics: inpainting error, edge F-score, missing fraction and
stability across masks. Vertex indices are 0-based."""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .core import as_laplacian_matrix, as_mask, as_time_series
from .errors import DimensionError, NoMissingEntriesError


class EdgeSet(frozenset):
    """Unordered vertex pairs stored as ``(i, j)`` with ``i < j``."""

    def __new__(cls, edges=(), n_vertices=None):
        pairs = []
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i}, {i}) not allowed")
            if min(i, j) < 0 or (n_vertices is not None and max(i, j) >= n_vertices):
                raise ValueError(f"edge ({i}, {j}) outside vertex range")
            pairs.append((min(i, j), max(i, j)))
        obj = super().__new__(cls, pairs)
        obj.n_vertices = n_vertices
        return obj


def _missing(psi):
    return 1.0 - psi


def normalized_error(x_true, x_hat, psi):
    """||(11^T - psi) o (X_hat - X)||_F divided by the number of missing entries."""
    x_true = as_time_series(x_true, "x_true")
    x_hat = as_time_series(x_hat, "x_hat")
    if x_true.shape != x_hat.shape:
        raise DimensionError(f"shapes differ: {x_true.shape} vs {x_hat.shape}")
    miss = _missing(as_mask(psi, x_true.shape))
    count = miss.sum()
    if count == 0:
        raise NoMissingEntriesError("mask has no missing entries")
    return float(np.linalg.norm(miss * (x_hat - x_true)) / count)


def rmse_missing(x_true, x_hat, psi):
    """Root-mean-square error over the missing entries."""
    x_true = as_time_series(x_true, "x_true")
    x_hat = as_time_series(x_hat, "x_hat")
    miss = _missing(as_mask(psi, x_true.shape))
    count = miss.sum()
    if count == 0:
        raise NoMissingEntriesError("mask has no missing entries")
    return float(np.sqrt(np.sum((miss * (x_hat - x_true)) ** 2) / count))


def binarize(L, threshold=0.1):
    """Edges whose weight exceeds ``threshold`` times the largest weight."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    Lm = as_laplacian_matrix(L)
    n = Lm.shape[0]
    iu = np.triu_indices(n, k=1)
    w = -Lm[iu]
    max_w = np.max(np.abs(w)) if w.size else 0.0
    if max_w == 0.0:
        return EdgeSet((), n)
    keep = w > threshold * max_w
    return EdgeSet(zip(iu[0][keep], iu[1][keep]), n)


def f_score(learned, truth):
    """Harmonic mean of edge precision and recall.

    Both empty scores 1; exactly one empty scores 0.
    """
    if not learned and not truth:
        return 1.0
    if not learned or not truth:
        return 0.0
    hits = len(learned & truth)
    if hits == 0:
        return 0.0
    p = hits / len(learned)
    r = hits / len(truth)
    return 2.0 * p * r / (p + r)


def sensing_ratio(psi):
    """Fraction of missing entries, ||11^T - psi||_1 / NM."""
    psi = as_mask(psi)
    return float(_missing(psi).sum() / psi.size)


def stability_score(laplacians, threshold=0.1):
    """Mean pairwise F-score between binarized graphs."""
    laplacians = list(laplacians)
    if len(laplacians) < 2:
        raise ValueError("stability needs at least two graphs")
    edge_sets = [binarize(L, threshold) for L in laplacians]
    scores = [f_score(a, b) for a, b in combinations(edge_sets, 2)]
    total = 0.0
    for s in scores:
        total += s
    return total / len(scores)
