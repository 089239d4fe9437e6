"""Input validation helpers shared by the estimators and ranking ops."""

from __future__ import annotations

import numpy as np

from sentinel.sampler import RootedSubgraph

UNIT_NORM_ATOL = 1e-6


class DimensionMismatch(ValueError):
    """Vectors of different dimension were combined."""


def check_subgraphs(X) -> list[RootedSubgraph]:
    if isinstance(X, RootedSubgraph):
        raise TypeError("expected a sequence of RootedSubgraph, got a single subgraph")
    X = list(X)
    for i, g in enumerate(X):
        if not isinstance(g, RootedSubgraph):
            raise TypeError(f"X[{i}] is not a RootedSubgraph (got {type(g).__name__})")
    return X


def check_embedding_matrix(X, unit: bool = True) -> np.ndarray:
    """Coerce to a 2-D float64 array; optionally enforce unit-norm rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"embeddings must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("embeddings contain non-finite values")
    if unit:
        norms = np.linalg.norm(X, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_ATOL)
        if bad.size:
            raise ValueError(f"rows {bad[:5].tolist()} are not unit-norm (|norm-1| > {UNIT_NORM_ATOL})")
    return X


def check_same_dimension(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
