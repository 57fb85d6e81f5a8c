"""Residuals for ordinal and categorical targets from predicted distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ResidualBlock:
    kind: str  # "ordinal_vector" or "indicator_matrix"
    values: np.ndarray
    dropped_column: int | None = None

    def as_matrix(self) -> np.ndarray:
        return self.values[:, None] if self.values.ndim == 1 else self.values


def ls_residuals(probas: np.ndarray, y: np.ndarray) -> ResidualBlock:
    """Li-Shepherd residual ``P(Y < y_i) - P(Y > y_i)`` for each row.

    For a binary target this is ``y_i - P(Y = 1)``.
    """
    probas = np.asarray(probas, dtype=float)
    y = np.asarray(y)
    n, L = probas.shape
    if L < 2:
        raise ValueError("need at least 2 levels")
    if y.shape != (n,) or (n and (y.min() < 0 or y.max() >= L)):
        raise ValueError("level codes do not match the probability matrix")
    cdf = np.cumsum(probas, axis=1)
    rows = np.arange(n)
    below = np.where(y > 0, cdf[rows, np.maximum(y - 1, 0)], 0.0)
    # tail sum taken directly to avoid 1 - cdf cancellation
    tail = np.cumsum(probas[:, ::-1], axis=1)[:, ::-1]
    above = np.where(y < L - 1, tail[rows, np.minimum(y + 1, L - 1)], 0.0)
    return ResidualBlock("ordinal_vector", below - above)


def indicator_residuals(probas: np.ndarray, x: np.ndarray, drop: int | None = None) -> ResidualBlock:
    """Observed one-hot indicators minus predicted probabilities, with one
    level (default: the last) omitted."""
    probas = np.asarray(probas, dtype=float)
    n, k = probas.shape
    if k < 2:
        raise ValueError("need at least 2 levels")
    drop = k - 1 if drop is None else drop
    if not 0 <= drop < k:
        raise ValueError(f"invalid drop index {drop} for {k} levels")
    onehot = np.asarray(x)[:, None] == np.arange(k)[None, :]
    keep = [j for j in range(k) if j != drop]
    return ResidualBlock("indicator_matrix", onehot[:, keep] - probas[:, keep], drop)
