"""Chi-square tail probabilities and pseudo-inverse quadratic forms."""

from __future__ import annotations

import numpy as np
from scipy import special

EIG_RTOL = 1e-10


def chi_square_sf(stat: float, df: int) -> float:
    """Upper tail of the chi-square distribution, ``Q(df/2, stat/2)``."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if stat <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, stat / 2.0))


def pinv_quadratic_form(vectors: np.ndarray, rtol: float = EIG_RTOL) -> tuple[float, int]:
    """Hotelling-style form ``(1/n) d S^+ d'`` for per-row vectors.

    ``d`` is the column sum of ``vectors`` and ``S`` their covariance with
    divisor n. Returns the statistic and the numerical rank of ``S``
    (eigenvalues below ``rtol * max`` count as zero).
    """
    v = np.asarray(vectors, dtype=float)
    n = v.shape[0]
    mean = v.mean(axis=0)
    centered = v - mean
    cov = centered.T @ centered / n
    evals, evecs = np.linalg.eigh(cov)
    top = evals[-1] if evals.size else 0.0
    if top < 1e-14:
        return 0.0, 0
    keep = evals > rtol * top
    proj = evecs[:, keep].T @ mean
    stat = n * float(np.sum(proj ** 2 / evals[keep]))
    return stat, int(keep.sum())
