"""Conditional-probability estimators ``p(target | conditioners)``.

Every model returns, for each row, a full distribution over the target's
declared levels. Levels not observed in the training sample are dropped
from the fit and always receive probability 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from ..data import Dataset, VariableMeta
from . import glm
from .forest import ForestParams, ProbabilityForest
from .glm import ConvergenceError

logger = logging.getLogger(__name__)

__all__ = [
    "EstimatorKind", "ForestParams", "ProbModel", "FitDiagnostics",
    "EstimationError", "ConvergenceError", "fit", "predict_proba", "design_matrix",
]

DEFAULT_SMOOTHING = 0.5


class EstimatorKind(str, Enum):
    SATURATED = "saturated"
    BINOMIAL_LOGISTIC = "binomial_logistic"
    MULTINOMIAL_LOGISTIC = "multinomial_logistic"
    PROPORTIONAL_ODDS = "proportional_odds"
    PROBABILITY_FOREST = "probability_forest"

    @property
    def is_glm(self) -> bool:
        return self in GLM_KINDS


GLM_KINDS = frozenset({EstimatorKind.BINOMIAL_LOGISTIC, EstimatorKind.MULTINOMIAL_LOGISTIC,
                       EstimatorKind.PROPORTIONAL_ODDS})


class EstimationError(ValueError):
    pass


@dataclass
class FitDiagnostics:
    converged: bool = True
    iterations: int = 0
    dropped_levels: list[int] = field(default_factory=list)
    fallback: str | None = None
    oob_fallback_rows: int = 0


@dataclass
class ProbModel:
    kind: EstimatorKind
    target_levels: int
    conditioners: tuple[VariableMeta, ...]
    params: dict[str, Any]
    diagnostics: FitDiagnostics


def design_matrix(ds: Dataset, conditioners: Sequence[str]) -> np.ndarray:
    """Categorical columns one-hot with level 0 as reference; ordinal and
    binary columns as integer scores."""
    blocks = []
    for name in conditioners:
        meta = ds.meta(name)
        col = ds.column(name)
        if meta.is_categorical:
            blocks.append((col[:, None] == np.arange(1, meta.n_levels)[None, :]).astype(float))
        else:
            blocks.append(col[:, None].astype(float))
    if not blocks:
        return np.zeros((ds.n, 0))
    return np.hstack(blocks)


def _check_kind(kind: EstimatorKind, meta: VariableMeta) -> None:
    if kind is EstimatorKind.BINOMIAL_LOGISTIC and meta.n_levels != 2:
        raise EstimationError(f"binomial_logistic needs a binary target, {meta.name} has {meta.n_levels} levels")
    if kind is EstimatorKind.PROPORTIONAL_ODDS and (meta.is_categorical or meta.n_levels < 3):
        raise EstimationError(f"proportional_odds needs an ordinal target with >= 3 levels ({meta.name})")


def fit(kind, ds: Dataset, target: str, conditioners: Sequence[str],
        params: ForestParams | None = None, smoothing: float = DEFAULT_SMOOTHING) -> ProbModel:
    """Fit ``p(target | conditioners)`` with the given estimator kind."""
    kind = EstimatorKind(kind)
    conditioners = list(conditioners)
    if target in conditioners:
        raise EstimationError("target may not be a conditioner")
    meta = ds.meta(target)
    cmetas = tuple(ds.meta(c) for c in conditioners)
    _check_kind(kind, meta)

    y = ds.column(target)
    L = meta.n_levels
    observed = np.flatnonzero(np.bincount(y, minlength=L))
    if observed.size < 2:
        raise EstimationError(f"target {target!r} is constant in the sample")
    diag = FitDiagnostics(dropped_levels=[int(j) for j in np.setdiff1d(np.arange(L), observed)])
    compress = np.full(L, -1)
    compress[observed] = np.arange(observed.size)
    yc = compress[y]
    K = observed.size
    out = dict(observed=observed)

    if kind is EstimatorKind.SATURATED:
        keys = ds.rows[:, [ds.index(c) for c in conditioners]] if conditioners else np.zeros((ds.n, 0), np.int64)
        patterns, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        counts = np.zeros((len(patterns), K))
        np.add.at(counts, (inverse, yc), 1.0)
        out.update(patterns={tuple(p): i for i, p in enumerate(patterns.tolist())},
                   counts=counts, marginal=counts.sum(axis=0), smoothing=float(smoothing))
        return ProbModel(kind, L, cmetas, out, diag)

    X = design_matrix(ds, conditioners)
    if kind is EstimatorKind.PROBABILITY_FOREST:
        params = params or ForestParams()
        if X.shape[1] == 0:
            out["marginal"] = np.bincount(yc, minlength=K) / ds.n
        else:
            out["forest"] = ProbabilityForest(params).fit(X, yc, K)
            diag.oob_fallback_rows = out["forest"].oob_fallback_rows
        return ProbModel(kind, L, cmetas, out, diag)

    if kind is EstimatorKind.PROPORTIONAL_ODDS and K >= 3:
        try:
            alpha, beta, trace = glm.fit_proportional_odds(X, yc, K)
            out.update(alpha=alpha, beta=beta)
            diag.converged, diag.iterations = trace.converged, trace.iterations
            return ProbModel(kind, L, cmetas, out, diag)
        except ConvergenceError:
            logger.debug("proportional odds failed for %s; falling back to multinomial", target)
            diag.fallback = EstimatorKind.MULTINOMIAL_LOGISTIC.value
    W, trace = glm.fit_multinomial(X, yc, K)
    if not np.all(np.isfinite(W)):
        raise ConvergenceError(f"logistic fit for {target!r} diverged")
    out["coef"] = W
    diag.converged, diag.iterations = trace.converged, trace.iterations
    return ProbModel(kind, L, cmetas, out, diag)


def predict_proba(m: ProbModel, ds: Dataset, conditioners: Sequence[str]) -> np.ndarray:
    """Return an ``n x L`` matrix of row-wise probability distributions."""
    conditioners = list(conditioners)
    if [c.name for c in m.conditioners] != conditioners:
        raise EstimationError("conditioners differ from those used at fit time")
    for fitted in m.conditioners:
        if ds.meta(fitted.name).levels != fitted.levels:
            raise EstimationError(f"level set of {fitted.name!r} differs from fit time")
    p = m.params
    K = len(p["observed"])

    if m.kind is EstimatorKind.SATURATED:
        keys = ds.rows[:, [ds.index(c) for c in conditioners]] if conditioners else np.zeros((ds.n, 0), np.int64)
        a = p["smoothing"]
        table = p["counts"]
        marg = (p["marginal"] + a) / (p["marginal"].sum() + a * K)
        strat = (table + a) / (table.sum(axis=1, keepdims=True) + a * K)
        idx = np.array([p["patterns"].get(tuple(k), -1) for k in keys.tolist()], dtype=np.int64)
        probs = np.where(idx[:, None] >= 0, strat[np.maximum(idx, 0)], marg[None, :])
    else:
        X = design_matrix(ds, conditioners)
        if "marginal" in p:
            probs = np.tile(p["marginal"], (ds.n, 1))
        elif "forest" in p:
            probs = p["forest"].predict_proba(X)
        elif "alpha" in p:
            probs = glm.predict_proportional_odds(p["alpha"], p["beta"], X)
        else:
            probs = glm.predict_multinomial(p["coef"], X)

    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    full = np.zeros((ds.n, m.target_levels))
    full[:, p["observed"]] = probs
    return full
