"""Probability forests: bootstrap Gini trees whose leaf class frequencies are
averaged over the ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    mtry: int | None = None
    min_node_size: int = 10
    prediction_mode: str = "out_of_bag"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.prediction_mode not in ("out_of_bag", "all_trees"):
            raise ValueError(f"unknown prediction_mode {self.prediction_mode!r}")

    def resolved_mtry(self, n_features: int) -> int:
        if self.mtry is not None:
            return max(1, min(self.mtry, n_features))
        return max(1, math.ceil(math.sqrt(n_features)))


class ProbabilityForest:
    """Thin wrapper that adds out-of-bag prediction for the training rows."""

    def __init__(self, params: ForestParams):
        self.params = params

    def fit(self, X: np.ndarray, y: np.ndarray, K: int) -> "ProbabilityForest":
        p = self.params
        # a node is split only while it holds more than min_node_size rows
        self.model_ = RandomForestClassifier(
            n_estimators=p.n_trees,
            criterion="gini",
            max_features=p.resolved_mtry(X.shape[1]),
            min_samples_split=p.min_node_size + 1,
            bootstrap=True,
            random_state=p.seed % (2 ** 32),
            n_jobs=1,
        ).fit(X, y)
        self.K = K
        self.X_train_ = np.array(X, dtype=float)
        self.classes_ = self.model_.classes_.astype(np.int64)
        self.oob_fallback_rows = 0
        self.oob_proba_ = None
        if p.prediction_mode == "out_of_bag":
            per_tree = self._per_tree(self.X_train_)
            n = X.shape[0]
            oob = np.ones((len(per_tree), n), dtype=bool)
            for t, drawn in enumerate(self.model_.estimators_samples_):
                oob[t, drawn] = False
            counts = oob.sum(axis=0)
            has = counts > 0
            probs = per_tree.mean(axis=0)
            summed = np.einsum("tn,tnk->nk", oob.astype(float), per_tree)
            probs[has] = summed[has] / counts[has, None]
            # rows drawn into every bootstrap keep the all-trees average
            self.oob_fallback_rows = int((~has).sum())
            self.oob_proba_ = self._expand(probs)
        return self

    def _per_tree(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((len(self.model_.estimators_), X.shape[0], len(self.classes_)))
        for t, tree in enumerate(self.model_.estimators_):
            out[t] = tree.predict_proba(X)
        return out

    def _expand(self, probs: np.ndarray) -> np.ndarray:
        full = np.zeros((probs.shape[0], self.K))
        full[:, self.classes_] = probs
        return full

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.oob_proba_ is not None and np.array_equal(X, self.X_train_):
            return self.oob_proba_.copy()
        return self._expand(self._per_tree(X).mean(axis=0))
