"""Residual-based conditional independence tests and stratified baselines.

The residual tests fit ``p(x | Z)`` and ``p(y | Z)``, turn both into
residuals (Li-Shepherd for ordinal/binary, dummy-indicator for categorical)
and test whether the per-row products have mean zero with a chi-square
calibrated quadratic form.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .data import Dataset
from .estimators import (ConvergenceError, EstimationError, EstimatorKind, ForestParams,
                         fit, predict_proba)
from .residuals import ResidualBlock, indicator_residuals, ls_residuals
from .stats import chi_square_sf, pinv_quadratic_form

logger = logging.getLogger(__name__)

MIN_ROWS = 10
VAR_EPS = 1e-14


class Family(str, Enum):
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    G2 = "G2"
    G2_MONTECARLO = "G2_montecarlo"


@dataclass(frozen=True)
class Diagnostics:
    sigma_rank: int = 0
    estimator: str | None = None
    n_used: int = 0
    degenerate: bool = False
    note: str = ""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_value: float
    family: Family
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    __test__ = False  # not a pytest class

    @classmethod
    def degenerate(cls, family: Family, note: str, **diag) -> "TestResult":
        return cls(0.0, 0, 1.0, family, Diagnostics(degenerate=True, note=note, **diag))


@dataclass(frozen=True)
class CiQuery:
    x: str
    y: str
    z: tuple[str, ...] = ()

    def __post_init__(self):
        z = tuple(self.z)
        object.__setattr__(self, "z", z)
        if self.x == self.y:
            raise ValueError("x and y must differ")
        if self.x in z or self.y in z:
            raise ValueError("x and y may not appear in the conditioning set")
        if len(set(z)) != len(z):
            raise ValueError("duplicate conditioning variables")

    def swapped(self) -> "CiQuery":
        return CiQuery(self.y, self.x, self.z)


# ---------------------------------------------------------------------------
# statistics


def q1(rx: ResidualBlock | np.ndarray, ry: ResidualBlock | np.ndarray) -> tuple[float, int]:
    """Squared generalized covariance measure of two residual vectors.

    Returns ``(0.0, 0)`` when the products have (numerically) zero variance.
    """
    rx = getattr(rx, "values", rx)
    ry = getattr(ry, "values", ry)
    w = np.asarray(rx, dtype=float) * np.asarray(ry, dtype=float)
    n = w.size
    if n < 2:
        raise ValueError("need at least 2 rows")
    m = w.mean()
    var = np.mean((w - m) ** 2)
    if var < VAR_EPS:
        return 0.0, 0
    return float(n * m * m / var), 1


def _quadratic(v: np.ndarray) -> tuple[float, int]:
    if not np.any(v):
        return 0.0, 0
    return pinv_quadratic_form(v)


def q2(rx: ResidualBlock | np.ndarray, ry: ResidualBlock | np.ndarray) -> tuple[float, int]:
    """Hotelling-type statistic for indicator residuals ``rx`` (n x (k-1))
    against an ordinal residual vector ``ry``. df is the rank of the
    product covariance."""
    rx = np.asarray(getattr(rx, "values", rx), dtype=float)
    ry = np.asarray(getattr(ry, "values", ry), dtype=float)
    if rx.ndim == 1:
        rx = rx[:, None]
    return _quadratic(rx * ry[:, None])


def q3(rx: ResidualBlock | np.ndarray, ry: ResidualBlock | np.ndarray) -> tuple[float, int]:
    """Hotelling-type statistic over all pairwise indicator products,
    ordered y-major: ``(x1*y1, ..., x_{k-1}*y1, x1*y2, ...)``."""
    rx = np.asarray(getattr(rx, "values", rx), dtype=float)
    ry = np.asarray(getattr(ry, "values", ry), dtype=float)
    if rx.ndim == 1:
        rx = rx[:, None]
    if ry.ndim == 1:
        ry = ry[:, None]
    v = (ry[:, :, None] * rx[:, None, :]).reshape(rx.shape[0], -1)
    return _quadratic(v)


# ---------------------------------------------------------------------------
# dispatcher


def resolve_estimator(estimator, meta) -> EstimatorKind:
    """Map a requested estimator to the concrete kind for one target.

    ``"glm"`` or any GLM kind picks multinomial for categorical targets,
    binomial for binary and proportional odds for ordinal ones.
    """
    if estimator in ("glm", "rft", "forest"):
        estimator = {"glm": EstimatorKind.BINOMIAL_LOGISTIC,
                     "rft": EstimatorKind.PROBABILITY_FOREST,
                     "forest": EstimatorKind.PROBABILITY_FOREST}[estimator]
    kind = EstimatorKind(estimator)
    if not kind.is_glm:
        return kind
    if meta.is_categorical:
        return EstimatorKind.MULTINOMIAL_LOGISTIC
    if meta.n_levels == 2:
        return EstimatorKind.BINOMIAL_LOGISTIC
    return EstimatorKind.PROPORTIONAL_ODDS


def derive_seed(*parts) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


def _canonical(ds: Dataset, q: CiQuery) -> CiQuery:
    x, y = sorted((q.x, q.y))
    z = tuple(sorted(q.z, key=ds.index))
    return CiQuery(x, y, z)


def _residuals(ds, target, z, estimator, forest_params, seed, smoothing):
    meta = ds.meta(target)
    kind = resolve_estimator(estimator, meta)
    params = None
    if kind is EstimatorKind.PROBABILITY_FOREST:
        params = replace(forest_params or ForestParams(), seed=seed)
    model = fit(kind, ds, target, z, params=params, smoothing=smoothing)
    probas = predict_proba(model, ds, z)
    codes = ds.column(target)
    if meta.is_categorical:
        return indicator_residuals(probas, codes), kind
    return ls_residuals(probas, codes), kind


def ci_test(ds: Dataset, q: CiQuery, estimator="glm", forest_params: ForestParams | None = None,
            seed: int = 0, smoothing: float = 0.5) -> TestResult:
    """Residual-based test of ``x _||_ y | z``.

    Both ordinal/binary gives Q1, one categorical gives Q2 and two
    categorical variables give Q3. The result does not depend on the order
    of ``x`` and ``y``.
    """
    q = _canonical(ds, q)
    mx, my = ds.meta(q.x), ds.meta(q.y)
    if mx.is_categorical and my.is_categorical:
        family = Family.Q3
    elif mx.is_categorical or my.is_categorical:
        family = Family.Q2
    else:
        family = Family.Q1
    est_name = getattr(estimator, "value", str(estimator))
    if ds.n < MIN_ROWS:
        return TestResult.degenerate(family, f"n={ds.n} below minimum", estimator=est_name, n_used=ds.n)
    for name in (q.x, q.y):
        if np.unique(ds.column(name)).size < 2:
            return TestResult.degenerate(family, f"{name} is constant", estimator=est_name, n_used=ds.n)

    pair_seed = (tuple(sorted((q.x, q.y))), tuple(sorted(q.z)), int(seed))
    rx, kx = _residuals(ds, q.x, q.z, estimator, forest_params, derive_seed(*pair_seed, q.x), smoothing)
    ry, ky = _residuals(ds, q.y, q.z, estimator, forest_params, derive_seed(*pair_seed, q.y), smoothing)

    if family is Family.Q1:
        stat, df = q1(rx, ry)
    elif family is Family.Q2:
        ind, ordv = (rx, ry) if mx.is_categorical else (ry, rx)
        stat, df = q2(ind, ordv)
    else:
        stat, df = q3(rx, ry)
    if df == 0:
        return TestResult.degenerate(family, "zero-variance residual products",
                                     estimator=est_name, n_used=ds.n)
    return TestResult(stat, df, chi_square_sf(stat, df), family,
                      Diagnostics(sigma_rank=df, estimator=est_name, n_used=ds.n))


# ---------------------------------------------------------------------------
# stratified G^2 baselines


def _strata(ds: Dataset, z: Sequence[str]) -> np.ndarray:
    if not z:
        return np.zeros(ds.n, dtype=np.int64)
    keys = ds.rows[:, [ds.index(c) for c in z]]
    return np.unique(keys, axis=0, return_inverse=True)[1].ravel()


def _xlogx(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    pos = a > 0
    out[pos] = a[pos] * np.log(a[pos])
    return out


def _g2_from_counts(O: np.ndarray) -> np.ndarray:
    """G^2 summed over strata; ``O`` has shape ``(..., S, kx, ky)``."""
    Ox = O.sum(axis=-1)
    Oy = O.sum(axis=-2)
    Ns = Ox.sum(axis=-1)
    total = (_xlogx(O).sum(axis=(-1, -2)) - _xlogx(Ox).sum(axis=-1)
             - _xlogx(Oy).sum(axis=-1) + _xlogx(Ns))
    return 2.0 * total.sum(axis=-1)


def _g2_parts(ds: Dataset, q: CiQuery):
    s = _strata(ds, q.z)
    S = int(s.max()) + 1 if s.size else 1
    kx, ky = ds.meta(q.x).n_levels, ds.meta(q.y).n_levels
    x, y = ds.column(q.x), ds.column(q.y)
    O = np.bincount((s * kx + x) * ky + y, minlength=S * kx * ky).reshape(S, kx, ky).astype(float)
    return s, S, kx, ky, x, y, O


def g2_df(O: np.ndarray, rule: str = "classic") -> int:
    """Degrees of freedom for stratified counts ``O`` of shape (S, kx, ky).

    ``classic``: ``(kx - 1)(ky - 1)`` times the number of non-empty strata,
    with kx, ky the levels observed anywhere in the sample. ``adjusted``:
    sum over strata of ``(k_s - 1)(r_s - 1)`` using per-stratum levels.
    """
    present = O.sum(axis=(1, 2)) > 0
    if rule == "classic":
        kx = int((O.sum(axis=(0, 2)) > 0).sum())
        ky = int((O.sum(axis=(0, 1)) > 0).sum())
        return (kx - 1) * (ky - 1) * int(present.sum())
    if rule == "adjusted":
        kx_s = (O.sum(axis=2) > 0).sum(axis=1)
        ky_s = (O.sum(axis=1) > 0).sum(axis=1)
        return int(np.sum(np.clip(kx_s - 1, 0, None) * np.clip(ky_s - 1, 0, None)))
    raise ValueError(f"unknown df rule {rule!r}")


def g2_test(ds: Dataset, q: CiQuery, df_rule: str = "classic") -> TestResult:
    """Stratified likelihood-ratio (mutual information) test, ``G2 = 2 n MI``
    summed over the strata of ``z``; see :func:`g2_df` for the df rules."""
    q = _canonical(ds, q)
    *_, O = _g2_parts(ds, q)
    stat = max(float(_g2_from_counts(O)), 0.0)
    df = g2_df(O, df_rule)
    if df == 0:
        return TestResult.degenerate(Family.G2, "no variation in x or y within strata",
                                     n_used=ds.n)
    return TestResult(stat, df, chi_square_sf(stat, df), Family.G2,
                      Diagnostics(sigma_rank=0, n_used=ds.n))


def g2_montecarlo_test(ds: Dataset, q: CiQuery, B: int = 999, seed: int = 0) -> TestResult:
    """Permutation version of :func:`g2_test`: x is shuffled within each
    stratum ``B`` times and ``p = (1 + #{G2_perm >= G2_obs}) / (B + 1)``."""
    if B < 100:
        raise ValueError("B must be >= 100")
    q = _canonical(ds, q)
    s, S, kx, ky, x, y, O = _g2_parts(ds, q)
    observed = max(float(_g2_from_counts(O)), 0.0)
    rng = np.random.default_rng(seed)
    grouped = np.argsort(s, kind="stable")
    cells = S * kx * ky
    chunk = max(1, min(B, 20_000_000 // max(cells, 1)))
    exceed = 0
    done = 0
    tol = 1e-9 * max(1.0, observed)
    while done < B:
        b = min(chunk, B - done)
        shuffled = np.argsort(s[None, :] + rng.random((b, ds.n)), axis=1, kind="stable")
        xp = np.empty((b, ds.n), dtype=np.int64)
        xp[:, grouped] = x[shuffled]
        flat = (np.arange(b)[:, None] * cells + (s[None, :] * kx + xp) * ky + y[None, :]).ravel()
        counts = np.bincount(flat, minlength=b * cells).reshape(b, S, kx, ky).astype(float)
        exceed += int(np.sum(_g2_from_counts(counts) >= observed - tol))
        done += b
    p = (1 + exceed) / (B + 1)
    return TestResult(observed, 0, float(p), Family.G2_MONTECARLO, Diagnostics(n_used=ds.n))


# ---------------------------------------------------------------------------
# tester factory used by PC and the benchmark harness

Tester = Callable[[Dataset, CiQuery], TestResult]


def make_tester(test: str = "q", estimator="glm", seed: int = 0, B: int = 999,
                forest_params: ForestParams | None = None) -> Tester:
    """Return ``f(ds, query) -> TestResult``; estimator failures become
    degenerate results instead of exceptions."""
    test = test.lower()
    if test not in ("q", "g2", "g2mc"):
        raise ValueError(f"unknown test {test!r}")

    def run(ds: Dataset, query: CiQuery) -> TestResult:
        if test == "g2":
            return g2_test(ds, query)
        if test == "g2mc":
            c = _canonical(ds, query)
            return g2_montecarlo_test(ds, query, B=B, seed=derive_seed(c.x, c.y, c.z, int(seed)))
        try:
            return ci_test(ds, query, estimator=estimator, forest_params=forest_params, seed=seed)
        except (EstimationError, ConvergenceError, np.linalg.LinAlgError) as exc:
            logger.debug("degenerate test %s: %s", query, exc)
            return TestResult.degenerate(Family.Q1, f"estimation failed: {exc}",
                                         estimator=str(estimator), n_used=ds.n)

    run.test, run.estimator = test, estimator
    return run
