"""Benchmark experiments emitting one flat CSV schema.

Every experiment is split into independent work units (one dataset or
replicate each) that may run in a process pool. Units carry their own
derived seeds and results are gathered in submission order, so the output
does not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import data as tab
from .citests import CiQuery, Tester, derive_seed, make_tester
from .graphs import (Dag, marginally_connected, random_ci_queries, random_dag, implied_cis,
                     read_graph, skeleton_f1)
from .pc import PcConfig, oracle_tester, pc
from .simulate import (simulate_binary_dag, simulate_calibration_null,
                       simulate_discrimination_binary, simulate_discrimination_ordinal)

logger = logging.getLogger(__name__)

EXPERIMENTS = ("calibration", "discrimination", "modeltest", "structure", "adult", "runtime")
HEADER = ["experiment", "test", "estimator", "n", "k", "beta", "p_edge", "alpha",
          "metric", "value", "se", "replicates"]
DEFAULT_ALPHAS = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)
BETA_GRID = (0.0, 0.05, 0.1, 0.15, 0.25, 0.5, 1.0, 2.0, 3.0)

AGE_CUTS = (20, 30, 40, 50, 60, 70)
AGE_LABELS = ("<21", "21-30", "31-40", "41-50", "51-60", "61-70", ">70")
HOURS_CUTS = (20, 30, 40)
HOURS_LABELS = ("<=20", "21-30", "31-40", ">40")


@dataclass(frozen=True)
class TestSpec:
    """A test kind plus estimator, written ``q:glm``, ``q:forest``, ``g2``,
    ``g2mc`` or ``oracle`` on the command line."""

    test: str
    estimator: str = ""

    __test__ = False

    @classmethod
    def parse(cls, text: str) -> "TestSpec":
        test, _, est = text.partition(":")
        test = test.lower()
        if test not in ("q", "g2", "g2mc", "oracle"):
            raise ValueError(f"unknown test {text!r}")
        if test == "q" and not est:
            est = "glm"
        return cls(test, est if test == "q" else "")

    def __str__(self):
        return f"{self.test}:{self.estimator}" if self.estimator else self.test

    def tester(self, seed: int = 0, B: int = 999, dag: Dag | None = None) -> Tester:
        if self.test == "oracle":
            if dag is None:
                raise ValueError("the oracle test needs the generating DAG")
            return oracle_tester(dag)
        return make_tester(self.test, self.estimator or "glm", seed=seed, B=B)


@dataclass
class ExperimentConfig:
    experiment: str
    tests: list[TestSpec] = field(default_factory=lambda: [TestSpec("q", "glm"), TestSpec("g2")])
    n: list[int] = field(default_factory=list)
    k: list[int] = field(default_factory=list)
    beta: list[float] = field(default_factory=list)
    p_edge: list[float] = field(default_factory=list)
    alpha: list[float] = field(default_factory=list)
    replicates: int = 10
    seed: int = 0
    jobs: int = 1
    n_vars: int = 20
    B: int = 999
    protocol: str = "binary"
    variant: str = "formula"
    max_cond_size: int | None = None
    data: str | None = None
    schema: str | None = None
    truth: str | None = None
    tests_per_point: int = 100

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        self.tests = [t if isinstance(t, TestSpec) else TestSpec.parse(t) for t in self.tests]
        defaults = _DEFAULT_GRIDS[self.experiment]
        for key, value in defaults.items():
            if not getattr(self, key):
                setattr(self, key, list(value))


_DEFAULT_GRIDS = {
    "calibration": dict(n=[20, 40, 80], k=[1, 3, 5], alpha=DEFAULT_ALPHAS),
    "discrimination": dict(n=[1000], k=[1, 3, 5], beta=BETA_GRID, alpha=[0.05]),
    "modeltest": dict(n=[1000], beta=[0.15], p_edge=[0.1, 0.2, 0.3, 0.5, 0.7, 0.9], alpha=[0.05]),
    "structure": dict(n=[1000], beta=[0.15], p_edge=[0.1, 0.2, 0.3, 0.5], alpha=[0.05]),
    "adult": dict(n=[100, 250, 500, 1000, 2000], alpha=[0.05]),
    "runtime": dict(n=[1000], k=list(range(1, 11)), beta=[0.5]),
}


@dataclass(frozen=True)
class MetricRow:
    experiment: str
    test: str
    estimator: str
    metric: str
    value: float
    se: float | None
    replicates: int
    n: int | None = None
    k: int | None = None
    beta: float | None = None
    p_edge: float | None = None
    alpha: float | None = None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def rows_to_csv(rows: Iterable[MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([_fmt(getattr(r, h)) for h in HEADER])
    return buf.getvalue()


def mean_se(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error (replicate sample sd / sqrt(R))."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def rejection_rates(pvalues: Sequence[float], alphas: Sequence[float]) -> list[tuple[float, float, float]]:
    """``(alpha, rate, se)`` with rejection meaning ``p <= alpha``."""
    p = np.asarray(pvalues, dtype=float)
    out = []
    for a in alphas:
        rate, se = mean_se((p <= a).astype(float))
        out.append((float(a), rate, se))
    return out


def _pool_map(fn: Callable, units: list, jobs: int) -> list:
    if jobs <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, units, chunksize=max(1, len(units) // (4 * jobs))))


def _base(cfg, spec: TestSpec, **coords) -> dict:
    return dict(experiment=cfg.experiment, test=spec.test, estimator=spec.estimator, **coords)


# ---------------------------------------------------------------------------
# calibration


def _calibration_unit(args):
    cfg, n, k, r = args
    seed = derive_seed("calibration", cfg.seed, n, k, r)
    ds = simulate_calibration_null(k, n, seed, variant=cfg.variant)
    q = CiQuery("x", "y", tuple(f"z{i}" for i in range(1, k + 1)))
    out = []
    for spec in cfg.tests:
        res = spec.tester(seed=seed, B=cfg.B)(ds, q)
        out.append((res.p_value, res.diagnostics.degenerate))
    return out


def run_calibration(cfg: ExperimentConfig) -> list[MetricRow]:
    """Rejection rate at each alpha on null data, per (n, k, test)."""
    units = [(cfg, n, k, r) for n in cfg.n for k in cfg.k for r in range(cfg.replicates)]
    results = _pool_map(_calibration_unit, units, cfg.jobs)
    rows = []
    R = cfg.replicates
    for c, (n, k) in enumerate((n, k) for n in cfg.n for k in cfg.k):
        cell = results[c * R:(c + 1) * R]
        for t, spec in enumerate(cfg.tests):
            ps = [u[t][0] for u in cell]
            for alpha, rate, se in rejection_rates(ps, cfg.alpha):
                rows.append(MetricRow(**_base(cfg, spec, n=n, k=k, alpha=alpha),
                                      metric="type1_error", value=rate, se=se, replicates=R))
            rows.append(MetricRow(**_base(cfg, spec, n=n, k=k), metric="degenerate",
                                  value=sum(u[t][1] for u in cell), se=None, replicates=R))
    return rows


# ---------------------------------------------------------------------------
# discrimination


def _discrimination_unit(args):
    cfg, n, k, beta, dependent, r = args
    seed = derive_seed("discrimination", cfg.protocol, cfg.seed, n, k, beta, dependent, r)
    if cfg.protocol == "ordinal":
        ds = simulate_discrimination_ordinal(k, n, dependent, seed)
    else:
        ds = simulate_discrimination_binary(k, beta, n, dependent, seed)
    q = CiQuery("x", "y", tuple(f"z{i}" for i in range(1, k + 1)))
    return [spec.tester(seed=seed, B=cfg.B)(ds, q) for spec in cfg.tests]


def run_discrimination(cfg: ExperimentConfig) -> list[MetricRow]:
    """Accuracy of classifying ``replicates`` dependent plus ``replicates``
    independent datasets at each alpha."""
    betas = cfg.beta if cfg.protocol == "binary" else [None]
    cells = [(n, k, b) for n in cfg.n for k in cfg.k for b in betas]
    units = [(cfg, n, k, b, dep, r) for n, k, b in cells for dep in (False, True)
             for r in range(cfg.replicates)]
    results = _pool_map(_discrimination_unit, units, cfg.jobs)
    size = 2 * cfg.replicates
    rows = []
    for c, (n, k, b) in enumerate(cells):
        block = results[c * size:(c + 1) * size]
        truth = np.array([False] * cfg.replicates + [True] * cfg.replicates)
        for t, spec in enumerate(cfg.tests):
            ps = np.array([u[t].p_value for u in block])
            for alpha in cfg.alpha:
                acc, se = mean_se(((ps <= alpha) == truth).astype(float))
                rows.append(MetricRow(**_base(cfg, spec, n=n, k=k, beta=b, alpha=alpha),
                                      metric="accuracy", value=acc, se=se, replicates=size))
            rows.append(MetricRow(**_base(cfg, spec, n=n, k=k, beta=b), metric="degenerate",
                                  value=sum(u[t].diagnostics.degenerate for u in block), se=None,
                                  replicates=size))
    return rows


# ---------------------------------------------------------------------------
# model testing


def precision_recall(predicted: Sequence[bool], truth: Sequence[bool]) -> tuple[float, float]:
    """Positive class = independence. Empty predicted/true positive sets
    give precision/recall 1."""
    predicted = np.asarray(predicted, bool)
    truth = np.asarray(truth, bool)
    tp = int(np.sum(predicted & truth))
    precision = tp / predicted.sum() if predicted.any() else 1.0
    recall = tp / truth.sum() if truth.any() else 1.0
    return float(precision), float(recall)


def _modeltest_unit(args):
    cfg, p_edge, r = args
    seed = derive_seed("modeltest", cfg.seed, cfg.n_vars, p_edge, r)
    g = random_dag(cfg.n_vars, p_edge, seed)
    ds = simulate_binary_dag(g, cfg.beta[0], cfg.n[0], seed)
    claims = implied_cis(g)
    if claims:
        claims += random_ci_queries(g, len(claims), cfg.n_vars - 2, seed + 1)
    names = ds.names
    out = []
    for spec in cfg.tests:
        tester = spec.tester(seed=seed, B=cfg.B, dag=g)
        ps = [tester(ds, CiQuery(names[c.x], names[c.y], tuple(names[v] for v in c.z))).p_value
              for c in claims]
        per_alpha = []
        for alpha in cfg.alpha:
            per_alpha.append(precision_recall([p > alpha for p in ps], [c.holds for c in claims]))
        out.append(per_alpha)
    return out, len(claims)


def run_modeltest(cfg: ExperimentConfig) -> list[MetricRow]:
    """Precision/recall of declaring implied and random CI claims
    independent, on random logistic DAGs."""
    units = [(cfg, pe, r) for pe in cfg.p_edge for r in range(cfg.replicates)]
    results = _pool_map(_modeltest_unit, units, cfg.jobs)
    R = cfg.replicates
    rows = []
    for c, pe in enumerate(cfg.p_edge):
        block = results[c * R:(c + 1) * R]
        for t, spec in enumerate(cfg.tests):
            for a, alpha in enumerate(cfg.alpha):
                for m, metric in enumerate(("precision", "recall")):
                    value, se = mean_se([u[0][t][a][m] for u in block])
                    rows.append(MetricRow(**_base(cfg, spec, n=cfg.n[0], k=cfg.n_vars, beta=cfg.beta[0],
                                                  p_edge=pe, alpha=alpha),
                                          metric=metric, value=value, se=se, replicates=R))
        rows.append(MetricRow(experiment=cfg.experiment, test="", estimator="", n=cfg.n[0], k=cfg.n_vars,
                              p_edge=pe, metric="claims", value=float(np.mean([u[1] for u in block])),
                              se=None, replicates=R))
    return rows


# ---------------------------------------------------------------------------
# structure learning


def _structure_unit(args):
    cfg, n, p_edge, r = args
    if cfg.data:
        seed = derive_seed("structure-file", cfg.seed, n, r)
        full = tab.load_csv(cfg.data, cfg.schema)
        truth_graph = read_graph(cfg.truth, names=full.names)
        ds = tab.subsample(full, min(n, full.n), seed)
        g = truth_graph if isinstance(truth_graph, Dag) else None
    else:
        seed = derive_seed("structure", cfg.seed, cfg.n_vars, n, p_edge, r)
        g = random_dag(cfg.n_vars, p_edge, seed)
        truth_graph = g
        ds = simulate_binary_dag(g, cfg.beta[0], n, seed)
    truth = {frozenset(ds.names[v] for v in e) for e in truth_graph.skeleton()}
    out = []
    for spec in cfg.tests:
        tester = spec.tester(seed=seed, B=cfg.B, dag=g)
        prf = []
        for alpha in cfg.alpha:
            _, skel = pc(ds, PcConfig(alpha=alpha, max_cond_size=cfg.max_cond_size), tester)
            prf.append(skeleton_f1(skel.edges, truth) + (len(skel.edges),))
        out.append(prf)
    return out


def run_structure(cfg: ExperimentConfig) -> list[MetricRow]:
    """Skeleton precision/recall/F1 of PC-stable with each test, either on
    random logistic DAGs or on a user-supplied dataset and true graph."""
    if cfg.data and not (cfg.schema and cfg.truth):
        raise ValueError("file-based structure runs need --schema and --truth")
    grid = [None] if cfg.data else cfg.p_edge
    cells = [(n, pe) for n in cfg.n for pe in grid]
    units = [(cfg, n, pe, r) for n, pe in cells for r in range(cfg.replicates)]
    results = _pool_map(_structure_unit, units, cfg.jobs)
    R = cfg.replicates
    rows = []
    for c, (n, pe) in enumerate(cells):
        block = results[c * R:(c + 1) * R]
        for t, spec in enumerate(cfg.tests):
            for a, alpha in enumerate(cfg.alpha):
                for m, metric in enumerate(("precision", "recall", "f1", "edges")):
                    value, se = mean_se([u[t][a][m] for u in block])
                    rows.append(MetricRow(**_base(cfg, spec, n=n, k=None if cfg.data else cfg.n_vars,
                                                  beta=None if cfg.data else cfg.beta[0],
                                                  p_edge=pe, alpha=alpha),
                                          metric=metric, value=value, se=se, replicates=R))
    return rows


# ---------------------------------------------------------------------------
# adult income


def prepare_adult(path, schema) -> tab.Dataset:
    """Load the adult data and bin Age and HoursPerWeek into ordinal groups."""
    ds = tab.load_csv(path, schema)
    for col, cuts, labels in ((_adult_col(ds, "age"), AGE_CUTS, AGE_LABELS),
                              (_adult_col(ds, "hours"), HOURS_CUTS, HOURS_LABELS)):
        if col is not None and ds.meta(col).levels != labels:
            ds = tab.discretize(ds, col, cuts, labels)
    return ds


def _adult_col(ds, stem):
    for name in ds.names:
        if name.lower().replace("-", "").replace("_", "").startswith(stem):
            return name
    return None


def dependence_truth(ds: tab.Dataset, threshold: float = 0.05) -> set[frozenset]:
    """Pairs whose chi-square RMSEA exceeds ``threshold``."""
    dependent = set()
    names = ds.names
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            stat, df, _ = tab.chi_square_independence(tab.contingency(ds, names[i], names[j]))
            if df >= 1 and tab.rmsea(stat, df, ds.n) > threshold:
                dependent.add(frozenset((names[i], names[j])))
    return dependent


def _adult_unit(args):
    cfg, full, truth, n, r = args
    seed = derive_seed("adult", cfg.seed, n, r)
    ds = tab.subsample(full, min(n, full.n), seed)
    out = []
    for spec in cfg.tests:
        tester = spec.tester(seed=seed, B=cfg.B)
        prf = []
        for alpha in cfg.alpha:
            cpdag, skel = pc(ds, PcConfig(alpha=alpha, max_cond_size=cfg.max_cond_size), tester)
            connected = {frozenset(ds.names[v] for v in e) for e in marginally_connected(cpdag)}
            prf.append(skeleton_f1(connected, truth) + (len(skel.edges),))
        out.append(prf)
    return out


def run_adult(cfg: ExperimentConfig) -> list[MetricRow]:
    """F1 of marginal d-connection in the learned CPDAG against RMSEA-based
    pairwise dependence, per subsample size."""
    if not cfg.data or not Path(cfg.data).exists():
        raise FileNotFoundError(f"adult data file not found: {cfg.data}")
    full = prepare_adult(cfg.data, cfg.schema or default_adult_schema())
    truth = dependence_truth(full)
    units = [(cfg, full, truth, n, r) for n in cfg.n for r in range(cfg.replicates)]
    results = _pool_map(_adult_unit, units, cfg.jobs)
    R = cfg.replicates
    rows = []
    for c, n in enumerate(cfg.n):
        block = results[c * R:(c + 1) * R]
        for t, spec in enumerate(cfg.tests):
            for a, alpha in enumerate(cfg.alpha):
                for m, metric in enumerate(("precision", "recall", "f1", "edges")):
                    value, se = mean_se([u[t][a][m] for u in block])
                    rows.append(MetricRow(**_base(cfg, spec, n=n, alpha=alpha),
                                          metric=metric, value=value, se=se, replicates=R))
    return rows


def default_adult_schema() -> str:
    return str(Path(__file__).with_name("adult_schema.json"))


# ---------------------------------------------------------------------------
# runtime


def run_runtime(cfg: ExperimentConfig) -> list[MetricRow]:
    """Mean wall time of ``tests_per_point`` CI tests per (test, k). Timing
    values are not reproducible; everything else in the rows is."""
    rows = []
    n = cfg.n[0]
    beta = cfg.beta[0]
    for spec in cfg.tests:
        for k in cfg.k:
            times = []
            for r in range(cfg.tests_per_point):
                seed = derive_seed("runtime", cfg.seed, k, r)
                ds = simulate_discrimination_binary(k, beta, n, bool(r % 2), seed)
                q = CiQuery("x", "y", tuple(f"z{i}" for i in range(1, k + 1)))
                tester = spec.tester(seed=seed, B=cfg.B)
                t0 = time.perf_counter()
                tester(ds, q)
                times.append(time.perf_counter() - t0)
            value, se = mean_se(times)
            rows.append(MetricRow(**_base(cfg, spec, n=n, k=k, beta=beta), metric="seconds",
                                  value=value, se=se, replicates=cfg.tests_per_point))
    return rows


RUNNERS = {
    "calibration": run_calibration,
    "discrimination": run_discrimination,
    "modeltest": run_modeltest,
    "structure": run_structure,
    "adult": run_adult,
    "runtime": run_runtime,
}


def run(cfg: ExperimentConfig, out=None) -> str:
    text = rows_to_csv(RUNNERS[cfg.experiment](cfg))
    if out:
        Path(out).write_text(text, encoding="utf-8")
    return text
