"""Seeded synthetic data generators for calibration, discrimination, model
testing and structure learning experiments.

Every column draws from its own PCG64 stream keyed by ``(seed, column
index)`` (``SeedSequence(seed, spawn_key=(col,))``), so adding columns never
changes the earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset, VariableMeta
from .graphs import Dag


def column_rng(seed: int, col: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(col),)))


def _meta(name: str, levels: int, kind: str | None = None) -> VariableMeta:
    kind = kind or ("binary" if levels == 2 else "ordinal")
    return VariableMeta(name, kind, tuple(str(i) for i in range(levels)))


def _z_names(k: int) -> list[str]:
    return [f"z{i}" for i in range(1, k + 1)]


def simulate_calibration_null(k: int, n: int, seed: int, variant: str = "formula",
                              x_levels: int = 3, y_levels: int = 3,
                              x_kind: str | None = None, y_kind: str | None = None) -> Dataset:
    """Null data ``X _||_ Y | Z``: binary uniform ``z1..zk``; x and y depend on z1 only.

    ``variant="formula"`` draws x, y ~ Binomial(2, z1/3) (three levels; z1=0
    forces x=y=0). ``variant="shifted"`` draws x ~ Binomial(x_levels-1,
    (z1+1)/3), which gives a strictly binary variable for ``x_levels=2`` and
    keeps every level reachable in both strata.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    z = np.column_stack([column_rng(seed, 2 + j).integers(0, 2, n) for j in range(k)])
    z1 = z[:, 0]
    if variant == "formula":
        x = column_rng(seed, 0).binomial(2, z1 / 3.0)
        y = column_rng(seed, 1).binomial(2, z1 / 3.0)
        x_levels = y_levels = 3
    elif variant == "shifted":
        x = column_rng(seed, 0).binomial(x_levels - 1, (z1 + 1) / 3.0)
        y = column_rng(seed, 1).binomial(y_levels - 1, (z1 + 1) / 3.0)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    metas = [_meta("x", x_levels, x_kind), _meta("y", y_levels, y_kind)]
    metas += [_meta(name, 2) for name in _z_names(k)]
    return Dataset(tuple(metas), np.column_stack([x, y, z]))


def simulate_binary_dag(g: Dag, beta: float, n: int, seed: int, names=None) -> Dataset:
    """Logistic Bernoulli network: roots ~ Bernoulli(0.5), other nodes
    ~ Bernoulli(expit(beta * sum of parent values))."""
    names = names or [f"V{j}" for j in range(g.n_vars)]
    cols = np.zeros((n, g.n_vars), dtype=np.int64)
    for v in g.topo_order:
        parents = sorted(g.parents(v))
        prob = expit(beta * cols[:, parents].sum(axis=1)) if parents else np.full(n, 0.5)
        cols[:, v] = column_rng(seed, v).random(n) < prob
    return Dataset(tuple(_meta(name, 2) for name in names), cols)


def discrimination_dag(k: int, dependent: bool) -> Dag:
    # columns: x=0, y=1, z1=2, ..., zk=k+1
    edges = {(2, 0), (2, 1)}
    if dependent:
        edges.add((0, 1))
    return Dag(k + 2, frozenset(edges))


def simulate_discrimination_binary(k: int, beta: float, n: int, dependent: bool, seed: int) -> Dataset:
    """z1 -> x, z1 -> y (and x -> y when dependent); z2..zk are nuisance."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return simulate_binary_dag(discrimination_dag(k, dependent), beta, n, seed,
                               names=["x", "y", *_z_names(k)])


def simulate_discrimination_ordinal(k: int, n: int, dependent: bool, seed: int) -> Dataset:
    """Nine-level ordinal data: z ~ Binomial(8, 0.5), x, y ~ Binomial(8, z1/9).

    For the dependent case the recorded z1 column is shuffled after x and y
    were drawn, so it no longer explains their association.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    z = np.column_stack([column_rng(seed, 2 + j).binomial(8, 0.5, n) for j in range(k)])
    z1 = z[:, 0]
    x = column_rng(seed, 0).binomial(8, z1 / 9.0)
    y = column_rng(seed, 1).binomial(8, z1 / 9.0)
    if dependent:
        z[:, 0] = column_rng(seed, k + 2).permutation(z1)
    metas = [_meta("x", 9), _meta("y", 9)] + [_meta(name, 9) for name in _z_names(k)]
    return Dataset(tuple(metas), np.column_stack([x, y, z]))


@dataclass(frozen=True)
class SimSpec:
    protocol: str
    n: int
    k: int = 1
    beta: float = 0.0
    p_edge: float = 0.0
    dependent: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.protocol not in ("calibration_null", "binary_discrimination",
                                 "ordinal_discrimination", "dag_logistic"):
            raise ValueError(f"unknown protocol {self.protocol!r}")


def simulate(spec: SimSpec) -> Dataset:
    """Dispatch a :class:`SimSpec`; for ``dag_logistic`` ``k`` is the DAG size."""
    from .graphs import random_dag

    if spec.protocol == "calibration_null":
        return simulate_calibration_null(spec.k, spec.n, spec.seed)
    if spec.protocol == "binary_discrimination":
        return simulate_discrimination_binary(spec.k, spec.beta, spec.n, spec.dependent, spec.seed)
    if spec.protocol == "ordinal_discrimination":
        return simulate_discrimination_ordinal(spec.k, spec.n, spec.dependent, spec.seed)
    g = random_dag(spec.k, spec.p_edge, spec.seed)
    return simulate_binary_dag(g, spec.beta, spec.n, spec.seed)
