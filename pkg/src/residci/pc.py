"""Order-independent ("stable") PC: skeleton search, v-structures, Meek rules."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .citests import CiQuery, TestResult, Tester, make_tester
from .data import Dataset
from .graphs import Cpdag, Dag, apply_meek_rules, d_separated


@dataclass(frozen=True)
class PcConfig:
    alpha: float = 0.05
    max_cond_size: int | None = None
    test: str | Callable = "q"
    estimator: str = "glm"
    seed: int = 0
    B: int = 999

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def tester(self) -> Tester:
        if callable(self.test):
            return self.test
        return make_tester(self.test, self.estimator, seed=self.seed, B=self.B)


@dataclass(frozen=True)
class LogEntry:
    level: int
    x: str
    y: str
    z: tuple[str, ...]
    result: TestResult


@dataclass
class SkeletonResult:
    names: list[str]
    edges: set[frozenset]
    sepsets: dict[frozenset, frozenset]
    log: list[LogEntry] = field(default_factory=list)

    def __iter__(self):  # allows ``edges, sepsets, log = learn_skeleton(...)``
        return iter((self.edges, self.sepsets, self.log))


def oracle_tester(g: Dag, names=None) -> Tester:
    """A "test" that returns p = 1 exactly when the DAG d-separates x and y."""
    def run(ds: Dataset, q: CiQuery) -> TestResult:
        index = ds.index if ds is not None else (lambda s: names.index(s))
        sep = d_separated(g, index(q.x), index(q.y), [index(v) for v in q.z])
        return TestResult(0.0, 1, 1.0 if sep else 0.0, "oracle")
    return run


def learn_skeleton(ds: Dataset, cfg: PcConfig, tester: Tester | None = None) -> SkeletonResult:
    """Level-wise PC-stable adjacency search.

    Adjacency sets are frozen at the start of each level, so the fate of
    every edge within a level depends only on those frozen sets and the
    result does not depend on variable order. For each edge, subsets of
    ``adj(x) - {y}`` and then ``adj(y) - {x}`` are tried in lexicographic
    order; the first one with ``p > alpha`` removes the edge.
    """
    tester = tester or cfg.tester()
    names = ds.names
    p = len(names)
    if p < 2:
        raise ValueError("need at least 2 variables")
    adj = [set(range(p)) - {v} for v in range(p)]
    sepsets: dict[frozenset, frozenset] = {}
    log: list[LogEntry] = []
    level = 0
    while cfg.max_cond_size is None or level <= cfg.max_cond_size:
        frozen = [sorted(a) for a in adj]
        if all(len(a) - 1 < level for a in frozen):
            break
        removals = []
        for x, y in combinations(range(p), 2):
            if y not in adj[x]:
                continue
            tried = set()
            found = None
            for a, b in ((x, y), (y, x)):
                candidates = [v for v in frozen[a] if v != b]
                for S in combinations(candidates, level):
                    if S in tried:
                        continue
                    tried.add(S)
                    q = CiQuery(names[x], names[y], tuple(names[v] for v in S))
                    res = tester(ds, q)
                    log.append(LogEntry(level, q.x, q.y, q.z, res))
                    if res.p_value > cfg.alpha:
                        found = S
                        break
                if found is not None:
                    break
            if found is not None:
                removals.append((x, y, found))
        for x, y, S in removals:
            adj[x].discard(y)
            adj[y].discard(x)
            sepsets[frozenset((names[x], names[y]))] = frozenset(names[v] for v in S)
        level += 1
    edges = {frozenset((names[x], names[y])) for x in range(p) for y in adj[x] if x < y}
    return SkeletonResult(names, edges, sepsets, log)


def orient(names: list[str], edges: set[frozenset], sepsets: dict[frozenset, frozenset]) -> Cpdag:
    """Orient unshielded colliders ``x -> c <- y`` (c outside sepset(x, y))
    and close under Meek rules. An edge already oriented keeps its first
    orientation."""
    index = {v: k for k, v in enumerate(names)}
    p = len(names)
    A = np.zeros((p, p), dtype=np.int8)
    for e in edges:
        i, j = (index[v] for v in e)
        A[i, j] = A[j, i] = 1
    for x, y in combinations(range(p), 2):
        if A[x, y] or A[y, x]:
            continue
        sep = sepsets.get(frozenset((names[x], names[y])), frozenset())
        for c in range(p):
            if not ((A[x, c] or A[c, x]) and (A[y, c] or A[c, y])) or names[c] in sep:
                continue
            for a in (x, y):
                if A[a, c] and A[c, a]:
                    A[c, a] = 0
    return Cpdag.from_matrix(apply_meek_rules(A))


def pc(ds: Dataset, cfg: PcConfig, tester: Tester | None = None) -> tuple[Cpdag, SkeletonResult]:
    """Run skeleton search and orientation; returns the CPDAG (over column
    indices of ``ds``) and the skeleton record with its test log."""
    skel = learn_skeleton(ds, cfg, tester)
    return orient(skel.names, skel.edges, skel.sepsets), skel


def level_budget(adjacency_sizes: list[int], level: int) -> int:
    """Upper bound on tests at one level: sum over ordered edges of
    C(|adj(x)| - 1, level)."""
    return sum(s * math.comb(max(s - 1, 0), level) for s in adjacency_sizes)


def write_test_log(log: list[LogEntry], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "z", "family", "stat", "df", "p"])
        for e in log:
            fam = getattr(e.result.family, "value", e.result.family)
            w.writerow([e.x, e.y, ";".join(e.z), fam, f"{e.result.statistic:.10g}",
                        e.result.df, f"{e.result.p_value:.10g}"])
