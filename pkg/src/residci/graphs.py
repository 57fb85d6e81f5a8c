"""DAGs, CPDAGs, d-separation and the ground-truth machinery for model
testing and structure learning benchmarks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    pass


class NoExtensionError(GraphError):
    """The partially directed graph has no consistent DAG extension."""


def _topological_order(n: int, edges: Iterable[tuple[int, int]]) -> tuple[int, ...] | None:
    children = [[] for _ in range(n)]
    indeg = [0] * n
    for i, j in edges:
        children[i].append(j)
        indeg[j] += 1
    ready = [v for v in range(n) if indeg[v] == 0]
    order = []
    while ready:
        v = min(ready)
        ready.remove(v)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return tuple(order) if len(order) == n else None


@dataclass(frozen=True)
class Dag:
    n_vars: int
    edges: frozenset
    topo_order: tuple[int, ...] = ()

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.n_vars and 0 <= j < self.n_vars) or i == j:
                raise GraphError(f"invalid edge {i}->{j}")
        order = _topological_order(self.n_vars, edges)
        if order is None:
            raise GraphError("graph contains a cycle")
        if self.topo_order:
            pos = {v: k for k, v in enumerate(self.topo_order)}
            if sorted(self.topo_order) != list(range(self.n_vars)) or any(pos[i] > pos[j] for i, j in edges):
                raise GraphError("topo_order is not consistent with the edges")
            order = tuple(self.topo_order)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "topo_order", order)
        parents = [set() for _ in range(self.n_vars)]
        children = [set() for _ in range(self.n_vars)]
        for i, j in edges:
            parents[j].add(i)
            children[i].add(j)
        object.__setattr__(self, "_parents", tuple(frozenset(p) for p in parents))
        object.__setattr__(self, "_children", tuple(frozenset(c) for c in children))

    def parents(self, v: int) -> frozenset:
        return self._parents[v]

    def children(self, v: int) -> frozenset:
        return self._children[v]

    def adjacent(self, a: int, b: int) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def skeleton(self) -> set[frozenset]:
        return {frozenset(e) for e in self.edges}

    def ancestors(self, nodes: Iterable[int]) -> set[int]:
        """Ancestors of ``nodes``, the nodes themselves included."""
        seen = set(nodes)
        stack = list(seen)
        while stack:
            for p in self._parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def v_structures(self) -> set[tuple[int, int, int]]:
        """Unshielded colliders as ``(a, c, b)`` with ``a < b``."""
        out = set()
        for c in range(self.n_vars):
            for a, b in combinations(sorted(self._parents[c]), 2):
                if not self.adjacent(a, b):
                    out.add((a, c, b))
        return out


@dataclass(frozen=True)
class Cpdag:
    n_vars: int
    directed: frozenset
    undirected: frozenset

    def __post_init__(self):
        directed = frozenset((int(i), int(j)) for i, j in self.directed)
        undirected = frozenset(frozenset((int(i), int(j))) for i, j in map(tuple, self.undirected))
        pairs = [frozenset(e) for e in directed]
        if len(set(pairs)) != len(pairs) or set(pairs) & undirected:
            raise GraphError("a pair appears more than once")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)

    @classmethod
    def from_matrix(cls, A: np.ndarray) -> "Cpdag":
        n = A.shape[0]
        directed, undirected = set(), set()
        for i in range(n):
            for j in range(n):
                if A[i, j] and A[j, i] and i < j:
                    undirected.add(frozenset((i, j)))
                elif A[i, j] and not A[j, i]:
                    directed.add((i, j))
        return cls(n, frozenset(directed), frozenset(undirected))

    def to_matrix(self) -> np.ndarray:
        A = np.zeros((self.n_vars, self.n_vars), dtype=np.int8)
        for i, j in self.directed:
            A[i, j] = 1
        for e in self.undirected:
            i, j = tuple(e)
            A[i, j] = A[j, i] = 1
        return A

    def skeleton(self) -> set[frozenset]:
        return {frozenset(e) for e in self.directed} | set(self.undirected)


@dataclass(frozen=True)
class CiClaim:
    x: int
    y: int
    z: tuple[int, ...]
    holds: bool


# ---------------------------------------------------------------------------
# generation and queries


def random_dag(n: int, p_edge: float, seed: int) -> Dag:
    """Random DAG over the fixed order 0..n-1 with independent edges i->j (i<j)."""
    if n < 2:
        raise GraphError("need at least 2 variables")
    if not 0.0 <= p_edge <= 1.0:
        raise GraphError("p_edge must be in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    present = rng.random(iu.size) < p_edge
    return Dag(n, frozenset(zip(iu[present].tolist(), ju[present].tolist())), tuple(range(n)))


def d_separated(g: Dag, x: int, y: int, z: Iterable[int]) -> bool:
    """Bayes-ball reachability: True iff every path x..y is blocked by ``z``."""
    z = set(z)
    for v in (x, y, *z):
        if not 0 <= v < g.n_vars:
            raise GraphError(f"invalid node {v}")
    if x == y or x in z or y in z:
        raise GraphError("x, y must be distinct and outside z")
    anc_z = g.ancestors(z)
    # state: (node, arrived_from_child)
    queue = deque([(x, True)])
    visited = set()
    while queue:
        v, up = queue.popleft()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == y:
            return False
        if up and v not in z:
            queue.extend((p, True) for p in g.parents(v))
            queue.extend((c, False) for c in g.children(v))
        elif not up:
            if v not in z:
                queue.extend((c, False) for c in g.children(v))
            if v in anc_z:
                queue.extend((p, True) for p in g.parents(v))
    return True


def implied_cis(g: Dag) -> list[CiClaim]:
    """One claim per missing edge: ``x _||_ y | parents(y) - {x}`` with y
    after x in the topological order."""
    pos = {v: k for k, v in enumerate(g.topo_order)}
    claims = []
    for a, b in combinations(range(g.n_vars), 2):
        if g.adjacent(a, b):
            continue
        x, y = (a, b) if pos[a] < pos[b] else (b, a)
        z = tuple(sorted(g.parents(y) - {x}))
        assert d_separated(g, x, y, z), "parent set failed to separate a non-adjacent pair"
        claims.append(CiClaim(x, y, z, True))
    return claims


def random_ci_queries(g: Dag, count: int, max_z: int, seed: int) -> list[CiClaim]:
    if count < 1:
        raise GraphError("count must be >= 1")
    if max_z > g.n_vars - 2:
        raise GraphError("max_z exceeds n_vars - 2")
    rng = np.random.default_rng(seed)
    claims = []
    for _ in range(count):
        x, y = (int(v) for v in rng.choice(g.n_vars, size=2, replace=False))
        rest = [v for v in range(g.n_vars) if v not in (x, y)]
        size = int(rng.integers(0, max_z + 1))
        z = tuple(sorted(int(v) for v in rng.choice(rest, size=size, replace=False)))
        claims.append(CiClaim(x, y, z, d_separated(g, x, y, z)))
    return claims


# ---------------------------------------------------------------------------
# equivalence classes


def _adj(A, i, j) -> bool:
    return bool(A[i, j] or A[j, i])


def _undirected(A, i, j) -> bool:
    return bool(A[i, j] and A[j, i])


def _directed(A, i, j) -> bool:
    return bool(A[i, j] and not A[j, i])


def apply_meek_rules(A: np.ndarray) -> np.ndarray:
    """Close a pattern matrix under Meek rules R1-R4.

    ``A[i, j] = A[j, i] = 1`` encodes i--j, ``A[i, j] = 1, A[j, i] = 0``
    encodes i->j. Edges are scanned in ascending index order and an
    orientation, once made, is never revisited.
    """
    A = A.copy()
    n = A.shape[0]
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(n):
                if not _undirected(A, i, j):
                    continue
                if _meek_orients(A, i, j, n):
                    A[j, i] = 0
                    changed = True
    return A


def _meek_orients(A, i, j, n) -> bool:
    # R1: k -> i -- j, k not adjacent to j
    for k in range(n):
        if _directed(A, k, i) and not _adj(A, k, j) and k != j:
            return True
    # R2: i -> k -> j
    for k in range(n):
        if _directed(A, i, k) and _directed(A, k, j):
            return True
    # R3: i -- k -> j, i -- l -> j, k and l non-adjacent
    ks = [k for k in range(n) if _undirected(A, i, k) and _directed(A, k, j)]
    for k, l in combinations(ks, 2):
        if not _adj(A, k, l):
            return True
    # R4: i -- k -> l -> j, k not adjacent to j, i adjacent to l
    for k in range(n):
        if not _undirected(A, i, k) or k == j or _adj(A, k, j):
            continue
        for l in range(n):
            if _directed(A, k, l) and _directed(A, l, j) and _adj(A, i, l):
                return True
    return False


def cpdag_of(g: Dag) -> Cpdag:
    """Markov equivalence class of ``g``: skeleton, v-structures, Meek closure."""
    n = g.n_vars
    A = np.zeros((n, n), dtype=np.int8)
    for i, j in g.edges:
        A[i, j] = A[j, i] = 1
    for a, c, b in sorted(g.v_structures()):
        A[c, a] = 0
        A[c, b] = 0
    return Cpdag.from_matrix(apply_meek_rules(A))


def consistent_extension(c: Cpdag) -> Dag:
    """Orient the undirected edges of ``c`` without new v-structures or cycles.

    Dor-Tarsi elimination: repeatedly remove a sink whose undirected
    neighbours are adjacent to all its other neighbours; ties go to the
    highest index, so lower-index variables tend to become ancestors.
    Raises NoExtensionError when no such vertex exists.
    """
    A = c.to_matrix().astype(bool)
    n = c.n_vars
    remaining = set(range(n))
    oriented = set(c.directed)
    while remaining:
        for x in sorted(remaining, reverse=True):
            if any(A[x, v] and not A[v, x] for v in remaining):
                continue
            nbrs = [v for v in remaining if v != x and (A[x, v] or A[v, x])]
            und = [y for y in nbrs if A[x, y] and A[y, x]]
            if all(A[y, v] or A[v, y] for y in und for v in nbrs if v != y):
                break
        else:
            raise NoExtensionError("no consistent extension exists")
        for y in und:
            oriented.add((y, x))
        remaining.discard(x)
    try:
        return Dag(n, frozenset(oriented))
    except GraphError as exc:
        raise NoExtensionError(str(exc)) from None


def marginally_connected(c: Cpdag) -> set[frozenset]:
    """Pairs d-connected given the empty set in a consistent extension of
    ``c`` (i.e. with a common ancestor). Without an extension, undirected
    edges are followed in both directions."""
    try:
        g = consistent_extension(c)
        parents = [set(g.parents(v)) for v in range(c.n_vars)]
    except NoExtensionError:
        parents = [set() for _ in range(c.n_vars)]
        for i, j in c.directed:
            parents[j].add(i)
        for e in c.undirected:
            i, j = tuple(e)
            parents[i].add(j)
            parents[j].add(i)
    anc = []
    for v in range(c.n_vars):
        seen, stack = {v}, [v]
        while stack:
            for p in parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        anc.append(seen)
    return {frozenset((a, b)) for a, b in combinations(range(c.n_vars), 2) if anc[a] & anc[b]}


# ---------------------------------------------------------------------------
# scoring and serialization


def skeleton_f1(learned: Iterable, truth: Iterable) -> tuple[float, float, float]:
    """Precision, recall and F1 of unordered edge sets."""
    learned = {frozenset(e) for e in learned}
    truth = {frozenset(e) for e in truth}
    tp = len(learned & truth)
    precision = tp / len(learned) if learned else 1.0
    recall = tp / len(truth) if truth else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def format_graph(g: Dag | Cpdag, names: Sequence[str] | None = None) -> str:
    label = (lambda v: names[v]) if names else str
    lines = [str(g.n_vars)]
    directed = g.edges if isinstance(g, Dag) else g.directed
    lines += [f"{label(i)} -> {label(j)}" for i, j in sorted(directed)]
    if isinstance(g, Cpdag):
        lines += [f"{label(i)} -- {label(j)}" for i, j in sorted(tuple(sorted(e)) for e in g.undirected)]
    return "\n".join(lines) + "\n"


def parse_graph(text: str, names: Sequence[str] | None = None) -> Dag | Cpdag:
    """Inverse of :func:`format_graph`; returns a Dag when nothing is undirected."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise GraphError("empty graph file")
    n = int(lines[0])
    index = {name: k for k, name in enumerate(names)} if names else {}

    def node(tok):
        tok = tok.strip()
        if tok in index:
            return index[tok]
        try:
            return int(tok)
        except ValueError:
            raise GraphError(f"unknown node {tok!r}") from None

    directed, undirected = set(), set()
    for ln in lines[1:]:
        if "->" in ln:
            a, b = ln.split("->")
            directed.add((node(a), node(b)))
        elif "--" in ln:
            a, b = ln.split("--")
            undirected.add(frozenset((node(a), node(b))))
        else:
            raise GraphError(f"cannot parse edge line {ln!r}")
    if undirected:
        return Cpdag(n, frozenset(directed), frozenset(undirected))
    return Dag(n, frozenset(directed))


def read_graph(path, names=None) -> Dag | Cpdag:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read(), names)


def write_graph(g: Dag | Cpdag, path, names=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(g, names))
