"""Graph extraction from edge-direction probabilities.

Four procedures: sample digraphs (PG), maximum-likelihood digraph (MLG),
acyclicity-constrained sampling conditioned on the ML topological ordering
(PDAG), and the maximum-likelihood DAG under that ordering (MLDAG). The ML
ordering is a topological sort of the maximum spanning DAG (MSDAG) of the
weighted graph induced by the directed edge probabilities.

All tie-breaking rules are frozen: MLG argmax ties prefer none, then fwd,
then rev; MSDAG edge ties break by (weight desc, source asc, target asc);
topological-sort ties break by ascending node index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import Dag, Digraph, Edge, topological_sort
from .featuregraph import pair_row, row_pairs


@dataclass(frozen=True)
class EdgeProbabilities:
    """Per canonical pair (i<j): probability triple (p_rev, p_none, p_fwd)."""

    d: int
    table: np.ndarray  # d(d-1)/2 x 3

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=np.float64)
        object.__setattr__(self, "table", t)
        n_pairs = self.d * (self.d - 1) // 2
        if t.shape != (n_pairs, 3):
            raise ValueError(f"table shape {t.shape}, expected {(n_pairs, 3)}")
        if np.any(t < -1e-12):
            raise ValueError("negative probability")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("probability triple does not sum to 1")

    def triple(self, i: int, j: int) -> np.ndarray:
        return self.table[pair_row(i, j, self.d)]


@dataclass(frozen=True)
class TopologicalOrder:
    """Permutation pi (position -> node) and its inverse (node -> position)."""

    order: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", tuple(self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("not a permutation")

    @property
    def position(self) -> dict[int, int]:
        return {v: k for k, v in enumerate(self.order)}


@dataclass(frozen=True)
class WeightedDigraph:
    """w[a, b] = probability weight of edge a->b, in [0, 1], diag 0."""

    d: int
    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.shape != (self.d, self.d):
            raise ValueError(f"weight shape {w.shape}, expected {(self.d, self.d)}")
        if not np.all(np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
            raise ValueError("weights must be finite and in [0, 1]")


def sample_digraph(probs: EdgeProbabilities, rng: np.random.Generator) -> Digraph:
    """Draw each pair's direction independently from its triple."""
    edges: set[Edge] = set()
    u = rng.random(probs.table.shape[0])
    for r, (i, j) in enumerate(row_pairs(probs.d)):
        p_rev, p_none, _ = probs.table[r]
        if u[r] < p_rev:
            edges.add((j, i))
        elif u[r] >= p_rev + p_none:
            edges.add((i, j))
    return Digraph(probs.d, frozenset(edges))


def graph_log_prob(probs: EdgeProbabilities, g: Digraph) -> float:
    """ln p(G|f) under the factorized distribution; -inf when a realized
    component has probability 0.
    """
    if g.d != probs.d:
        raise ValueError("dimension mismatch")
    total = 0.0
    for r, (i, j) in enumerate(row_pairs(probs.d)):
        fwd = (i, j) in g.edges
        rev = (j, i) in g.edges
        if fwd and rev:
            raise ValueError(f"both directions present on pair ({i},{j})")
        p = probs.table[r][2 if fwd else 0 if rev else 1]
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


_TIE_PREFERENCE = (1, 2, 0)  # none, then fwd, then rev


def ml_digraph(probs: EdgeProbabilities) -> Digraph:
    """Per-pair argmax digraph; argmax ties prefer none, then fwd, then rev
    (a full tie yields no edge).
    """
    edges: set[Edge] = set()
    for r, (i, j) in enumerate(row_pairs(probs.d)):
        t = probs.table[r]
        best = _TIE_PREFERENCE[0]
        for c in _TIE_PREFERENCE[1:]:
            if t[c] > t[best]:
                best = c
        if best == 2:
            edges.add((i, j))
        elif best == 0:
            edges.add((j, i))
    return Digraph(probs.d, frozenset(edges))


def induced_weighted_graph(probs: EdgeProbabilities) -> WeightedDigraph:
    w = np.zeros((probs.d, probs.d))
    for r, (i, j) in enumerate(row_pairs(probs.d)):
        p_rev, _, p_fwd = probs.table[r]
        w[i, j] = p_fwd
        w[j, i] = p_rev
    return WeightedDigraph(probs.d, w)


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _creates_cycle(d: int, succ: list[set[int]], a: int, b: int) -> bool:
    """Would adding a->b close a directed cycle (i.e., is a reachable from b)?"""
    if a == b:
        return True
    stack = [b]
    seen = {b}
    while stack:
        v = stack.pop()
        for u in succ[v]:
            if u == a:
                return True
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return False


def msdag(g: WeightedDigraph) -> Dag:
    """Maximum spanning DAG heuristic: maximum spanning forest on the
    undirected weights (each tree edge oriented by its larger directed
    weight), then remaining positive-weight directed edges added in
    descending weight order when they do not close a cycle. Zero-weight
    edges are never added.
    """
    d = g.d
    w = g.w
    # phase 1: maximum spanning forest over positive undirected weights
    und = []
    for i in range(d):
        for j in range(i + 1, d):
            u = max(w[i, j], w[j, i])
            if u > 0.0:
                und.append((u, i, j))
    und.sort(key=lambda t: (-t[0], t[1], t[2]))
    uf = _UnionFind(d)
    edges: set[Edge] = set()
    for u, i, j in und:
        if uf.union(i, j):
            if w[i, j] >= w[j, i]:  # orientation tie goes to the canonical direction
                edges.add((i, j))
            else:
                edges.add((j, i))
    # an orientation of a forest cannot contain a directed cycle; repair
    # defensively anyway by flipping the lowest-weight edge on any cycle
    while topological_sort(d, edges) is None:  # pragma: no cover
        cyc_edge = min(edges, key=lambda e: (w[e], e))
        edges.discard(cyc_edge)
        edges.add((cyc_edge[1], cyc_edge[0]))

    # phase 2: greedy addition in descending weight order
    succ: list[set[int]] = [set() for _ in range(d)]
    for a, b in edges:
        succ[a].add(b)
    rest = [(w[a, b], a, b) for a in range(d) for b in range(d)
            if a != b and w[a, b] > 0.0 and (a, b) not in edges]
    rest.sort(key=lambda t: (-t[0], t[1], t[2]))
    for _, a, b in rest:
        if not _creates_cycle(d, succ, a, b):
            succ[a].add(b)
            edges.add((a, b))
    return Dag(d, frozenset(edges))


def ml_ordering(probs: EdgeProbabilities) -> TopologicalOrder:
    """Topological order of msdag(induced weighted graph); sort ties break
    by ascending node index.
    """
    dag = msdag(induced_weighted_graph(probs))
    order = topological_sort(dag.d, dag.edges)
    assert order is not None
    return TopologicalOrder(tuple(order))


def _oriented_pair_probs(probs: EdgeProbabilities, order: TopologicalOrder
                         ) -> list[tuple[int, int, float, float]]:
    """For each ordering-compatible directed pair (a, b) with a before b:
    (a, b, p_edge, p_none) from the canonical triple.
    """
    pos = order.position
    out = []
    for r, (i, j) in enumerate(row_pairs(probs.d)):
        p_rev, p_none, p_fwd = probs.table[r]
        if pos[i] < pos[j]:
            out.append((i, j, float(p_fwd), float(p_none)))
        else:
            out.append((j, i, float(p_rev), float(p_none)))
    return out


def _renorm(p_edge: float, p_none: float) -> float:
    tot = p_edge + p_none
    return p_edge / tot if tot > 0.0 else 0.0


def sample_dag(probs: EdgeProbabilities, order: TopologicalOrder,
               rng: np.random.Generator) -> Dag:
    """Sample an ordering-compatible DAG: each compatible pair (a before b)
    includes a->b with probability p_edge / (p_edge + p_none), the forward
    probability renormalized over the two ordering-consistent outcomes.
    """
    edges: set[Edge] = set()
    oriented = _oriented_pair_probs(probs, order)
    u = rng.random(len(oriented))
    for k, (a, b, p_edge, p_none) in enumerate(oriented):
        if u[k] < _renorm(p_edge, p_none):
            edges.add((a, b))
    return Dag(probs.d, frozenset(edges))


def ml_dag(probs: EdgeProbabilities, order: TopologicalOrder) -> Dag:
    """Maximum-likelihood ordering-compatible DAG: include a->b iff the
    renormalized forward probability exceeds 0.5 (ties at exactly 0.5 are
    excluded). Equivalent to descending-probability greedy selection under
    the factorized form.
    """
    edges: set[Edge] = set()
    for a, b, p_edge, p_none in _oriented_pair_probs(probs, order):
        if _renorm(p_edge, p_none) > 0.5:
            edges.add((a, b))
    return Dag(probs.d, frozenset(edges))


def dag_log_prob(probs: EdgeProbabilities, dag: Dag, order: TopologicalOrder,
                 renormalize: bool = True) -> float:
    """ln p(G|f, DAG, order) over ordering-compatible pairs. With
    renormalize=False the raw factor product (p_edge or p_none, not summing
    to 1) is used instead; kept for comparison.
    """
    total = 0.0
    for a, b, p_edge, p_none in _oriented_pair_probs(probs, order):
        if (b, a) in dag.edges:
            raise ValueError(f"edge ({b},{a}) violates the ordering")
        present = (a, b) in dag.edges
        if renormalize:
            p1 = _renorm(p_edge, p_none)
            p = p1 if present else 1.0 - p1
        else:
            p = p_edge if present else p_none
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


def save_edge_probabilities(probs: EdgeProbabilities, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"d={probs.d}\n")
        for r, (i, j) in enumerate(row_pairs(probs.d)):
            p_rev, p_none, p_fwd = (float(v) for v in probs.table[r])
            fh.write(f"{i},{j},{p_rev!r},{p_none!r},{p_fwd!r}\n")


def load_edge_probabilities(path: str) -> EdgeProbabilities:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("d="):
        raise ValueError(f"{path}: missing 'd=<int>' header")
    d = int(lines[0][2:])
    table = np.zeros((d * (d - 1) // 2, 3))
    for ln in lines[1:]:
        i_s, j_s, a, b, c = ln.split(",")
        table[pair_row(int(i_s), int(j_s), d)] = (float(a), float(b), float(c))
    return EdgeProbabilities(d, table)
