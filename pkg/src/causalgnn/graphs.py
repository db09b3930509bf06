"""Directed graph types shared across the package.

``Dag`` verifies acyclicity at construction time (topological sort must
succeed), so holding a ``Dag`` is a proof the edge set is acyclic.
``Digraph`` is the unconstrained variant: any set of ordered pairs without
self-loops, 2-cycles allowed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

Edge = tuple[int, int]


class GraphError(ValueError):
    pass


def _check_edges(d: int, edges: frozenset[Edge]) -> None:
    if d < 1:
        raise GraphError(f"node count must be >= 1, got {d}")
    for a, b in edges:
        if a == b:
            raise GraphError(f"self-loop on node {a}")
        if not (0 <= a < d and 0 <= b < d):
            raise GraphError(f"edge ({a},{b}) out of range for d={d}")


def topological_sort(d: int, edges: frozenset[Edge] | set[Edge]) -> list[int] | None:
    """Kahn's algorithm with ties broken by ascending node index.

    Returns None when the edge set contains a directed cycle.
    """
    indeg = [0] * d
    succ: list[list[int]] = [[] for _ in range(d)]
    for a, b in edges:
        indeg[b] += 1
        succ[a].append(b)
    ready = [v for v in range(d) if indeg[v] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for u in succ[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, u)
    return order if len(order) == d else None


def has_cycle_dfs(d: int, edges: frozenset[Edge] | set[Edge]) -> bool:
    """Independent cycle check by depth-first search (test oracle)."""
    succ: list[list[int]] = [[] for _ in range(d)]
    for a, b in edges:
        succ[a].append(b)
    color = [0] * d  # 0 white, 1 on stack, 2 done
    for start in range(d):
        if color[start] != 0:
            continue
        stack: list[tuple[int, int]] = [(start, 0)]
        color[start] = 1
        while stack:
            v, i = stack[-1]
            if i < len(succ[v]):
                stack[-1] = (v, i + 1)
                u = succ[v][i]
                if color[u] == 1:
                    return True
                if color[u] == 0:
                    color[u] = 1
                    stack.append((u, 0))
            else:
                color[v] = 2
                stack.pop()
    return False


@dataclass(frozen=True)
class Digraph:
    """Directed graph; 2-cycles allowed, self-loops are not."""

    d: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset(self.edges))
        _check_edges(self.d, self.edges)


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph; acyclicity verified at construction."""

    d: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset(self.edges))
        _check_edges(self.d, self.edges)
        if topological_sort(self.d, self.edges) is None:
            raise GraphError("edge set contains a directed cycle")

    def topological_order(self) -> list[int]:
        order = topological_sort(self.d, self.edges)
        assert order is not None
        return order


def write_edge_list(path: str, d: int, edges: frozenset[Edge] | set[Edge]) -> None:
    """Edge-list text format: 'd=<int>' header, then 'parent,child' lines."""
    lines = [f"d={d}"]
    lines += [f"{a},{b}" for a, b in sorted(edges)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edge_list(path: str) -> tuple[int, frozenset[Edge]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("d="):
        raise GraphError(f"{path}: missing 'd=<int>' header")
    d = int(lines[0][2:])
    edges = set()
    for ln in lines[1:]:
        a, b = ln.split(",")
        edges.add((int(a), int(b)))
    return d, frozenset(edges)
