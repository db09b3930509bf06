"""Ground-truth DAG generators and nonlinear-SEM data sampling.

Training/test corpora are produced by cycling a Cartesian grid of
(node count, edge multiplier, sample count, graph model) cells; each item
gets a sub-seed derived deterministically from (corpus seed, index).
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import DataMatrix, save_csv
from .graphs import Dag, write_edge_list


@dataclass(frozen=True)
class SemConfig:
    """One-hidden-layer random network per node, additive Gaussian noise."""

    hidden_width: int = 10
    weight_low: float = 0.5
    weight_high: float = 2.0
    noise_std: float = 1.0

    def __post_init__(self) -> None:
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")
        if not (0 < self.weight_low < self.weight_high):
            raise ValueError("need 0 < weight_low < weight_high")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")


@dataclass(frozen=True)
class CorpusSpec:
    node_counts: tuple[int, ...] = (10, 20, 50, 100)
    edge_multipliers: tuple[int, ...] = (1, 2, 4)
    sample_counts: tuple[int, ...] = (500, 1000, 2000)
    graph_models: tuple[str, ...] = ("ER", "SF")
    graphs_total: int = 200
    seed: int = 0
    sem: SemConfig = field(default_factory=SemConfig)

    def __post_init__(self) -> None:
        for name in ("node_counts", "edge_multipliers", "sample_counts", "graph_models"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not all((self.node_counts, self.edge_multipliers,
                    self.sample_counts, self.graph_models)):
            raise ValueError("all grid lists must be non-empty")
        if self.graphs_total < 1:
            raise ValueError("graphs_total must be >= 1")
        for m in self.graph_models:
            if m not in ("ER", "SF"):
                raise ValueError(f"unknown graph model {m!r}")

    def grid(self) -> list[tuple[int, int, int, str]]:
        return list(itertools.product(self.node_counts, self.edge_multipliers,
                                      self.sample_counts, self.graph_models))


def gen_er_dag(d: int, e_target: float, rng: np.random.Generator) -> Dag:
    """Erdős–Rényi DAG: each pair is an edge with probability
    e_target / (d(d-1)/2), oriented along a uniformly random node permutation.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    max_edges = d * (d - 1) // 2
    if not (0 <= e_target <= max_edges):
        raise ValueError(f"e_target {e_target} out of range [0, {max_edges}]")
    p = e_target / max_edges
    perm = rng.permutation(d)
    edges = set()
    for a in range(d):
        for b in range(a + 1, d):
            if rng.random() < p:
                edges.add((int(perm[a]), int(perm[b])))
    return Dag(d, frozenset(edges))


def gen_sf_dag(d: int, e_target: float, rng: np.random.Generator) -> Dag:
    """Scale-free DAG via Barabási–Albert preferential attachment.

    Attachment parameter m = round(e_target / d), so the edge count is
    m*(d-m). Edges are oriented from earlier-attached to later-attached
    node, which makes the output acyclic by construction.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    m = int(round(e_target / d))
    if m < 1 or m >= d:
        raise ValueError(f"infeasible attachment parameter m={m} for d={d}")
    edges = set()
    # repeated-node list implements degree-proportional sampling
    repeated: list[int] = []
    targets = list(range(m))
    for new in range(m, d):
        for t in targets:
            edges.add((t, new))
        repeated.extend(targets)
        repeated.extend([new] * m)
        # next targets: m distinct nodes sampled degree-proportionally
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(int(repeated[rng.integers(len(repeated))]))
        targets = sorted(chosen)
    return Dag(d, frozenset(edges))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def sample_sem(dag: Dag, n: int, cfg: SemConfig, rng: np.random.Generator) -> DataMatrix:
    """Sample X_j = g_j(parents) + noise in topological order.

    g_j is a one-hidden-layer network with sigmoid units; weights are drawn
    uniformly from [weight_low, weight_high] with random sign. Root nodes
    are pure noise.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    d = dag.d
    parents: list[list[int]] = [[] for _ in range(d)]
    for a, b in sorted(dag.edges):
        parents[b].append(a)
    x = np.zeros((n, d))
    for j in dag.topological_order():
        noise = rng.normal(0.0, cfg.noise_std, size=n)
        pa = parents[j]
        if pa:
            w1 = rng.uniform(cfg.weight_low, cfg.weight_high,
                             size=(len(pa), cfg.hidden_width))
            w1 *= rng.choice([-1.0, 1.0], size=w1.shape)
            w2 = rng.uniform(cfg.weight_low, cfg.weight_high, size=cfg.hidden_width)
            w2 *= rng.choice([-1.0, 1.0], size=w2.shape)
            x[:, j] = _sigmoid(x[:, pa] @ w1) @ w2 + noise
        else:
            x[:, j] = noise
    names = tuple(f"x{i}" for i in range(d))
    return DataMatrix(x, names)


@dataclass(frozen=True)
class CorpusItem:
    index: int
    model: str
    d: int
    e_target: int
    n: int
    seed: int
    dag: Dag
    data: DataMatrix


def item_rng(corpus_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((corpus_seed, index)))


def gen_corpus(spec: CorpusSpec) -> list[CorpusItem]:
    """Draw graphs_total (Dag, DataMatrix) pairs by cycling the grid cells."""
    cells = spec.grid()
    items = []
    for i in range(spec.graphs_total):
        d, mult, n, model = cells[i % len(cells)]
        e_target = mult * d
        rng = item_rng(spec.seed, i)
        if model == "ER":
            e_target = min(e_target, d * (d - 1) // 2)
            dag = gen_er_dag(d, e_target, rng)
        else:
            dag = gen_sf_dag(d, e_target, rng)
        data = sample_sem(dag, n, spec.sem, rng)
        items.append(CorpusItem(i, model, d, e_target, n, spec.seed, dag, data))
    return items


def write_corpus(items: list[CorpusItem], out_dir: str) -> None:
    """Write per-item data CSV, truth edge-list, and a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    lines = ["id,model,d,e,n,seed"]
    for it in items:
        save_csv(it.data, os.path.join(out_dir, f"data_{it.index:04d}.csv"))
        write_edge_list(os.path.join(out_dir, f"truth_{it.index:04d}.txt"),
                        it.dag.d, it.dag.edges)
        lines.append(f"{it.index},{it.model},{it.d},{it.e_target},{it.n},{it.seed}")
    with open(os.path.join(out_dir, "manifest.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        cells = ln.split(",")
        rec = dict(zip(header, cells))
        for k in ("id", "d", "e", "n", "seed"):
            rec[k] = int(rec[k])
        out.append(rec)
    return out
