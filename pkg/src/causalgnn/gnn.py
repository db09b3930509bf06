"""Edge-direction classifier: message passing with edge features, a 3-class
per-pair head, class-weighted cross-entropy training with exact manual
gradients, and lossless parameter persistence.

Inputs are squashed with arcsinh before any linear layer: several features
are unbounded counts, and without squashing the softmax saturates at
initialization. arcsinh is odd, so the edge-feature reversal map commutes
with it and direction symmetry is preserved exactly.

Message passing (k rounds over the fully connected graph):

    m_uv = concat(h_u, h_v, e(u->v))
    m_v  = mean over u != v of m_uv
    h_v <- relu(W_k . concat(h_v, m_v) + b_k)

where e(u->v) is the stored canonical edge vector for u < v and its schema
reversal for u > v, so the directional feature components are always signed
relative to the receiving node.

The classifier head is symmetrized so node relabeling permutes the output
triples exactly (with rev/fwd swapped where the canonical pair order
flips): for the canonical pair (i, j) with edge vector e,

    logits = W_h.[h_i, h_j, e] + W_h.[h_j, h_i, reverse(e)] flipped

and the triple is the softmax, ordered (p_rev, p_none, p_fwd) for the
labels (-1, 0, +1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .featuregraph import (EDGE_DIM, NODE_DIM, FeatureGraph,
                           reverse_edge_vector, row_pairs)
from .graphs import Dag
from .inference import EdgeProbabilities

MODEL_FILE_VERSION = 1


class SchemaMismatchError(ValueError):
    pass


class ModelFileError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 2
    hidden_dim: int = 64
    activation: str = "relu"
    class_weights_mode: str = "inverse-frequency"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.class_weights_mode not in ("uniform", "inverse-frequency"):
            raise ValueError(f"unknown class_weights_mode {self.class_weights_mode!r}")


@dataclass(frozen=True)
class OptimizerSettings:
    """Adam-style per-parameter moment optimizer."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100


@dataclass
class ModelParams:
    config: ModelConfig
    schema_version: str
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, self.schema_version,
                           {k: v.copy() for k, v in self.tensors.items()})


def _tensor_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    hd = cfg.hidden_dim
    shapes: list[tuple[str, tuple[int, ...]]] = [
        ("w_in", (NODE_DIM, hd)),
        ("b_in", (hd,)),
    ]
    for k in range(cfg.num_layers):
        shapes.append((f"layer{k}_w", (3 * hd + EDGE_DIM, hd)))
        shapes.append((f"layer{k}_b", (hd,)))
    shapes.append(("w_head", (2 * hd + EDGE_DIM, 3)))
    shapes.append(("b_head", (3,)))
    return shapes


def init_params(cfg: ModelConfig, schema_version: str) -> ModelParams:
    """Scaled uniform init (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(cfg.seed)
    tensors = {}
    for name, shape in _tensor_shapes(cfg):
        if len(shape) == 1:  # bias
            tensors[name] = np.zeros(shape)
        else:
            fan_in, fan_out = shape
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-lim, lim, size=shape)
    return ModelParams(cfg, schema_version, tensors)


def edge_labels_from_dag(dag: Dag) -> np.ndarray:
    """Per canonical pair (i<j): +1 iff i->j in truth, -1 iff j->i, else 0."""
    labels = []
    for i, j in row_pairs(dag.d):
        if (i, j) in dag.edges:
            labels.append(1)
        elif (j, i) in dag.edges:
            labels.append(-1)
        else:
            labels.append(0)
    return np.array(labels, dtype=np.int64)


def _pair_arrays(d: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = row_pairs(d)
    return (np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))


def _forward_cache(params: ModelParams, graph: FeatureGraph) -> dict:
    if graph.schema_version != params.schema_version:
        raise SchemaMismatchError(
            f"feature schema {graph.schema_version!r} does not match "
            f"model schema {params.schema_version!r}")
    cfg = params.config
    hd = cfg.hidden_dim
    d = graph.d
    t = params.tensors
    idx_i, idx_j = _pair_arrays(d)
    # arcsinh squashes unbounded features (counts, entropies) to a few
    # units so logits cannot saturate; odd symmetry keeps the schema
    # reversal map valid on the transformed vectors
    x = np.arcsinh(graph.node_feats)
    e = np.arcsinh(graph.edge_feats)
    e_rev = reverse_edge_vector(e)

    # per-node mean of incident edge vectors, oriented toward the receiver
    esum = np.zeros((d, EDGE_DIM))
    np.add.at(esum, idx_j, e)       # message i -> j along canonical order
    np.add.at(esum, idx_i, e_rev)   # message j -> i against canonical order
    mean_e = esum / (d - 1)

    h = x @ t["w_in"] + t["b_in"]
    states = [h]
    pre_acts = []
    for k in range(cfg.num_layers):
        mean_n = (h.sum(axis=0, keepdims=True) - h) / (d - 1)
        layer_in = np.concatenate([h, mean_n, h, mean_e], axis=1)
        z = layer_in @ t[f"layer{k}_w"] + t[f"layer{k}_b"]
        h = np.maximum(z, 0.0)
        pre_acts.append(z)
        states.append(h)

    hi, hj = h[idx_i], h[idx_j]
    s_in = np.concatenate([hi, hj, e], axis=1)
    t_in = np.concatenate([hj, hi, e_rev], axis=1)
    s = s_in @ t["w_head"] + t["b_head"]
    tt = t_in @ t["w_head"] + t["b_head"]
    logits = s + tt[:, ::-1]
    m = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - m)
    probs = ex / ex.sum(axis=1, keepdims=True)
    return {
        "d": d, "idx_i": idx_i, "idx_j": idx_j, "e": e, "e_rev": e_rev,
        "states": states, "pre_acts": pre_acts,
        "s_in": s_in, "t_in": t_in, "probs": probs,
        "node_feats": x,
    }


def forward(params: ModelParams, graph: FeatureGraph) -> EdgeProbabilities:
    cache = _forward_cache(params, graph)
    return EdgeProbabilities(graph.d, cache["probs"])


def loss(probs: EdgeProbabilities, labels: np.ndarray,
         weights: np.ndarray | None = None) -> float:
    """Mean over pairs of -w_label * ln(p_label); probabilities are clamped
    at 1e-12 before the log as a guard.
    """
    if weights is None:
        weights = np.ones(3)
    labels = np.asarray(labels)
    idx = labels + 1
    p = np.clip(probs.table[np.arange(len(idx)), idx], 1e-12, None)
    w = np.asarray(weights)[idx]
    return float(np.mean(-w * np.log(p)))


def loss_and_gradient(params: ModelParams, graph: FeatureGraph,
                      labels: np.ndarray, weights: np.ndarray | None = None
                      ) -> tuple[float, dict[str, np.ndarray]]:
    """Exact gradient of the class-weighted cross-entropy loss w.r.t. every
    parameter tensor (the 1e-12 probability clamp is ignored; it is only a
    numerical guard and inactive anywhere finite-precision training visits).
    """
    if weights is None:
        weights = np.ones(3)
    cfg = params.config
    hd = cfg.hidden_dim
    t = params.tensors
    cache = _forward_cache(params, graph)
    d = cache["d"]
    idx_i, idx_j = cache["idx_i"], cache["idx_j"]
    probs = cache["probs"]
    n_pairs = probs.shape[0]

    labels = np.asarray(labels)
    idx = labels + 1
    w = np.asarray(weights)[idx]
    p_true = np.clip(probs[np.arange(n_pairs), idx], 1e-12, None)
    loss_val = float(np.mean(-w * np.log(p_true)))

    grads = {name: np.zeros_like(arr) for name, arr in t.items()}

    onehot = np.zeros_like(probs)
    onehot[np.arange(n_pairs), idx] = 1.0
    dlogits = (probs - onehot) * (w / n_pairs)[:, None]

    ds = dlogits
    dt = dlogits[:, ::-1]
    grads["w_head"] = cache["s_in"].T @ ds + cache["t_in"].T @ dt
    grads["b_head"] = ds.sum(axis=0) + dt.sum(axis=0)
    ds_in = ds @ t["w_head"].T
    dt_in = dt @ t["w_head"].T

    dh = np.zeros((d, hd))
    np.add.at(dh, idx_i, ds_in[:, :hd])
    np.add.at(dh, idx_j, ds_in[:, hd:2 * hd])
    np.add.at(dh, idx_j, dt_in[:, :hd])
    np.add.at(dh, idx_i, dt_in[:, hd:2 * hd])

    # edge-mean block is constant w.r.t. parameters; rebuild it once
    esum = np.zeros((d, EDGE_DIM))
    np.add.at(esum, idx_j, cache["e"])
    np.add.at(esum, idx_i, cache["e_rev"])
    mean_e = esum / (d - 1)

    for k in range(cfg.num_layers - 1, -1, -1):
        z = cache["pre_acts"][k]
        dz = dh * (z > 0.0)
        h_prev = cache["states"][k]
        mean_n = (h_prev.sum(axis=0, keepdims=True) - h_prev) / (d - 1)
        layer_in = np.concatenate([h_prev, mean_n, h_prev, mean_e], axis=1)
        grads[f"layer{k}_w"] = layer_in.T @ dz
        grads[f"layer{k}_b"] = dz.sum(axis=0)
        din = dz @ t[f"layer{k}_w"].T
        d_self = din[:, :hd] + din[:, 2 * hd:3 * hd]
        d_mean_n = din[:, hd:2 * hd]
        dh = d_self + (d_mean_n.sum(axis=0, keepdims=True) - d_mean_n) / (d - 1)

    grads["w_in"] = cache["node_feats"].T @ dh
    grads["b_in"] = dh.sum(axis=0)
    return loss_val, grads


def gradient(params: ModelParams, graph: FeatureGraph, labels: np.ndarray,
             weights: np.ndarray | None = None) -> dict[str, np.ndarray]:
    return loss_and_gradient(params, graph, labels, weights)[1]


def class_weights(corpus_labels: list[np.ndarray], mode: str) -> np.ndarray:
    """Per-class loss weights over a training corpus.

    inverse-frequency: w_c = total / (3 * count_c), so a balanced corpus
    gets uniform weights.
    """
    if mode == "uniform":
        return np.ones(3)
    counts = np.zeros(3)
    for labels in corpus_labels:
        for c in range(3):
            counts[c] += int(np.sum(np.asarray(labels) + 1 == c))
    total = counts.sum()
    return total / (3.0 * np.maximum(counts, 1.0))


def train(corpus: list[tuple[FeatureGraph, np.ndarray]], cfg: ModelConfig,
          opt: OptimizerSettings | None = None
          ) -> tuple[ModelParams, list[float]]:
    """Per-graph gradient steps with Adam; returns (params, per-epoch mean
    training loss). Aborts with TrainingDivergedError if the loss goes
    non-finite.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    if opt is None:
        opt = OptimizerSettings()
    schema = corpus[0][0].schema_version
    for fg, _ in corpus:
        if fg.schema_version != schema:
            raise SchemaMismatchError("inconsistent feature schemas in corpus")
    params = init_params(cfg, schema)
    weights = class_weights([lab for _, lab in corpus], cfg.class_weights_mode)

    m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    v = {k: np.zeros_like(vv) for k, vv in params.tensors.items()}
    step = 0
    log: list[float] = []
    for epoch in range(opt.epochs):
        epoch_losses = []
        for fg, labels in corpus:
            loss_val, grads = loss_and_gradient(params, fg, labels, weights)
            if not np.isfinite(loss_val):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}: {loss_val}")
            epoch_losses.append(loss_val)
            step += 1
            for name, g in grads.items():
                m[name] = opt.beta1 * m[name] + (1 - opt.beta1) * g
                v[name] = opt.beta2 * v[name] + (1 - opt.beta2) * g * g
                m_hat = m[name] / (1 - opt.beta1 ** step)
                v_hat = v[name] / (1 - opt.beta2 ** step)
                params.tensors[name] -= (
                    opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.eps))
        log.append(float(np.mean(epoch_losses)))
    return params, log


def save_params(params: ModelParams, path: str) -> None:
    cfg = params.config
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"version={MODEL_FILE_VERSION}\n")
        fh.write(f"schema={params.schema_version}\n")
        fh.write(f"num_layers={cfg.num_layers}\n")
        fh.write(f"hidden_dim={cfg.hidden_dim}\n")
        fh.write(f"activation={cfg.activation}\n")
        fh.write(f"class_weights_mode={cfg.class_weights_mode}\n")
        fh.write(f"seed={cfg.seed}\n")
        for name, arr in params.tensors.items():
            shape = "x".join(str(s) for s in arr.shape)
            fh.write(f"[tensor {name} {shape}]\n")
            for val in arr.reshape(-1):
                fh.write(repr(float(val)) + "\n")


def load_params(path: str) -> ModelParams:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise ModelFileError(f"{path}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]

    def _field(i: int, key: str) -> str:
        if i >= len(lines) or not lines[i].startswith(key + "="):
            raise ModelFileError(f"{path}: missing field {key!r}")
        return lines[i][len(key) + 1:]

    version = int(_field(0, "version"))
    if version != MODEL_FILE_VERSION:
        raise ModelFileError(
            f"{path}: model file version {version} not supported")
    schema = _field(1, "schema")
    cfg = ModelConfig(
        num_layers=int(_field(2, "num_layers")),
        hidden_dim=int(_field(3, "hidden_dim")),
        activation=_field(4, "activation"),
        class_weights_mode=_field(5, "class_weights_mode"),
        seed=int(_field(6, "seed")),
    )
    tensors: dict[str, np.ndarray] = {}
    i = 7
    while i < len(lines):
        header = lines[i]
        if not (header.startswith("[tensor ") and header.endswith("]")):
            raise ModelFileError(f"{path}: malformed tensor header {header!r}")
        _, name, shape_s = header[1:-1].split(" ")
        shape = tuple(int(s) for s in shape_s.split("x"))
        count = int(np.prod(shape))
        vals = lines[i + 1:i + 1 + count]
        if len(vals) != count:
            raise ModelFileError(f"{path}: truncated tensor {name!r}")
        tensors[name] = np.array([float(v) for v in vals]).reshape(shape)
        i += 1 + count

    expected = _tensor_shapes(cfg)
    if [(n, tensors[n].shape) for n, _ in expected if n in tensors] != expected \
            or set(tensors) != {n for n, _ in expected}:
        raise ModelFileError(f"{path}: tensor set does not match config")
    return ModelParams(cfg, schema, tensors)
