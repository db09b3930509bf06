"""Fully connected feature graph: node/edge feature schemas and builders.

Schema document (version ``efs-1``)
-----------------------------------

Node features, in order (13):

====  ========================  =====================================================
idx   name                      definition
====  ========================  =====================================================
0     min                       column minimum
1     max                       column maximum
2     numerical_type            1.0 if #distinct values > 2*B else 0.0 (B = bin count)
3     n_unique                  number of distinct values
4     unique_ratio              n_unique / n
5     log_n                     ln(sample count)
6     norm_entropy              equal-width-histogram entropy / ln(B)
7     norm_entropy_baseline     entropy of a uniform histogram with B bins = ln(B)
8     uniform_div               KL(equal-width bins || uniform) = ln(B) - H_hist
9     discrete_entropy          entropy of quantile-bin labels (B bins, nats)
10    norm_discrete_entropy     discrete_entropy / ln(#distinct labels)
11    skewness                  sample skewness (0 for constant column)
12    kurtosis                  excess kurtosis (0 for constant column)
====  ========================  =====================================================

Edge features for the canonical pair (i, j), i < j, where x = column i and
y = column j. Directional features named ``*_xy`` are computed in the
direction x -> y; every directional feature has a ``*_yx`` twin and the
``*_sub`` features are exactly ``xy - yx``. The reversal ``kind`` column
defines how the vector transforms when the pair is read in the opposite
direction (j, i): ``sym`` unchanged, ``swap:<name>`` exchanged with its
twin, ``neg`` negated.

Moments are standardized mixed moments: moment21_xy = E[x_s^2 * y_s] and
moment31_xy = E[x_s^3 * y_s] on population-standardized columns; the exact
form is not pinned by any external definition and alternatives (central
cross-moments of other orders) were considered and rejected for symmetry
of implementation. "Normalized error probability" is
err_xy / (err_xy + err_yx) (0.5 when both fit errors are zero), where
err is the degree-3 polynomial RMS fit error.

The last 3 slots hold the causal-pairs prior triple (p_rev, p_none, p_fwd)
from a pluggable provider; they always sum to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from . import features as ft
from .dataset import DataMatrix

SCHEMA_VERSION = "efs-1"

NODE_FEATURES: tuple[str, ...] = (
    "min", "max", "numerical_type", "n_unique", "unique_ratio", "log_n",
    "norm_entropy", "norm_entropy_baseline", "uniform_div",
    "discrete_entropy", "norm_discrete_entropy", "skewness", "kurtosis",
)

# (name, kind) with kind in {"sym", "neg", "swap:<twin name>"}
EDGE_FEATURES: tuple[tuple[str, str], ...] = (
    # information-theoretic
    ("joint_entropy", "sym"),
    ("norm_joint_entropy", "sym"),
    ("mutual_information", "sym"),
    ("adjusted_mutual_information", "sym"),
    ("normalized_mutual_information", "sym"),
    ("cond_entropy_x_given_y", "swap:cond_entropy_y_given_x"),
    ("cond_entropy_y_given_x", "swap:cond_entropy_x_given_y"),
    ("uniform_div_x", "swap:uniform_div_y"),
    ("uniform_div_y", "swap:uniform_div_x"),
    ("uniform_div_sub", "neg"),
    # regression-based
    ("poly_fit_xy", "swap:poly_fit_yx"),
    ("poly_fit_yx", "swap:poly_fit_xy"),
    ("poly_err_xy", "swap:poly_err_yx"),
    ("poly_err_yx", "swap:poly_err_xy"),
    ("poly_err_sub", "neg"),
    ("norm_err_prob_xy", "swap:norm_err_prob_yx"),
    ("norm_err_prob_yx", "swap:norm_err_prob_xy"),
    ("norm_err_prob_sub", "neg"),
    # moment-based
    ("moment21_xy", "swap:moment21_yx"),
    ("moment21_yx", "swap:moment21_xy"),
    ("moment21_sub", "neg"),
    ("moment21_sub_abs", "sym"),
    ("moment31_xy", "swap:moment31_yx"),
    ("moment31_yx", "swap:moment31_xy"),
    ("moment31_sub", "neg"),
    ("moment31_sub_abs", "sym"),
    # conditional-distribution metrics (per-bin stat variance)
    ("cond_entropy_var_xy", "swap:cond_entropy_var_yx"),
    ("cond_entropy_var_yx", "swap:cond_entropy_var_xy"),
    ("cond_skew_var_xy", "swap:cond_skew_var_yx"),
    ("cond_skew_var_yx", "swap:cond_skew_var_xy"),
    ("cond_kurt_var_xy", "swap:cond_kurt_var_yx"),
    ("cond_kurt_var_yx", "swap:cond_kurt_var_xy"),
    # correlation
    ("pearson", "sym"),
    ("pearson_abs", "sym"),
    # node-pair comparisons
    ("unique_max", "sym"),
    ("unique_min", "sym"),
    ("unique_diff", "neg"),
    ("norm_entropy_max", "sym"),
    ("norm_entropy_min", "sym"),
    ("norm_entropy_diff", "neg"),
    # other
    ("hsic", "sym"),
    ("igci_sub", "neg"),
    ("kurtosis_diff_abs", "sym"),
    # causal-pairs prior
    ("cp_rev", "swap:cp_fwd"),
    ("cp_none", "sym"),
    ("cp_fwd", "swap:cp_rev"),
)

EDGE_DIM = len(EDGE_FEATURES)
NODE_DIM = len(NODE_FEATURES)
EDGE_INDEX = {name: k for k, (name, _) in enumerate(EDGE_FEATURES)}
CP_SLOTS = (EDGE_INDEX["cp_rev"], EDGE_INDEX["cp_none"], EDGE_INDEX["cp_fwd"])


def _reversal_maps() -> tuple[np.ndarray, np.ndarray]:
    perm = np.arange(EDGE_DIM)
    sign = np.ones(EDGE_DIM)
    for k, (name, kind) in enumerate(EDGE_FEATURES):
        if kind == "neg":
            sign[k] = -1.0
        elif kind.startswith("swap:"):
            perm[k] = EDGE_INDEX[kind[5:]]
    return perm, sign


REVERSE_PERM, REVERSE_SIGN = _reversal_maps()


def reverse_edge_vector(vec: np.ndarray) -> np.ndarray:
    """Edge vector of pair (j, i) given the canonical (i, j) vector."""
    return vec[..., REVERSE_PERM] * REVERSE_SIGN


class SchemaError(ValueError):
    pass


def pair_row(i: int, j: int, d: int) -> int:
    """Row index of canonical pair (i, j), i < j, in lexicographic order."""
    if not (0 <= i < j < d):
        raise ValueError(f"invalid pair ({i},{j}) for d={d}")
    return i * (2 * d - i - 1) // 2 + (j - i - 1)


def row_pairs(d: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


@dataclass(frozen=True)
class FeatureGraph:
    """Fully connected graph over d variables with frozen feature schemas."""

    d: int
    node_feats: np.ndarray  # d x NODE_DIM
    edge_feats: np.ndarray  # d(d-1)/2 x EDGE_DIM, canonical pair order
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self) -> None:
        nf = np.asarray(self.node_feats, dtype=np.float64)
        ef = np.asarray(self.edge_feats, dtype=np.float64)
        object.__setattr__(self, "node_feats", nf)
        object.__setattr__(self, "edge_feats", ef)
        n_pairs = self.d * (self.d - 1) // 2
        if nf.shape != (self.d, NODE_DIM):
            raise SchemaError(f"node_feats shape {nf.shape}, expected {(self.d, NODE_DIM)}")
        if ef.shape != (n_pairs, EDGE_DIM):
            raise SchemaError(f"edge_feats shape {ef.shape}, expected {(n_pairs, EDGE_DIM)}")
        if not (np.all(np.isfinite(nf)) and np.all(np.isfinite(ef))):
            raise SchemaError("non-finite feature values")

    def edge_row(self, i: int, j: int) -> np.ndarray:
        return self.edge_feats[pair_row(i, j, self.d)]


def node_feature_vector(x: np.ndarray) -> np.ndarray:
    n = len(x)
    bins = ft.default_bins(n)
    n_unique = int(np.unique(x).size)
    labels = ft.discretize(x, bins)
    return np.array([
        float(np.min(x)),
        float(np.max(x)),
        1.0 if n_unique > 2 * bins else 0.0,
        float(n_unique),
        n_unique / n,
        float(np.log(n)),
        ft.histogram_entropy(x, bins) / float(np.log(bins)),
        float(np.log(bins)),
        ft.uniform_divergence(x, bins),
        ft.discrete_entropy(labels),
        ft.normalized_discrete_entropy(labels),
        ft.skewness(x),
        ft.kurtosis(x),
    ])


def base_edge_feature_vector(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """All edge features for (x, y) except the 3 causal-pairs slots
    (returned as zeros).
    """
    n = len(x)
    bins = ft.default_bins(n)
    xl = ft.discretize(x, bins)
    yl = ft.discretize(y, bins)

    udx = ft.uniform_divergence(x, bins)
    udy = ft.uniform_divergence(y, bins)

    _, err_xy = ft.polynomial_fit(x, y)
    _, err_yx = ft.polynomial_fit(y, x)
    xs = ft._standardize_col(x)
    ys = ft._standardize_col(y)
    fit_xy = 1.0 - err_xy ** 2  # R^2 against unit-variance target
    fit_yx = 1.0 - err_yx ** 2
    tot = err_xy + err_yx
    nep_xy = err_xy / tot if tot > 0 else 0.5
    nep_yx = err_yx / tot if tot > 0 else 0.5

    m21_xy = float(np.mean(xs ** 2 * ys))
    m21_yx = float(np.mean(ys ** 2 * xs))
    m31_xy = float(np.mean(xs ** 3 * ys))
    m31_yx = float(np.mean(ys ** 3 * xs))

    nux = int(np.unique(x).size)
    nuy = int(np.unique(y).size)
    nhx = ft.histogram_entropy(x, bins) / float(np.log(bins))
    nhy = ft.histogram_entropy(y, bins) / float(np.log(bins))
    r = ft.pearson(x, y)

    vec = np.zeros(EDGE_DIM)
    vals = {
        "joint_entropy": ft.joint_entropy(xl, yl),
        "norm_joint_entropy": ft.normalized_joint_entropy(xl, yl),
        "mutual_information": ft.mutual_information(xl, yl),
        "adjusted_mutual_information": ft.adjusted_mutual_information(xl, yl),
        "normalized_mutual_information": ft.normalized_mutual_information(xl, yl),
        "cond_entropy_x_given_y": ft.conditional_entropy(xl, yl),
        "cond_entropy_y_given_x": ft.conditional_entropy(yl, xl),
        "uniform_div_x": udx,
        "uniform_div_y": udy,
        "uniform_div_sub": udx - udy,
        "poly_fit_xy": fit_xy,
        "poly_fit_yx": fit_yx,
        "poly_err_xy": err_xy,
        "poly_err_yx": err_yx,
        "poly_err_sub": err_xy - err_yx,
        "norm_err_prob_xy": nep_xy,
        "norm_err_prob_yx": nep_yx,
        "norm_err_prob_sub": nep_xy - nep_yx,
        "moment21_xy": m21_xy,
        "moment21_yx": m21_yx,
        "moment21_sub": m21_xy - m21_yx,
        "moment21_sub_abs": abs(m21_xy - m21_yx),
        "moment31_xy": m31_xy,
        "moment31_yx": m31_yx,
        "moment31_sub": m31_xy - m31_yx,
        "moment31_sub_abs": abs(m31_xy - m31_yx),
        "cond_entropy_var_xy": ft.conditional_stat_variance(y, x, bins, "entropy"),
        "cond_entropy_var_yx": ft.conditional_stat_variance(x, y, bins, "entropy"),
        "cond_skew_var_xy": ft.conditional_stat_variance(y, x, bins, "skewness"),
        "cond_skew_var_yx": ft.conditional_stat_variance(x, y, bins, "skewness"),
        "cond_kurt_var_xy": ft.conditional_stat_variance(y, x, bins, "kurtosis"),
        "cond_kurt_var_yx": ft.conditional_stat_variance(x, y, bins, "kurtosis"),
        "pearson": r,
        "pearson_abs": abs(r),
        "unique_max": float(max(nux, nuy)),
        "unique_min": float(min(nux, nuy)),
        "unique_diff": float(nux - nuy),
        "norm_entropy_max": max(nhx, nhy),
        "norm_entropy_min": min(nhx, nhy),
        "norm_entropy_diff": nhx - nhy,
        "hsic": ft.hsic(x, y),
        "igci_sub": ft.igci_subtracted(x, y),
        "kurtosis_diff_abs": abs(ft.kurtosis(x) - ft.kurtosis(y)),
    }
    for name, val in vals.items():
        vec[EDGE_INDEX[name]] = val
    return vec


class UniformPrior:
    """Placeholder causal-pairs provider: (1/3, 1/3, 1/3) for every pair."""

    name = "uniform"

    def __call__(self, base_vec: np.ndarray) -> tuple[float, float, float]:
        return (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


class LogisticPrior:
    """Multinomial logistic model over the base pairwise features, trained
    on a synthetic corpus with known edge labels in {-1, 0, +1}.
    """

    name = "logistic"

    def __init__(self) -> None:
        self._model = make_pipeline(
            StandardScaler(),
            LogisticRegression(max_iter=2000, C=1.0, random_state=0),
        )
        self._fitted = False

    def fit(self, base_vectors: np.ndarray, labels: np.ndarray) -> "LogisticPrior":
        labels = np.asarray(labels)
        if set(np.unique(labels)) != {-1, 0, 1}:
            raise ValueError("training labels must cover all of {-1, 0, 1}")
        x = np.asarray(base_vectors)[:, : min(CP_SLOTS)]
        self._model.fit(x, labels)
        self._fitted = True
        return self

    def __call__(self, base_vec: np.ndarray) -> tuple[float, float, float]:
        if not self._fitted:
            raise RuntimeError("LogisticPrior used before fit()")
        p = self._model.predict_proba(
            np.asarray(base_vec)[None, : min(CP_SLOTS)])[0]
        # classes_ is sorted [-1, 0, 1] -> (p_rev, p_none, p_fwd)
        return (float(p[0]), float(p[1]), float(p[2]))


def build_feature_graph(data: DataMatrix, provider=None) -> FeatureGraph:
    """Node features for all columns, edge features for all canonical pairs."""
    if provider is None:
        provider = UniformPrior()
    d = data.d
    node = np.stack([node_feature_vector(data.values[:, i]) for i in range(d)])
    rows = []
    for i, j in row_pairs(d):
        vec = base_edge_feature_vector(data.values[:, i], data.values[:, j])
        triple = provider(vec)
        s = sum(triple)
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"causal-pairs prior does not sum to 1: {triple}")
        for slot, val in zip(CP_SLOTS, triple):
            vec[slot] = val
        rows.append(vec)
    return FeatureGraph(d, node, np.stack(rows))


def permute_feature_graph(fg: FeatureGraph, perm: list[int]) -> FeatureGraph:
    """Relabel nodes by ``perm`` (node i becomes perm[i]), moving edge rows
    to their new canonical pairs and applying the schema reversal map where
    the canonical order flips.
    """
    d = fg.d
    node = np.empty_like(fg.node_feats)
    for i in range(d):
        node[perm[i]] = fg.node_feats[i]
    edge = np.empty_like(fg.edge_feats)
    for i, j in row_pairs(d):
        vec = fg.edge_row(i, j)
        a, b = perm[i], perm[j]
        if a < b:
            edge[pair_row(a, b, d)] = vec
        else:
            edge[pair_row(b, a, d)] = reverse_edge_vector(vec)
    return FeatureGraph(d, node, edge, fg.schema_version)


def save_feature_graph(fg: FeatureGraph, path: str) -> None:
    """Structured text, lossless float round-trip."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"d={fg.d}\n")
        fh.write(f"schema={fg.schema_version}\n")
        fh.write("[nodes]\n")
        for row in fg.node_feats:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
        fh.write("[edges]\n")
        for row in fg.edge_feats:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_feature_graph(path: str) -> FeatureGraph:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 4 or not lines[0].startswith("d=") or not lines[1].startswith("schema="):
        raise SchemaError(f"{path}: malformed feature graph file")
    d = int(lines[0][2:])
    schema = lines[1][len("schema="):]
    if schema != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema {schema!r} does not match supported {SCHEMA_VERSION!r}")
    if lines[2] != "[nodes]":
        raise SchemaError(f"{path}: expected [nodes] block")
    node_lines = lines[3:3 + d]
    if lines[3 + d] != "[edges]":
        raise SchemaError(f"{path}: expected [edges] block")
    edge_lines = lines[4 + d:]
    node = np.array([[float(v) for v in ln.split(",")] for ln in node_lines])
    edge = np.array([[float(v) for v in ln.split(",")] for ln in edge_lines])
    return FeatureGraph(d, node, edge, schema)
