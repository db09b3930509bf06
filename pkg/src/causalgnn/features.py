"""Statistical and information-theoretic estimators over data columns.

All discrete estimators share one binning rule: B = clamp(round(n^(1/3)), 8, 32)
quantile (equal-frequency) bins. Entropies are in nats.
"""

from __future__ import annotations

import numpy as np
from scipy import stats
from sklearn.metrics import adjusted_mutual_info_score

HSIC_SUBSAMPLE = 500
HSIC_SEED = 20240117  # fixed constant: deterministic subsample across calls


def default_bins(n: int) -> int:
    """Cube-root histogram heuristic, clamped to [8, 32]."""
    return int(min(32, max(8, round(n ** (1.0 / 3.0)))))


def discretize(x: np.ndarray, bins: int) -> np.ndarray:
    """Quantile-bin labels in [0, bins). Ties may collapse bins."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    x = np.asarray(x, dtype=np.float64)
    edges = np.quantile(x, [k / bins for k in range(1, bins)])
    return np.searchsorted(edges, x, side="left").astype(np.int64)


def _counts(labels: np.ndarray) -> np.ndarray:
    _, counts = np.unique(labels, return_counts=True)
    return counts


def discrete_entropy(labels: np.ndarray) -> float:
    """H = -sum p ln p over empirical label frequencies."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty label array")
    p = _counts(labels) / labels.size
    return float(-np.sum(p * np.log(p)))


def normalized_discrete_entropy(labels: np.ndarray) -> float:
    """discrete_entropy / ln(#distinct labels); 0 when one label."""
    k = np.unique(labels).size
    if k <= 1:
        return 0.0
    return discrete_entropy(labels) / float(np.log(k))


def _joint_labels(x_labels: np.ndarray, y_labels: np.ndarray) -> np.ndarray:
    if len(x_labels) != len(y_labels):
        raise ValueError("label arrays must have equal length")
    span = int(np.max(y_labels)) + 1 if len(y_labels) else 1
    return np.asarray(x_labels) * span + np.asarray(y_labels)


def joint_entropy(x_labels: np.ndarray, y_labels: np.ndarray) -> float:
    return discrete_entropy(_joint_labels(x_labels, y_labels))


def normalized_joint_entropy(x_labels: np.ndarray, y_labels: np.ndarray) -> float:
    return normalized_discrete_entropy(_joint_labels(x_labels, y_labels))


def mutual_information(x_labels: np.ndarray, y_labels: np.ndarray) -> float:
    """I(X;Y) = H(X) + H(Y) - H(X,Y)."""
    return (discrete_entropy(x_labels) + discrete_entropy(y_labels)
            - joint_entropy(x_labels, y_labels))


def adjusted_mutual_information(x_labels: np.ndarray, y_labels: np.ndarray) -> float:
    """Chance-corrected mutual information (standard AMI)."""
    return float(adjusted_mutual_info_score(x_labels, y_labels))


def normalized_mutual_information(x_labels: np.ndarray, y_labels: np.ndarray) -> float:
    """I(X;Y) / max(H(X), H(Y)); 0 when that max is 0."""
    hmax = max(discrete_entropy(x_labels), discrete_entropy(y_labels))
    if hmax <= 0.0:
        return 0.0
    return mutual_information(x_labels, y_labels) / hmax


def conditional_entropy(x_labels: np.ndarray, y_labels: np.ndarray) -> float:
    """H(X|Y) = H(X,Y) - H(Y)."""
    return joint_entropy(x_labels, y_labels) - discrete_entropy(y_labels)


def histogram_entropy(x: np.ndarray, bins: int) -> float:
    """Entropy of an equal-width histogram (empty bins contribute 0)."""
    counts, _ = np.histogram(x, bins=bins)
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def uniform_divergence(x: np.ndarray, bins: int) -> float:
    """KL(empirical equal-width bins || uniform) = ln(bins) - H_hist."""
    return float(np.log(bins)) - histogram_entropy(x, bins)


def _standardize_col(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    s = x.std()
    if s == 0.0:
        return np.zeros_like(x)
    return (x - x.mean()) / s


def polynomial_fit(x: np.ndarray, y: np.ndarray, degree: int = 3
                   ) -> tuple[np.ndarray, float]:
    """Least-squares polynomial predicting y from x; inputs standardized
    internally. Returns (coefficients highest-order-first, RMS residual).
    Normal equations are ridge-regularized (1e-8) so rank deficiency never
    raises.
    """
    x = _standardize_col(x)
    y = _standardize_col(y)
    if len(x) <= degree + 1:
        raise ValueError(f"need more than degree+1={degree + 1} samples")
    v = np.vander(x, degree + 1)
    a = v.T @ v + 1e-8 * np.eye(degree + 1)
    coef = np.linalg.solve(a, v.T @ y)
    resid = y - v @ coef
    return coef, float(np.sqrt(np.mean(resid ** 2)))


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; 0 for constant inputs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return max(-1.0, min(1.0, r))


def _gaussian_gram(v: np.ndarray) -> np.ndarray:
    d2 = (v[:, None] - v[None, :]) ** 2
    tri = d2[np.triu_indices_from(d2, k=1)]
    pos = tri[tri > 0]
    if pos.size == 0:
        return np.ones_like(d2)
    sigma = float(np.sqrt(np.median(pos)))
    return np.exp(-d2 / (2.0 * sigma * sigma))


def hsic(x: np.ndarray, y: np.ndarray) -> float:
    """Biased HSIC with Gaussian kernels, median-distance bandwidth per
    variable, on a deterministic subsample of min(n, 500) points.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n < 4:
        raise ValueError("hsic needs n >= 4")
    if n > HSIC_SUBSAMPLE:
        idx = np.random.default_rng(HSIC_SEED).permutation(n)[:HSIC_SUBSAMPLE]
        x, y = x[idx], y[idx]
    m = len(x)
    k = _gaussian_gram(x)
    l = _gaussian_gram(y)
    h = np.eye(m) - np.ones((m, m)) / m
    kc = h @ k @ h
    lc = h @ l @ h
    return float(np.sum(kc * lc) / (m * m))


def _igci_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Mean log |dy/dx| over consecutive points sorted by x, on
    min-max-rescaled data; degenerate pairs (zero dx or dy) are skipped.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    dx = np.diff(xs)
    dy = np.diff(ys)
    mask = (dx > 0) & (dy != 0)
    if not np.any(mask):
        return 0.0
    return float(np.mean(np.log(np.abs(dy[mask]) / dx[mask])))


def _rescale01(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def igci_subtracted(x: np.ndarray, y: np.ndarray) -> float:
    """Antisymmetric IGCI score: slope estimate x->y minus y->x, with a
    uniform reference measure (min-max rescaling). f(x,y) = -f(y,x) exactly.
    """
    if len(x) < 3:
        raise ValueError("igci needs n >= 3")
    xr, yr = _rescale01(x), _rescale01(y)
    return _igci_slope(xr, yr) - _igci_slope(yr, xr)


def skewness(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.std() == 0.0:
        return 0.0
    return float(stats.skew(x))


def kurtosis(x: np.ndarray) -> float:
    """Excess kurtosis (Fisher); 0 for constant input."""
    x = np.asarray(x, dtype=np.float64)
    if x.std() == 0.0:
        return 0.0
    return float(stats.kurtosis(x))


def conditional_stat_variance(x: np.ndarray, y: np.ndarray, bins: int,
                              stat: str) -> float:
    """Variance across quantile bins of y of a per-bin statistic of x.

    stat: 'entropy' (discrete entropy of x's global quantile labels within
    the bin), 'skewness', or 'kurtosis'.
    """
    y_labels = discretize(y, bins)
    x_labels = discretize(x, bins)
    vals = []
    for lab in np.unique(y_labels):
        sel = y_labels == lab
        if stat == "entropy":
            vals.append(discrete_entropy(x_labels[sel]))
        elif stat == "skewness":
            vals.append(skewness(x[sel]))
        elif stat == "kurtosis":
            vals.append(kurtosis(x[sel]))
        else:
            raise ValueError(f"unknown stat {stat!r}")
    return float(np.var(vals))
