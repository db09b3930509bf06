"""Structure-learning metrics against a ground-truth DAG.

Conventions (frozen): a reversal costs 1 in SHD; the FPR denominator is the
number of unordered pairs non-adjacent in the truth and its numerator
counts both extra and reversed edges; a predicted 2-cycle on a true edge
counts one correct and one extra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graphs import Dag, Digraph


@dataclass(frozen=True)
class EdgeBreakdown:
    predicted: int
    correct: int
    reversed: int
    extra: int
    missing: int


def edge_breakdown(pred: Digraph | Dag, truth: Dag) -> EdgeBreakdown:
    if pred.d != truth.d:
        raise ValueError(f"dimension mismatch: pred d={pred.d}, truth d={truth.d}")
    correct = reversed_ = extra = missing = 0
    seen_pairs = set()
    for a, b in pred.edges:
        pair = (min(a, b), max(a, b))
        seen_pairs.add(pair)
        if (a, b) in truth.edges:
            correct += 1
        elif (b, a) in truth.edges:
            if (b, a) in pred.edges:
                extra += 1  # 2-cycle on a true edge: the true one is correct
            else:
                reversed_ += 1
        else:
            extra += 1
    for a, b in truth.edges:
        if (a, b) not in pred.edges and (b, a) not in pred.edges:
            missing += 1
    return EdgeBreakdown(len(pred.edges), correct, reversed_, extra, missing)


def shd(pred: Digraph | Dag, truth: Dag) -> int:
    """Structural Hamming distance: extra + missing + reversed."""
    b = edge_breakdown(pred, truth)
    return b.extra + b.missing + b.reversed


def shd_per_d(pred: Digraph | Dag, truth: Dag) -> float:
    return shd(pred, truth) / truth.d


def tpr(pred: Digraph | Dag, truth: Dag) -> float:
    """correct / #true edges; NaN when the truth has no edges."""
    b = edge_breakdown(pred, truth)
    if len(truth.edges) == 0:
        return math.nan
    return b.correct / len(truth.edges)


def fpr(pred: Digraph | Dag, truth: Dag) -> float:
    """(extra + reversed) / #unordered pairs non-adjacent in truth; NaN
    when every pair is adjacent.
    """
    b = edge_breakdown(pred, truth)
    non_adjacent = truth.d * (truth.d - 1) // 2 - len(truth.edges)
    if non_adjacent == 0:
        return math.nan
    return (b.extra + b.reversed) / non_adjacent
