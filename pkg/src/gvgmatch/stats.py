"""Accuracy against ground truth, the paired signed-rank test and table aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

EXACT_MAX_N = 12


@dataclass(frozen=True)
class GroundTruth:
    """``target[i]`` is the node of B that node ``i`` of A should map to, or -1."""

    target: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.target, dtype=np.int64).reshape(-1)
        known = t[t >= 0]
        if len(np.unique(known)) != len(known):
            raise ValueError("ground truth must be injective")
        object.__setattr__(self, "target", t)

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    @classmethod
    def from_permutation(cls, perm):
        """Truth for ``A = B.permute_nodes(perm)``: node ``perm[i]`` of A is node ``i`` of B."""
        perm = np.asarray(perm, dtype=np.int64)
        target = np.empty_like(perm)
        target[perm] = np.arange(len(perm))
        return cls(target)

    @classmethod
    def from_labels(cls, labels_a, labels_b):
        """Pair nodes carrying the same (non-empty) label; labels occurring more
        than once on either side are ignored."""
        def unique_index(labels):
            seen = {}
            for i, lab in enumerate(labels):
                if lab:
                    seen.setdefault(lab, []).append(i)
            return {lab: idx[0] for lab, idx in seen.items() if len(idx) == 1}

        ia, ib = unique_index(labels_a), unique_index(labels_b)
        target = np.full(len(labels_a), -1, dtype=np.int64)
        for lab, i in ia.items():
            if lab in ib:
                target[i] = ib[lab]
        return cls(target)

    @property
    def n_pairs(self):
        return int(np.sum(self.target >= 0))


def matching_accuracy(permutation, truth: GroundTruth) -> float:
    """Percentage of truth pairs reproduced; unassigned nodes count as wrong."""
    perm = np.asarray(getattr(permutation, "permutation", permutation), dtype=np.int64)
    rows = np.flatnonzero(truth.target >= 0)
    if len(rows) == 0:
        raise ValueError("ground truth has no pairs")
    hits = 0
    for i in rows:
        hits += int(i < len(perm) and perm[i] == truth.target[i])
    return 100.0 * hits / len(rows)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str  # "exact", "normal" or "degenerate"


def _exact_null_cdf(doubled_ranks, w_doubled):
    """P(W+ <= w) under the null, by counting sign patterns (ranks doubled to integers)."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    return float(counts[:w_doubled + 1].sum() / counts.sum())


def wilcoxon_signed_rank(a, b, exact_max: int = EXACT_MAX_N) -> WilcoxonResult:
    """Two-sided paired signed-rank test on ``a - b``.

    Zero differences are dropped, tied magnitudes get midranks and the
    statistic is ``min(W+, W-)``. Up to ``exact_max`` non-zero differences the
    p-value is exact (enumeration of sign patterns, done as a subset-sum
    count); above it a normal approximation with tie and continuity
    corrections is used.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two pairs")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    W = min(w_plus, w_minus)
    if n <= exact_max:
        doubled = [int(round(2 * r)) for r in ranks]
        p = 2.0 * _exact_null_cdf(doubled, int(round(2 * W)))
        return WilcoxonResult(W, min(1.0, p), n, "exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return WilcoxonResult(W, 1.0, n, "degenerate")
    z = (W - mean + 0.5) / math.sqrt(var)
    z = min(z, 0.0)
    p = math.erfc(-z / math.sqrt(2.0))
    return WilcoxonResult(W, min(1.0, p), n, "normal")


@dataclass(frozen=True)
class CellSummary:
    n: int
    mean: float
    sd: float
    median: float
    failures: int = 0

    def format(self, digits=2):
        if self.n == 0:
            return "n/a"
        return f"{self.mean:.{digits}f} ± {self.sd:.{digits}f} ({self.median:.{digits}f})"


def describe(values, failures=0) -> CellSummary:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if len(v) == 0:
        return CellSummary(0, math.nan, math.nan, math.nan, failures)
    sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    return CellSummary(len(v), float(v.mean()), sd, float(np.median(v)), failures)
