"""Distributional comparison utilities for topic and style analyses.

Jensen-Shannon distances use base-2 logarithms so they live in [0, 1].
Style comparisons project 5-column score matrices onto the first principal
axis of a reference group and measure Cohen's d between projections.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata


def _as_distribution(p, tol: float = 1e-9) -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.ndim != 1:
        raise ValueError("distribution must be a 1-D vector")
    if np.any(v < 0):
        raise ValueError("distribution has negative entries")
    if abs(v.sum() - 1.0) > tol:
        raise ValueError(f"distribution sums to {v.sum()!r}, not 1")
    return v


def js_distance(p, q) -> float:
    """Jensen-Shannon distance: sqrt of the base-2 JS divergence.

    Uses the 0*log(0) = 0 convention; 0 iff p == q, 1 for disjoint support.
    """
    p = _as_distribution(p)
    q = _as_distribution(q)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / b[mask])))

    divergence = 0.5 * kl(p, m) + 0.5 * kl(q, m)
    return math.sqrt(max(divergence, 0.0))


def fit_pca_axis(matrix) -> tuple[np.ndarray, np.ndarray]:
    """First principal axis of a score matrix, plus the column means.

    Exact eigendecomposition of the small covariance matrix; the axis sign
    is fixed by making its largest-magnitude component positive.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two rows")
    means = X.mean(axis=0)
    centered = X - means
    cov = centered.T @ centered / (X.shape[0] - 1)
    if np.allclose(cov, 0):
        raise ValueError("zero variance: no principal axis")
    eigvals, eigvecs = np.linalg.eigh(cov)
    axis = eigvecs[:, -1]
    pivot = int(np.argmax(np.abs(axis)))
    if axis[pivot] < 0:
        axis = -axis
    return axis, means


def project(axis, column_means, matrix) -> np.ndarray:
    """Centered projections of matrix rows onto a fitted axis.

    The axis and means should come from the reference group so all groups
    land on a common scale.
    """
    axis = np.asarray(axis, dtype=float)
    means = np.asarray(column_means, dtype=float)
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[1] != axis.shape[0] or means.shape[0] != axis.shape[0]:
        raise ValueError("dimension mismatch between axis, means, and matrix")
    return (X - means) @ axis


class CohensD(NamedTuple):
    abs: float
    signed: float


def cohens_d(a, b) -> CohensD:
    """Cohen's d with pooled standard deviation; absolute and signed values.

    Zero pooled deviation yields 0 for equal means and an infinite flagged
    sentinel otherwise.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) < 2 or len(y) < 2:
        raise ValueError("cohens_d: need at least two values per group")
    na, nb = len(x), len(y)
    pooled_var = ((na - 1) * x.var(ddof=1) + (nb - 1) * y.var(ddof=1)) / (na + nb - 2)
    diff = x.mean() - y.mean()
    if pooled_var == 0:
        if diff == 0:
            return CohensD(0.0, 0.0)
        return CohensD(math.inf, math.copysign(math.inf, diff))
    d = diff / math.sqrt(pooled_var)
    return CohensD(abs(d), d)


def spearman(x, y) -> float | None:
    """Spearman rank correlation; ties get average ranks.

    Returns None for constant input (undefined, reported as absent).
    """
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("spearman: need two equal-length vectors of length >= 2")
    ra = rankdata(a)
    rb = rankdata(b)
    if ra.std() == 0 or rb.std() == 0:
        return None
    return float(np.corrcoef(ra, rb)[0, 1])


def mean_topic_distribution(matrix) -> np.ndarray:
    """Pool per-item topic distributions into one normalized distribution."""
    X = np.asarray(matrix, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    pooled = X.mean(axis=0)
    total = pooled.sum()
    if total <= 0:
        raise ValueError("cannot pool: zero total mass")
    return pooled / total


def shift_report(ap_topics, pre_topics, post_topics,
                 ap_styles, pre_styles, post_styles) -> dict[str, tuple[float, float]]:
    """Topic and style distances of pre/post groups to the reference group.

    Topic distances are Jensen-Shannon between mean-pooled distributions;
    style distances are |Cohen's d| between projections onto the principal
    axis fitted on the reference styles only.
    """
    ap_pool = mean_topic_distribution(ap_topics)
    topic = (
        js_distance(mean_topic_distribution(pre_topics), ap_pool),
        js_distance(mean_topic_distribution(post_topics), ap_pool),
    )
    axis, means = fit_pca_axis(ap_styles)
    ap_proj = project(axis, means, ap_styles)
    style = (
        cohens_d(project(axis, means, pre_styles), ap_proj).abs,
        cohens_d(project(axis, means, post_styles), ap_proj).abs,
    )
    return {"topic": topic, "style": style}


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a delimited numeric matrix (CSV, no header)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in csv.reader(fh):
            if line:
                rows.append([float(x) for x in line])
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    return np.asarray(rows, dtype=float)


def write_shift_report(report: dict[str, tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["component", "d_pre", "d_post"])
        for component in sorted(report):
            d_pre, d_post = report[component]
            writer.writerow([component, format(d_pre, ".10g"), format(d_post, ".10g")])
