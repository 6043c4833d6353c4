"""Fisher-Jenks natural breaks: exact 1-D partition minimizing within-class SSD.

The dynamic program is exact (not the heuristic Jenks-Caspall iteration) and
runs in O(k n log n) via divide-and-conquer over the monotone argmin
structure of the interval cost, so it handles tens of thousands of scores.
Ties between equal-cost partitions are broken toward the lexicographically
smallest breakpoint vector.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _jenks_dp(v, k):
    """Suffix DP tables for partitioning sorted v into k contiguous classes.

    dp[j, i] is the minimal cost of splitting v[i:] into j classes; choice
    stores the smallest start index of the next class achieving it. Choosing
    the smallest index at every level makes the forward reconstruction the
    lexicographically smallest optimal breakpoint vector.
    """
    n = v.shape[0]
    S = np.zeros(n + 1)
    Q = np.zeros(n + 1)
    for i in range(n):
        S[i + 1] = S[i] + v[i]
        Q[i + 1] = Q[i] + v[i] * v[i]

    dp = np.full((k + 1, n + 1), np.inf)
    choice = np.zeros((k + 1, n + 1), dtype=np.int64)
    for i in range(n):
        w = n - i
        dp[1, i] = Q[n] - Q[i] - (S[n] - S[i]) ** 2 / w

    for j in range(2, k + 1):
        # i ranges over [0, n - j]; remaining classes need one item each
        stack = [(0, n - j, 1, n - j + 1)]
        while stack:
            ilo, ihi, mlo, mhi = stack.pop()
            if ilo > ihi:
                continue
            mid = (ilo + ihi) // 2
            best = np.inf
            bestm = -1
            lo = mid + 1 if mid + 1 > mlo else mlo
            for m in range(lo, mhi + 1):
                w = m - mid
                c = Q[m] - Q[mid] - (S[m] - S[mid]) ** 2 / w + dp[j - 1, m]
                if c < best:
                    best = c
                    bestm = m
            dp[j, mid] = best
            choice[j, mid] = bestm
            stack.append((ilo, mid - 1, mlo, bestm))
            stack.append((mid + 1, ihi, bestm, mhi))
    return dp, choice


def jenks_breaks(values, k: int) -> list[float]:
    """k-1 breakpoints partitioning *values* into k optimal contiguous classes.

    Each breakpoint is the smallest value of the class above it, so class i
    of the partition is the half-open interval [breaks[i-1], breaks[i]).
    Raises ValueError when k exceeds the number of distinct values.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = v.shape[0]
    if n == 0:
        raise ValueError("jenks_breaks: empty input")
    if not np.all(np.isfinite(v)):
        raise ValueError("jenks_breaks: non-finite values")
    distinct = len(np.unique(v))
    if k < 1 or k > distinct:
        raise ValueError(f"jenks_breaks: k={k} outside [1, {distinct} distinct values]")
    if k == 1:
        return []
    dp, choice = _jenks_dp(v, k)
    breaks: list[float] = []
    i = 0
    for j in range(k, 1, -1):
        m = int(choice[j, i])
        breaks.append(float(v[m]))
        i = m
    return breaks


def assign_classes(values, breaks) -> np.ndarray:
    """Class index per value under the [lo, hi) interval convention."""
    return np.searchsorted(np.asarray(breaks, dtype=float),
                           np.asarray(values, dtype=float), side="right")
