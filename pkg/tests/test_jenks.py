from __future__ import annotations

import itertools

import numpy as np
import pytest

from identity_effects.jenks import assign_classes, jenks_breaks


def exhaustive_jenks(values, k):
    """Independent oracle: enumerate every contiguous partition of the sorted
    multiset, minimize total within-class squared deviation, break ties toward
    the lexicographically smallest breakpoint value vector."""
    v = sorted(float(x) for x in values)
    n = len(v)
    best_key = None
    for cuts in itertools.combinations(range(1, n), k - 1):
        total = 0.0
        for a, b in zip((0,) + cuts, cuts + (n,)):
            seg = v[a:b]
            mean = sum(seg) / len(seg)
            total += sum((x - mean) ** 2 for x in seg)
        key = (total, tuple(v[c] for c in cuts))
        if best_key is None or key < best_key:
            best_key = key
    return list(best_key[1])


def partition_cost(values, breaks):
    v = np.sort(np.asarray(values, dtype=float))
    classes = assign_classes(v, breaks)
    total = 0.0
    for c in np.unique(classes):
        seg = v[classes == c]
        total += float(np.sum((seg - seg.mean()) ** 2))
    return total


def test_spec_examples():
    assert jenks_breaks([1, 2, 3, 10, 11, 12], 2) == [10.0]
    assert jenks_breaks([1, 2, 3, 10, 11, 12, 100, 101], 3) == [10.0, 100.0]
    assert jenks_breaks([5, 1, 3], 1) == []


def test_k_exceeding_distinct_values_rejected():
    with pytest.raises(ValueError):
        jenks_breaks([1.0, 1.0, 2.0], 3)
    with pytest.raises(ValueError):
        jenks_breaks([1.0], 2)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        jenks_breaks([1.0, float("nan")], 1)


def test_matches_exhaustive_oracle_continuous():
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 500:
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, min(4, n) + 1))
        values = rng.uniform(0, 1, size=n)
        if k > len(np.unique(values)):
            continue
        assert jenks_breaks(values, k) == exhaustive_jenks(values, k), \
            (values.tolist(), k)
        checked += 1


def test_matches_oracle_cost_with_duplicates():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(2, 13))
        values = rng.integers(0, 6, size=n).astype(float)
        kmax = min(4, len(np.unique(values)))
        k = int(rng.integers(1, kmax + 1))
        got = jenks_breaks(values, k)
        want = exhaustive_jenks(values, k)
        assert partition_cost(values, got) == pytest.approx(
            partition_cost(values, want), abs=1e-9)


def test_matches_full_scan_dp_at_scale():
    # full-scan quadratic DP cross-checks the divide-and-conquer recursion
    def plain_dp(values, k):
        v = np.sort(np.asarray(values, dtype=float))
        n = len(v)
        S = np.concatenate([[0.0], np.cumsum(v)])
        Q = np.concatenate([[0.0], np.cumsum(v * v)])

        def cost(a, b):
            return Q[b] - Q[a] - (S[b] - S[a]) ** 2 / (b - a)

        INF = float("inf")
        dp = [[INF] * (n + 1) for _ in range(k + 1)]
        choice = [[-1] * (n + 1) for _ in range(k + 1)]
        for i in range(n):
            dp[1][i] = cost(i, n)
        for j in range(2, k + 1):
            for i in range(0, n - j + 1):
                best, bestm = INF, -1
                for m in range(i + 1, n - j + 2):
                    c = cost(i, m) + dp[j - 1][m]
                    if c < best:
                        best, bestm = c, m
                dp[j][i] = best
                choice[j][i] = bestm
        breaks, i = [], 0
        for j in range(k, 1, -1):
            m = choice[j][i]
            breaks.append(float(v[m]))
            i = m
        return breaks

    rng = np.random.default_rng(11)
    for case in range(40):
        n = int(rng.integers(30, 200))
        if case % 2:
            values = rng.uniform(0, 1, size=n)
        else:
            values = rng.integers(0, 25, size=n).astype(float)
        k = int(rng.integers(1, min(9, len(np.unique(values))) + 1))
        assert jenks_breaks(values, k) == plain_dp(values, k)


def test_classes_contiguous_and_intervals_partition():
    rng = np.random.default_rng(3)
    values = rng.uniform(0, 1, size=200)
    breaks = jenks_breaks(values, 7)
    assert len(breaks) == 6
    assert breaks == sorted(breaks)
    classes = assign_classes(np.sort(values), breaks)
    assert (np.diff(classes) >= 0).all()
    assert set(np.unique(classes)) == set(range(7))
