from __future__ import annotations

import math

import numpy as np
import pytest

from identity_effects.distances import (
    cohens_d, fit_pca_axis, js_distance, mean_topic_distribution, project,
    shift_report, spearman)


class TestJsDistance:
    def test_identical(self):
        p = [0.2, 0.3, 0.5]
        assert js_distance(p, p) == 0.0

    def test_disjoint_is_one(self):
        assert js_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_hand_computed_mixture(self):
        assert js_distance([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5579, abs=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            js_distance([1.0], [0.5, 0.5])

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            js_distance([0.5, 0.6], [0.5, 0.5])

    def test_symmetric_triangle_and_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            dim = int(rng.integers(2, 8))
            def draw():
                v = rng.gamma(0.7, 1.0, size=dim) + 1e-12
                return v / v.sum()
            p, q, r = draw(), draw(), draw()
            dpq = js_distance(p, q)
            assert dpq == pytest.approx(js_distance(q, p), abs=1e-12)
            assert dpq <= js_distance(p, r) + js_distance(r, q) + 1e-9
            assert 0.0 <= dpq <= 1.0
        p = draw()
        assert js_distance(p, p.copy()) == 0.0


class TestPca:
    def test_single_column(self):
        axis, means = fit_pca_axis([[0.1], [0.4], [0.9]])
        assert axis == pytest.approx([1.0])

    def test_diagonal_line(self):
        pts = [[t, t] for t in (0.0, 0.25, 0.5, 0.75, 1.0)]
        axis, _ = fit_pca_axis(pts)
        assert np.abs(axis) == pytest.approx([math.sqrt(0.5)] * 2)
        assert axis[0] > 0

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            fit_pca_axis([[0.5, 0.5], [0.5, 0.5]])

    def test_matches_power_iteration_oracle(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, size=(60, 5))
        axis, means = fit_pca_axis(X)
        # independent oracle: power iteration on the covariance matrix
        C = np.cov(X - X.mean(axis=0), rowvar=False)
        v = np.ones(5) / math.sqrt(5)
        for _ in range(10_000):
            v = C @ v
            v /= np.linalg.norm(v)
        agreement = abs(float(v @ axis))
        assert agreement == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.norm(axis) == pytest.approx(1.0, abs=1e-12)

    def test_projection_variance_is_top_eigenvalue(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 1, size=(80, 5))
        axis, means = fit_pca_axis(X)
        proj = project(axis, means, X)
        eigvals = np.linalg.eigvalsh(np.cov(X, rowvar=False, ddof=1))
        assert proj.var(ddof=1) == pytest.approx(float(eigvals[-1]), abs=1e-10)

    def test_projection_maximal_among_random_directions(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 1, size=(50, 5))
        axis, means = fit_pca_axis(X)
        best = project(axis, means, X).var(ddof=1)
        for _ in range(200):
            u = rng.normal(size=5)
            u /= np.linalg.norm(u)
            assert project(u, means, X).var(ddof=1) <= best + 1e-12

    def test_project_examples(self):
        assert project([1.0, 0.0], [0.0, 0.0], [[3.0, 7.0]]) == pytest.approx([3.0])
        X = [[0.4, 0.4], [0.4, 0.4], [0.4, 0.4]]
        got = project([1.0, 0.0], np.mean(X, axis=0), X)
        assert got == pytest.approx([0.0, 0.0, 0.0])


class TestCohensD:
    def test_identical_groups(self):
        d = cohens_d([1, 2, 3], [1, 2, 3])
        assert d.abs == 0.0

    def test_hand_computed(self):
        d = cohens_d([1, 2, 3], [3, 4, 5])
        assert d.abs == pytest.approx(2.0)
        assert d.signed == pytest.approx(-2.0)

    def test_scale_invariance(self):
        a, b = [1.0, 2.0, 3.5], [2.0, 4.0, 4.5]
        assert cohens_d([10 * x for x in a], [10 * x for x in b]).abs \
            == pytest.approx(cohens_d(a, b).abs)

    def test_sign_flips_under_swap(self):
        a, b = [1.0, 2.0, 3.5], [2.0, 4.0, 4.5]
        assert cohens_d(a, b).signed == pytest.approx(-cohens_d(b, a).signed)

    def test_zero_pooled_sd(self):
        assert cohens_d([2, 2], [2, 2]).abs == 0.0
        assert cohens_d([2, 2], [3, 3]).abs == math.inf


class TestSpearman:
    def test_perfect(self):
        assert spearman([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)

    def test_perfect_negative(self):
        assert spearman([1, 2, 3], [9, 5, 1]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_constant_absent(self):
        assert spearman([1, 1, 1], [1, 2, 3]) is None

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        base = spearman(x, y)
        assert spearman(np.exp(x), y) == pytest.approx(base)
        assert spearman(x, 3 * y + 7) == pytest.approx(base)

    def test_ties_average_ranks(self):
        # with ties, matches the rank-then-Pearson definition
        x = [1.0, 1.0, 2.0, 3.0]
        y = [2.0, 1.0, 4.0, 4.0]
        from scipy.stats import rankdata

        rx, ry = rankdata(x), rankdata(y)
        expected = float(np.corrcoef(rx, ry)[0, 1])
        assert spearman(x, y) == pytest.approx(expected)


class TestShiftReport:
    def style_matrix(self, rng, loc, n=300):
        # a shared intensity factor keeps the reference principal axis stable
        factor = rng.normal(0.0, 0.1, size=(n, 1))
        noise = rng.normal(0.0, 0.03, size=(n, 5))
        return np.clip(loc + factor + noise, 0, 1)

    def topic_matrix(self, rng, alpha, n=200):
        X = rng.gamma(alpha, 1.0, size=(n, 10)) + 1e-9
        return X / X.sum(axis=1, keepdims=True)

    def test_identical_groups_all_zero(self):
        rng = np.random.default_rng(5)
        topics = self.topic_matrix(rng, np.ones(10))
        styles = self.style_matrix(rng, 0.5)
        report = shift_report(topics, topics, topics, styles, styles, styles)
        assert report["topic"] == (0.0, 0.0)
        assert report["style"][0] == pytest.approx(0.0)
        assert report["style"][1] == pytest.approx(0.0)

    def test_style_convergence_fixture(self):
        # post styles drawn from the reference distribution, pre offset away,
        # so style distance must strictly decrease; topics carry a persistent
        # group-level gap that the change leaves alone
        rng = np.random.default_rng(6)
        ap_alpha = np.ones(10)
        group_alpha = np.ones(10)
        group_alpha[0] = 1.6
        ap_topics = self.topic_matrix(rng, ap_alpha, n=2000)
        pre_topics = self.topic_matrix(rng, group_alpha, n=2000)
        post_topics = self.topic_matrix(rng, group_alpha, n=2000)
        ap_styles = self.style_matrix(rng, 0.5)
        pre_styles = self.style_matrix(rng, 0.65)
        post_styles = self.style_matrix(rng, 0.5)
        report = shift_report(ap_topics, pre_topics, post_topics,
                              ap_styles, pre_styles, post_styles)
        d_pre, d_post = report["style"]
        assert d_post < d_pre
        t_pre, t_post = report["topic"]
        assert abs(t_post - t_pre) / max(t_pre, 1e-12) < 0.10

    def test_mean_pooling(self):
        pooled = mean_topic_distribution([[0.2, 0.8], [0.4, 0.6]])
        assert pooled == pytest.approx([0.3, 0.7])
