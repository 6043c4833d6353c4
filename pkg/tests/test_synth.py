from __future__ import annotations

import math
from collections import defaultdict

import numpy as np
import pytest
import yaml

from identity_effects.events import build_timelines, read_events
from identity_effects.panel import ScoreTable, count_outcomes, count_offensive_replies, build_ego_network
from identity_effects.synth import (
    SynthConfig, bundled_scenario_path, emit_network_scenario, generate,
    generate_cohort, generate_network, load_scenario, read_truth_users)
from identity_effects.taxonomy import classify_user


def small_config(**kw) -> SynthConfig:
    base = dict(seed=11, n_treated=40, n_control_pool=160, weeks_span=3)
    base.update(kw)
    return SynthConfig(**base)


class TestConfig:
    def test_bundled_scenarios_load(self):
        for name in ("null", "confounded-null", "confounded-effect"):
            config = load_scenario(bundled_scenario_path(name))
            assert config.n_treated > 0

    def test_infeasible_config_rejected_before_output(self, tmp_path):
        config = small_config(alpha=-1.0)
        with pytest.raises(ValueError):
            generate(config, tmp_path / "x")
        assert not (tmp_path / "x").exists()

    def test_unknown_scenario_keys_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("seed: 1\nbogus_knob: 2\n")
        with pytest.raises(ValueError, match="bogus_knob"):
            load_scenario(path)


class TestCohortGeneration:
    def test_shapes_and_quotas(self):
        data = generate_cohort(small_config())
        assert len(data.user_ids) == 200
        assert int(data.treated.sum()) == 40
        assert data.covariates.shape == (200, 6)
        assert np.all(data.covariates >= 0)

    def test_null_scenario_near_zero_everywhere(self):
        config = small_config(n_treated=4000, n_control_pool=8000, gamma=0.0)
        data = generate_cohort(config)
        yt, yc = data.y[data.treated == 1], data.y[data.treated == 0]
        naive = (yt[:, 1].mean() / yt[:, 0].mean()) / (yc[:, 1].mean() / yc[:, 0].mean())
        assert abs(math.log(naive)) < 0.1

    def test_confounded_null_biases_naive_ratio(self):
        config = small_config(n_treated=4000, n_control_pool=12000, gamma=0.5,
                              trend_gamma=0.3)
        data = generate_cohort(config)
        yt, yc = data.y[data.treated == 1], data.y[data.treated == 0]
        naive = (yt[:, 1].mean() / yt[:, 0].mean()) / (yc[:, 1].mean() / yc[:, 0].mean())
        assert naive > 1.08

    def test_treated_covariates_shifted_under_confounding(self):
        config = small_config(n_treated=3000, n_control_pool=9000, gamma=0.5)
        data = generate_cohort(config)
        assert data.index[data.treated == 1].mean() \
            > data.index[data.treated == 0].mean() + 0.3

    @pytest.mark.slow
    def test_cell_means_match_linear_predictor(self):
        # law-of-large-numbers check at 100k users
        config = SynthConfig(seed=5, n_treated=50_000, n_control_pool=50_000,
                             gamma=0.0, trend_gamma=0.0, alpha=0.4)
        data = generate_cohort(config)
        beta = config.beta
        for treated in (0, 1):
            mask = data.treated == treated
            for j, period in enumerate(("pre", "post")):
                eta = (beta["b0"] + beta["b1"] * data.index[mask]
                       + beta["b2"] * treated)
                if period == "post":
                    eta = eta + beta["b3"] + beta["b4"] * treated
                expected = np.exp(eta).mean()
                observed = data.y[mask, j].mean()
                assert observed == pytest.approx(expected, rel=0.02)


class TestMaterialization:
    def test_fixed_seed_byte_identical(self, tmp_path):
        config = small_config(n_treated=15, n_control_pool=45)
        paths_a = generate(config, tmp_path / "a")
        paths_b = generate(config, tmp_path / "b")
        for key in paths_a:
            assert paths_a[key].read_bytes() == paths_b[key].read_bytes(), key

    def test_roundtrip_strict_zero_skips(self, tmp_path):
        paths = generate(small_config(n_treated=10, n_control_pool=30), tmp_path)
        events, skipped = read_events(paths["events"], strict=True)
        assert skipped == 0
        assert len(events) > 0

    def test_classification_correct_by_construction(self, tmp_path, matcher):
        config = small_config(n_treated=12, n_control_pool=36)
        paths = generate(config, tmp_path)
        events, _ = read_events(paths["events"], strict=True)
        timelines = build_timelines(events)
        truth = {r["user_id"]: r for r in read_truth_users(paths["truth_users"])}
        params = yaml.safe_load(open(paths["truth_params"]))
        window = (params["observation_start"], params["observation_end"])
        for uid, row in truth.items():
            status = classify_user(matcher, timelines[uid], config.identity, window)
            if row["treated"] == "1":
                assert status.variant == "identity_added", (uid, status)
            else:
                assert status.variant == "not_added", (uid, status)
            assert status.change_time == int(row["change_time"])

    def test_pipeline_counts_match_truth(self, tmp_path):
        config = small_config(n_treated=12, n_control_pool=36)
        paths = generate(config, tmp_path)
        events, _ = read_events(paths["events"], strict=True)
        scores = ScoreTable.read(paths["scores"])
        by_author = defaultdict(list)
        for e in events:
            by_author[e.user_id].append(e)
        for row in read_truth_users(paths["truth_users"]):
            counts = count_outcomes(by_author[row["user_id"]], scores,
                                    row["user_id"], int(row["change_time"]),
                                    "identity_tweets", identity=config.identity)
            assert counts.y_pre == int(row["y_pre"])
            assert counts.y_post == int(row["y_post"])
            # exposure reproduces the drawn tweets-prev-month covariate
            assert counts.exposure_pre == max(
                int(float(row["n_tweets_prev_month"])), int(row["y_pre"]))

    def test_covariate_extraction_matches_truth(self, tmp_path):
        from identity_effects.matching import extract_covariates

        config = small_config(n_treated=10, n_control_pool=20)
        paths = generate(config, tmp_path)
        events, _ = read_events(paths["events"], strict=True)
        by_author = defaultdict(list)
        for e in events:
            by_author[e.user_id].append(e)
        mismatched = 0
        for row in read_truth_users(paths["truth_users"]):
            vec = extract_covariates(by_author[row["user_id"]],
                                     int(row["change_time"]))
            for name in ("n_friends", "n_followers", "n_posts_total",
                         "days_since_creation", "n_retweets_prev_month"):
                assert getattr(vec, name) == pytest.approx(
                    float(row[name]), abs=1e-6), (row["user_id"], name)
            # prev-month tweets can exceed the drawn value when the outcome
            # draw was larger; extraction then sees max(drawn, y_pre)
            drawn = float(row["n_tweets_prev_month"])
            expected = max(drawn, float(row["y_pre"]))
            if vec.n_tweets_prev_month != pytest.approx(expected):
                mismatched += 1
        assert mismatched == 0

    def test_score_mixture_exceedance(self, tmp_path):
        config = SynthConfig(seed=13, n_treated=150, n_control_pool=300,
                             weeks_span=2,
                             identity_score_range=(0.4, 1.0),
                             background_score_range=(0.0, 0.6))
        paths = generate(config, tmp_path)
        scores = ScoreTable.read(paths["scores"])
        flags = {}
        import csv

        with open(paths["truth_events"]) as fh:
            for row in csv.DictReader(fh):
                flags[row["event_id"]] = row["identity_true"] == "1"
        hits = total = 0
        for event_id, is_identity in flags.items():
            if not is_identity:
                continue
            total += 1
            if scores.get(event_id, "identity:women") > 0.5:
                hits += 1
        expected = (1.0 - 0.5) / (1.0 - 0.4)  # exceedance of uniform(0.4, 1.0)
        assert total > 500
        assert hits / total == pytest.approx(expected, abs=0.01)


class TestOffensiveScenario:
    def test_reply_counts_match_truth(self, tmp_path):
        config = small_config(n_treated=10, n_control_pool=30,
                              outcome="offensive_replies",
                              true_beta={"b0": 1.0, "b1": 0.2, "b2": 0.0,
                                         "b3": 0.1, "b4": 0.2, "b5": -0.15,
                                         "b6": -0.2})
        paths = generate(config, tmp_path)
        events, _ = read_events(paths["events"], strict=True)
        scores = ScoreTable.read(paths["scores"])
        by_author = defaultdict(list)
        by_target = defaultdict(list)
        for e in events:
            by_author[e.user_id].append(e)
            if e.target_user_id:
                by_target[e.target_user_id].append(e)
        for row in read_truth_users(paths["truth_users"]):
            uid = row["user_id"]
            relevant = by_author[uid] + by_target[uid]
            counts = count_offensive_replies(relevant, scores, uid,
                                             int(row["change_time"]),
                                             config.identity)
            assert counts.y_pre == int(row["y_pre"]), uid
            assert counts.y_post == int(row["y_post"]), uid
            assert counts.n_id_pre == int(row["n_id_pre"]), uid
            assert counts.n_id_post == int(row["n_id_post"]), uid


class TestNetworkScenario:
    def test_in_memory_shapes(self):
        config = small_config(n_treated=25, n_control_pool=75, n_alters=300)
        network = generate_network(config)
        n = len(network.cohort.user_ids)
        assert network.same_out.shape == (n, 2)
        assert np.all(network.same_out <= network.total_out)
        assert np.all(network.same_in <= network.total_in)

    def test_equal_homophily_yields_null_effect(self):
        import sys

        sys.path.insert(0, str(__import__("pathlib").Path(__file__).parent))
        from harness import matched_did

        config = small_config(n_treated=400, n_control_pool=1200, n_alters=500,
                              homophily_treated=0.15, homophily_control=0.15,
                              alter_same_identity_frac=0.15)
        network = generate_network(config)
        run = matched_did(network.cohort, y=network.same_out)
        t = run.fit["treat_post"]
        assert abs(t.estimate) < 3.0 * t.robust_se

    def test_homophily_shift_direction(self):
        config = small_config(n_treated=400, n_control_pool=800, n_alters=500,
                              homophily_treated=0.4, homophily_control=0.15,
                              alter_same_identity_frac=0.15)
        network = generate_network(config)
        treated = network.cohort.treated == 1
        lift_treated = (network.same_out[treated, 1].mean()
                        / max(network.same_out[treated, 0].mean(), 1e-9))
        lift_control = (network.same_out[~treated, 1].mean()
                        / max(network.same_out[~treated, 0].mean(), 1e-9))
        assert lift_treated > 1.5 * lift_control

    def test_emitted_network_matches_truth(self, tmp_path, matcher):
        config = small_config(n_treated=8, n_control_pool=24, n_alters=120,
                              homophily_treated=0.5, homophily_control=0.2)
        paths = emit_network_scenario(config, tmp_path)
        network = generate_network(config)  # same seed, same draws
        events, skipped = read_events(paths["events"], strict=True)
        assert skipped == 0
        for i, uid in enumerate(network.cohort.user_ids):
            pre, post = build_ego_network(events, uid,
                                          int(network.cohort.change_time[i]),
                                          matcher, weeks=config.network_weeks)
            identity = config.identity
            assert pre.same_identity_out_degree(identity) == network.same_out[i, 0]
            assert post.same_identity_out_degree(identity) == network.same_out[i, 1]
            assert pre.same_identity_in_degree(identity) == network.same_in[i, 0]
            assert post.same_identity_in_degree(identity) == network.same_in[i, 1]
            assert pre.out_degree() == network.total_out[i, 0]
            assert post.out_degree() == network.total_out[i, 1]
            assert pre.in_degree() == network.total_in[i, 0]
            assert post.in_degree() == network.total_in[i, 1]
