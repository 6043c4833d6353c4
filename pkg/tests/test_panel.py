from __future__ import annotations

from identity_effects.matching import CovariateVector, MatchSet
from identity_effects.panel import (
    OutcomeCounts, ScoreTable, UserOutcome, assemble_panel, build_ego_network,
    count_offensive_replies, count_outcomes)
from identity_effects.timeutil import DAY_SECONDS

from conftest import make_event

CHANGE = 1_600_000_000


def scored(event_ids_values, name="identity:women"):
    table = ScoreTable()
    for event_id, value in event_ids_values:
        table.add(event_id, name, value)
    return table


def tweet(event_id, offset_days, user="u1", **kw):
    return make_event(event_id=event_id, user_id=user,
                      timestamp=int(CHANGE + offset_days * DAY_SECONDS), **kw)


class TestCountOutcomes:
    def test_no_events(self):
        counts = count_outcomes([], ScoreTable(), "u1", CHANGE, "identity_tweets",
                                identity="gender:women")
        assert counts == OutcomeCounts(0, 0, 0, 0, False)

    def test_strict_threshold(self):
        events = [tweet("a", 1), tweet("b", 2), tweet("c", 3)]
        scores = scored([("a", 0.9), ("b", 0.5), ("c", 0.2)])
        counts = count_outcomes(events, scores, "u1", CHANGE, "identity_tweets",
                                identity="gender:women")
        assert counts.y_post == 1          # 0.5 is not > 0.5
        assert counts.exposure_post == 3

    def test_window_boundaries(self):
        events = [
            tweet("pre_edge", -30),               # = change - 30d, inside pre
            tweet("pre_out", -30.0001),           # just outside
            tweet("change", 0),                   # the change event: excluded
            tweet("post_edge", 30),               # = change + 30d, inside post
            tweet("post_out", 30.0001),
        ]
        counts = count_outcomes(events, ScoreTable(), "u1", CHANGE, "total_tweets")
        assert (counts.y_pre, counts.y_post) == (1, 1)

    def test_kind_buckets(self):
        events = [tweet("a", 1), tweet("b", 2, kind="reply"),
                  tweet("c", 3, kind="retweet"), tweet("d", 4, kind="quote")]
        total = count_outcomes(events, ScoreTable(), "u1", CHANGE, "total_tweets")
        retweets = count_outcomes(events, ScoreTable(), "u1", CHANGE, "total_retweets")
        assert total.y_post == 2      # tweet + reply
        assert retweets.y_post == 2   # retweet + quote

    def test_unscored_events_flagged(self):
        events = [tweet("a", 1), tweet("b", -1)]
        counts = count_outcomes(events, ScoreTable(), "u1", CHANGE,
                                "identity_tweets", identity="gender:women")
        assert counts.flagged
        assert counts.y_post == 0

    def test_zero_activity_not_flagged(self):
        counts = count_outcomes([], ScoreTable(), "u1", CHANGE, "identity_tweets",
                                identity="gender:women")
        assert not counts.flagged

    def test_threshold_monotonicity(self):
        events = [tweet(f"e{i}", 1 + i * 0.1) for i in range(10)]
        scores = scored([(f"e{i}", i / 10) for i in range(10)])
        counts = [
            count_outcomes(events, scores, "u1", CHANGE, "identity_tweets",
                           identity="gender:women", threshold=th).y_post
            for th in (0.1, 0.3, 0.5, 0.7, 0.9)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_window_partition_property(self):
        events = [tweet(f"e{i}", d) for i, d in enumerate(
            (-45, -29, -1, 0.5, 29, 31, 0))]
        counts = count_outcomes(events, ScoreTable(), "u1", CHANGE, "total_tweets")
        in_union = [e for e in events
                    if CHANGE - 30 * DAY_SECONDS <= e.timestamp <= CHANGE + 30 * DAY_SECONDS]
        assert counts.y_pre + counts.y_post <= len(in_union)
        assert counts.y_pre + counts.y_post == 4  # change event excluded

    def test_other_users_ignored(self):
        events = [tweet("a", 1), tweet("b", 1, user="u2")]
        counts = count_outcomes(events, ScoreTable(), "u1", CHANGE, "total_tweets")
        assert counts.y_post == 1


class TestEgoNetwork:
    def build(self, matcher, events, weeks=12):
        return build_ego_network(events, "ego", CHANGE, matcher, weeks=weeks)

    def test_distinct_alter_out_degree(self, matcher):
        events = [
            tweet("r1", 1, user="ego", kind="reply", target_user_id="B"),
            tweet("r2", 2, user="ego", kind="reply", target_user_id="B"),
            tweet("r3", 3, user="ego", kind="retweet", target_user_id="C"),
        ]
        pre, post = self.build(matcher, events)
        assert post.out_degree() == 2
        assert pre.out_degree() == 0

    def test_same_identity_zero_when_no_alter_shares(self, matcher):
        events = [
            tweet("r1", 1, user="ego", kind="reply", target_user_id="B"),
            tweet("b1", 2, user="B", profile_text="plain bio"),
        ]
        _, post = self.build(matcher, events)
        assert post.same_identity_out_degree("gender:women") == 0

    def test_any_point_rule_counts_both_windows(self, matcher):
        # alter discloses she/her at week 5 after the change; the ego
        # interacted with them both before and after
        events = [
            tweet("out_pre", -7, user="ego", kind="reply", target_user_id="B"),
            tweet("out_post", 7, user="ego", kind="reply", target_user_id="B"),
            tweet("bio", 5 * 7, user="B", profile_text="runner | she/her"),
        ]
        pre, post = self.build(matcher, events)
        assert pre.same_identity_out_degree("gender:women") == 1
        assert post.same_identity_out_degree("gender:women") == 1

    def test_in_edges_and_direction(self, matcher):
        events = [
            tweet("in1", 1, user="B", kind="reply", target_user_id="ego"),
            tweet("in2", 2, user="C", kind="retweet", target_user_id="ego"),
            tweet("out1", 3, user="ego", kind="reply", target_user_id="D"),
        ]
        pre, post = self.build(matcher, events)
        assert post.in_degree() == 2
        assert post.out_degree() == 1
        assert post.in_alters() == {"B", "C"}

    def test_no_self_loops(self, matcher):
        events = [tweet("self", 1, user="ego", kind="reply", target_user_id="ego")]
        pre, post = self.build(matcher, events)
        assert post.out_degree() == 0 and post.in_degree() == 0

    def test_window_bound(self, matcher):
        events = [
            tweet("in_window", 12 * 7 - 1, user="ego", kind="reply", target_user_id="B"),
            tweet("out_window", 12 * 7 + 1, user="ego", kind="reply", target_user_id="C"),
        ]
        _, post = self.build(matcher, events)
        assert post.out_alters() == {"B"}

    def test_degree_permutation_invariant(self, matcher):
        import random

        events = [
            tweet(f"e{i}", (i % 20) - 10, user="ego", kind="reply",
                  target_user_id=f"A{i % 7}")
            for i in range(30)
        ]
        pre0, post0 = self.build(matcher, events)
        rng = random.Random(1)
        for _ in range(3):
            shuffled = events[:]
            rng.shuffle(shuffled)
            pre, post = self.build(matcher, shuffled)
            assert (pre.out_degree(), post.out_degree()) == \
                (pre0.out_degree(), post0.out_degree())


class TestOffensiveReplies:
    def test_zero_replies(self):
        counts = count_offensive_replies([], ScoreTable(), "u1", CHANGE,
                                         "gender:women")
        assert (counts.y_pre, counts.y_post) == (0, 0)

    def test_threshold_trace(self):
        events = [
            tweet("r1", 1, user="B", kind="reply", target_user_id="u1"),
            tweet("r2", 2, user="C", kind="reply", target_user_id="u1"),
        ]
        scores = ScoreTable()
        scores.add("r1", "offensive", 0.8)
        scores.add("r2", "offensive", 0.3)
        counts = count_offensive_replies(events, scores, "u1", CHANGE,
                                         "gender:women")
        assert counts.y_post == 1

    def test_self_replies_excluded(self):
        events = [tweet("r1", 1, user="u1", kind="reply", target_user_id="u1")]
        scores = ScoreTable()
        scores.add("r1", "offensive", 0.9)
        counts = count_offensive_replies(events, scores, "u1", CHANGE,
                                         "gender:women")
        assert counts.y_post == 0

    def test_n_id_counts_own_tweets(self):
        events = [
            tweet("own1", 1), tweet("own2", -1),
            tweet("r1", 1, user="B", kind="reply", target_user_id="u1"),
        ]
        scores = ScoreTable()
        scores.add("own1", "identity:women", 0.9)
        scores.add("own2", "identity:women", 0.9)
        scores.add("r1", "offensive", 0.9)
        counts = count_offensive_replies(events, scores, "u1", CHANGE,
                                         "gender:women")
        assert (counts.n_id_pre, counts.n_id_post) == (1, 1)
        assert counts.y_post == 1


class TestAssemblePanel:
    def outcome(self, y=(1, 2), exposure=(3, 4), flagged=False):
        return UserOutcome(y=y, exposure=exposure, flagged=flagged)

    def covs(self, users):
        return {u: CovariateVector(10, 1, 2, 3, 4, 5) for u in users}

    def test_row_counts(self):
        matches = [MatchSet("t1", ("c1", "c2"), 0, (0.1, 0.2))]
        outcomes = {u: self.outcome() for u in ("t1", "c1", "c2")}
        rows, report = assemble_panel(matches, outcomes, self.covs(("t1", "c1", "c2")))
        assert len(rows) == 6
        assert report.n_treated == 1 and report.n_controls == 2
        assert {r.period for r in rows} == {"pre", "post"}

    def test_flagged_users_excluded(self):
        matches = [MatchSet("t1", ("c1",), 0, (0.1,))]
        outcomes = {"t1": self.outcome(flagged=True), "c1": self.outcome()}
        rows, report = assemble_panel(matches, outcomes, self.covs(("t1", "c1")))
        assert all(r.user_id != "t1" for r in rows)
        assert report.flagged_users == ["t1"]

    def test_missing_covariates_reported(self):
        matches = [MatchSet("t1", ("c1",), 0, (0.1,))]
        outcomes = {"t1": self.outcome(), "c1": self.outcome()}
        rows, report = assemble_panel(matches, outcomes, self.covs(("t1",)))
        assert report.missing_covariates == ["c1"]

    def test_control_reuse_becomes_weight(self):
        matches = [MatchSet("t1", ("c1",), 0, (0.1,)),
                   MatchSet("t2", ("c1",), 0, (0.2,))]
        users = ("t1", "t2", "c1")
        outcomes = {u: self.outcome() for u in users}
        rows, _ = assemble_panel(matches, outcomes, self.covs(users))
        weights = {r.user_id: r.weight for r in rows}
        assert weights == {"t1": 1.0, "t2": 1.0, "c1": 2.0}
        assert len(rows) == 6
