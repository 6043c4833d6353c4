"""Pre/post outcome panels: activity counts, scored content, ego-network degrees.

Windows follow the pipeline's calendar conventions: one "month" is 30 days,
the pre window is [change - w, change) and the post window is
(change, change + w], and the profile-change event itself is excluded.
Scored outcomes count events with score strictly above the threshold;
unscored events never count toward scored outcomes but do count in totals.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .events import ActivityEvent
from .matching import (CovariateVector, MatchSet, RETWEET_KINDS, TWEET_KINDS)
from .taxonomy import CompiledTaxonomy
from .timeutil import DAY_SECONDS, WEEK_SECONDS

OUTCOME_KINDS = (
    "total_tweets",
    "total_retweets",
    "identity_tweets",
    "identity_retweets",
)

NETWORK_OUTCOMES = (
    "same_identity_out_degree",
    "same_identity_in_degree",
    "out_degree",
    "in_degree",
)


class ScoreTable:
    """Per-event classifier scores: event_id -> score name -> value in [0, 1].

    A missing event or score name means "unscored", never 0.
    """

    def __init__(self, scores: dict[str, dict[str, float]] | None = None):
        self._scores = scores if scores is not None else {}

    def get(self, event_id: str, name: str) -> float | None:
        return self._scores.get(event_id, {}).get(name)

    def add(self, event_id: str, name: str, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"score {name}={value} for {event_id} outside [0, 1]")
        self._scores.setdefault(event_id, {})[name] = value

    def __len__(self) -> int:
        return len(self._scores)

    @classmethod
    def read(cls, path: str | Path) -> "ScoreTable":
        table = cls()
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["event_id", "score_name", "value"]:
                raise ValueError(f"unexpected scores header in {path}: {header}")
            for event_id, name, value in reader:
                table.add(event_id, name, float(value))
        return table

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["event_id", "score_name", "value"])
            for event_id in sorted(self._scores):
                for name in sorted(self._scores[event_id]):
                    writer.writerow([event_id, name,
                                     format(self._scores[event_id][name], ".10g")])


def identity_score_name(identity: str) -> str:
    """Score-table key for an identity: 'identity:<subcategory>'."""
    sub = identity.split(":", 1)[1] if ":" in identity else identity
    return f"identity:{sub}"


def _window_side(timestamp: int, change_time: int, window_seconds: int) -> str | None:
    if change_time - window_seconds <= timestamp < change_time:
        return "pre"
    if change_time < timestamp <= change_time + window_seconds:
        return "post"
    return None


@dataclass(frozen=True)
class OutcomeCounts:
    y_pre: int
    y_post: int
    exposure_pre: int
    exposure_post: int
    flagged: bool = False


def count_outcomes(events: list[ActivityEvent], scores: ScoreTable, user_id: str,
                   change_time: int, outcome_kind: str, identity: str | None = None,
                   window_days: int = 30, threshold: float = 0.5) -> OutcomeCounts:
    """Pre/post outcome counts for one user around their profile change.

    For identity kinds, y counts the user's events with identity score
    strictly above *threshold* and exposure carries the corresponding total;
    the observation is flagged when the windows contain relevant events but
    none of them is scored (distinct from genuinely zero activity).
    """
    if outcome_kind not in OUTCOME_KINDS:
        raise ValueError(f"unknown outcome kind {outcome_kind!r}")
    is_identity = outcome_kind.startswith("identity_")
    if is_identity and identity is None:
        raise ValueError(f"{outcome_kind} requires an identity")
    kinds = TWEET_KINDS if outcome_kind.endswith("tweets") and "retweet" not in outcome_kind \
        else RETWEET_KINDS
    score_name = identity_score_name(identity) if is_identity else None
    window = window_days * DAY_SECONDS

    totals = {"pre": 0, "post": 0}
    hits = {"pre": 0, "post": 0}
    any_scored = False
    for event in events:
        if event.user_id != user_id or event.kind not in kinds:
            continue
        side = _window_side(event.timestamp, change_time, window)
        if side is None:
            continue
        totals[side] += 1
        if is_identity:
            value = scores.get(event.event_id, score_name)
            if value is None:
                continue
            any_scored = True
            if value > threshold:
                hits[side] += 1
    if is_identity:
        flagged = (totals["pre"] + totals["post"] > 0) and not any_scored
        return OutcomeCounts(hits["pre"], hits["post"], totals["pre"], totals["post"], flagged)
    return OutcomeCounts(totals["pre"], totals["post"], totals["pre"], totals["post"], False)


@dataclass
class EgoGraph:
    """Interaction graph around one user for a single pre or post window."""

    ego: str
    out_edges: set[tuple[str, str, int]] = field(default_factory=set)  # (alter, kind, ts)
    in_edges: set[tuple[str, str, int]] = field(default_factory=set)
    alter_labels: dict[str, frozenset[str]] = field(default_factory=dict)

    def out_alters(self) -> set[str]:
        return {alter for alter, _, _ in self.out_edges}

    def in_alters(self) -> set[str]:
        return {alter for alter, _, _ in self.in_edges}

    def out_degree(self) -> int:
        return len(self.out_alters())

    def in_degree(self) -> int:
        return len(self.in_alters())

    def same_identity_out_degree(self, identity: str) -> int:
        return sum(1 for a in self.out_alters() if identity in self.alter_labels.get(a, ()))

    def same_identity_in_degree(self, identity: str) -> int:
        return sum(1 for a in self.in_alters() if identity in self.alter_labels.get(a, ()))


def build_ego_network(events: list[ActivityEvent], ego: str, change_time: int,
                      matcher: CompiledTaxonomy, weeks: int = 12,
                      quotes_as_retweets: bool = True) -> tuple[EgoGraph, EgoGraph]:
    """Pre and post ego interaction graphs over *weeks*-week windows.

    An out-edge is the ego replying to or retweeting an alter; an in-edge is
    the reverse. Alter identity labels are computed from every profile
    snapshot an alter shows anywhere inside the combined pre+post span, so
    an identity adopted at any point marks the alter in both windows.
    """
    window = weeks * WEEK_SECONDS
    edge_kinds = {"reply", "retweet"}
    if quotes_as_retweets:
        edge_kinds.add("quote")
    pre = EgoGraph(ego)
    post = EgoGraph(ego)
    alter_profiles: dict[str, set[str]] = defaultdict(set)
    span_lo, span_hi = change_time - window, change_time + window
    touched: set[str] = set()

    for event in events:
        side = _window_side(event.timestamp, change_time, window)
        if span_lo <= event.timestamp <= span_hi and event.user_id != ego:
            alter_profiles[event.user_id].add(event.profile_text)
        if side is None or event.kind not in edge_kinds or not event.target_user_id:
            continue
        graph = pre if side == "pre" else post
        if event.user_id == ego and event.target_user_id != ego:
            graph.out_edges.add((event.target_user_id, event.kind, event.timestamp))
            touched.add(event.target_user_id)
        elif event.target_user_id == ego and event.user_id != ego:
            graph.in_edges.add((event.user_id, event.kind, event.timestamp))
            touched.add(event.user_id)

    labels: dict[str, frozenset[str]] = {}
    for alter in touched:
        ids: set[str] = set()
        for text in alter_profiles.get(alter, ()):
            ids |= matcher.identity_set(text)
        labels[alter] = frozenset(ids)
    pre.alter_labels = labels
    post.alter_labels = labels
    return pre, post


@dataclass(frozen=True)
class OffensiveCounts:
    y_pre: int
    y_post: int
    n_id_pre: int
    n_id_post: int
    flagged: bool = False


def count_offensive_replies(events: list[ActivityEvent], scores: ScoreTable,
                            user_id: str, change_time: int, identity: str,
                            window_days: int = 30, threshold: float = 0.5,
                            ) -> OffensiveCounts:
    """Offensive replies received from others plus own identity-tweet counts.

    y counts replies from other users whose offensive score is strictly
    above the threshold (self-replies excluded); n_id counts the user's own
    identity-scored tweets in the same window and feeds the interaction
    terms of the offensive-reply model.
    """
    window = window_days * DAY_SECONDS
    y = {"pre": 0, "post": 0}
    replies = {"pre": 0, "post": 0}
    any_scored = False
    for event in events:
        if (event.kind != "reply" or event.target_user_id != user_id
                or event.user_id == user_id):
            continue
        side = _window_side(event.timestamp, change_time, window)
        if side is None:
            continue
        replies[side] += 1
        value = scores.get(event.event_id, "offensive")
        if value is None:
            continue
        any_scored = True
        if value > threshold:
            y[side] += 1
    own = count_outcomes(events, scores, user_id, change_time, "identity_tweets",
                         identity=identity, window_days=window_days, threshold=threshold)
    flagged = ((replies["pre"] + replies["post"] > 0) and not any_scored) or own.flagged
    return OffensiveCounts(y["pre"], y["post"], own.y_pre, own.y_post, flagged)


@dataclass(frozen=True)
class PanelObservation:
    """One user-period outcome row; two rows per user enter each regression."""

    user_id: str
    treated: int
    period: str  # pre | post
    y: int
    x_friends: float
    x_followers: float
    x_posts: float
    exposure: int | None = None
    n_id: int | None = None
    weight: float = 1.0

    def __post_init__(self):
        if self.y < 0:
            raise ValueError(f"negative outcome count for {self.user_id}")
        if self.exposure is not None and self.exposure < self.y:
            raise ValueError(
                f"exposure {self.exposure} below outcome {self.y} for {self.user_id}")
        if self.period not in ("pre", "post"):
            raise ValueError(f"period must be pre or post, got {self.period!r}")


@dataclass
class PanelReport:
    n_treated: int = 0
    n_controls: int = 0
    flagged_users: list[str] = field(default_factory=list)
    missing_covariates: list[str] = field(default_factory=list)


PrePost = tuple[int, int]


@dataclass(frozen=True)
class UserOutcome:
    """Per-user pre/post outcome tuple feeding assemble_panel."""

    y: PrePost
    exposure: PrePost | None = None
    n_id: PrePost | None = None
    flagged: bool = False

    @classmethod
    def from_counts(cls, counts) -> "UserOutcome":
        if isinstance(counts, OutcomeCounts):
            return cls(y=(counts.y_pre, counts.y_post),
                       exposure=(counts.exposure_pre, counts.exposure_post),
                       flagged=counts.flagged)
        if isinstance(counts, OffensiveCounts):
            return cls(y=(counts.y_pre, counts.y_post),
                       n_id=(counts.n_id_pre, counts.n_id_post),
                       flagged=counts.flagged)
        raise TypeError(f"unsupported counts type {type(counts)!r}")


def assemble_panel(match_sets: list[MatchSet], outcomes: dict[str, UserOutcome],
                   covariates: dict[str, CovariateVector],
                   ) -> tuple[list[PanelObservation], PanelReport]:
    """Two rows (pre, post) per matched user.

    Controls matched to several treated users appear once with a frequency
    weight equal to their reuse count, which is how the matched sample must
    enter the weighted regression. Flagged users and users without
    covariates are excluded and reported.
    """
    report = PanelReport()
    rows: list[PanelObservation] = []

    reuse: dict[str, int] = defaultdict(int)
    for ms in match_sets:
        for cid in ms.control_ids:
            reuse[cid] += 1

    def emit(user_id: str, treated: int, weight: float) -> bool:
        outcome = outcomes.get(user_id)
        if outcome is None or outcome.flagged:
            report.flagged_users.append(user_id)
            return False
        cov = covariates.get(user_id)
        if cov is None:
            report.missing_covariates.append(user_id)
            return False
        for i, period in enumerate(("pre", "post")):
            rows.append(PanelObservation(
                user_id=user_id,
                treated=treated,
                period=period,
                y=int(outcome.y[i]),
                x_friends=cov.n_friends,
                x_followers=cov.n_followers,
                x_posts=cov.n_posts_total,
                exposure=None if outcome.exposure is None else int(outcome.exposure[i]),
                n_id=None if outcome.n_id is None else int(outcome.n_id[i]),
                weight=weight,
            ))
        return True

    for ms in match_sets:
        if emit(ms.treated_id, 1, 1.0):
            report.n_treated += 1
    for cid in sorted(reuse):
        if emit(cid, 0, float(reuse[cid])):
            report.n_controls += 1
    return rows, report


_PANEL_COLUMNS = ["identity", "outcome", "user_id", "treated", "period", "y",
                  "exposure", "n_id", "weight", "x_friends", "x_followers", "x_posts"]


def write_panel(panels: dict[tuple[str, str], list[PanelObservation]],
                path: str | Path) -> None:
    """Write panels keyed by (identity, outcome_kind) to one delimited file."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_PANEL_COLUMNS)
        for (identity, outcome) in sorted(panels):
            for row in panels[(identity, outcome)]:
                writer.writerow([
                    identity, outcome, row.user_id, row.treated, row.period, row.y,
                    "" if row.exposure is None else row.exposure,
                    "" if row.n_id is None else row.n_id,
                    format(row.weight, ".10g"),
                    format(row.x_friends, ".10g"),
                    format(row.x_followers, ".10g"),
                    format(row.x_posts, ".10g"),
                ])


def read_panel(path: str | Path) -> dict[tuple[str, str], list[PanelObservation]]:
    panels: dict[tuple[str, str], list[PanelObservation]] = defaultdict(list)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _PANEL_COLUMNS:
            raise ValueError(f"unexpected panel header in {path}: {reader.fieldnames}")
        for row in reader:
            panels[(row["identity"], row["outcome"])].append(PanelObservation(
                user_id=row["user_id"],
                treated=int(row["treated"]),
                period=row["period"],
                y=int(row["y"]),
                x_friends=float(row["x_friends"]),
                x_followers=float(row["x_followers"]),
                x_posts=float(row["x_posts"]),
                exposure=int(row["exposure"]) if row["exposure"] != "" else None,
                n_id=int(row["n_id"]) if row["n_id"] != "" else None,
                weight=float(row["weight"]),
            ))
    return dict(panels)
