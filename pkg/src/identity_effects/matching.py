"""Propensity model, natural-breaks stratification, same-week matching, balance.

Covariates are the six activity measures taken at the profile-change date.
They are count-like and heavy tailed, so the propensity model and the
matching distance operate on log1p-transformed, z-score-normalized values;
the raw values are kept for balance reporting.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import ActivityEvent
from .jenks import assign_classes, jenks_breaks
from .timeutil import DAY_SECONDS, MONTH_SECONDS

COVARIATE_NAMES = (
    "days_since_creation",
    "n_friends",
    "n_followers",
    "n_posts_total",
    "n_tweets_prev_month",
    "n_retweets_prev_month",
)

TWEET_KINDS = ("tweet", "reply")
RETWEET_KINDS = ("retweet", "quote")


@dataclass(frozen=True)
class CovariateVector:
    days_since_creation: float
    n_friends: float
    n_followers: float
    n_posts_total: float
    n_tweets_prev_month: float
    n_retweets_prev_month: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in COVARIATE_NAMES], dtype=float)


def covariate_matrix(covs) -> np.ndarray:
    """Stack CovariateVectors (or rows) into an (n, 6) float matrix."""
    if isinstance(covs, np.ndarray) and covs.ndim == 2:
        X = np.asarray(covs, dtype=float)
    else:
        rows = [c.as_array() if isinstance(c, CovariateVector)
                else np.asarray(c, dtype=float) for c in covs]
        X = np.vstack(rows) if rows else np.empty((0, len(COVARIATE_NAMES)))
    if X.ndim != 2 or X.shape[1] != len(COVARIATE_NAMES):
        raise ValueError(f"expected {len(COVARIATE_NAMES)} covariates per row")
    return X


def extract_covariates(user_events: list[ActivityEvent], change_time: int,
                       ) -> CovariateVector | None:
    """Covariates measured at the profile-change date.

    Account metadata comes from the latest event at or before the change;
    the previous-month activity counts come from events in the 30 days
    before it. Returns None when no event precedes the change.
    """
    anchor = None
    tweets = retweets = 0
    lo = change_time - MONTH_SECONDS
    for event in user_events:
        if event.timestamp <= change_time:
            if anchor is None or event.sort_key() > anchor.sort_key():
                anchor = event
        if lo <= event.timestamp < change_time:
            if event.kind in TWEET_KINDS:
                tweets += 1
            elif event.kind in RETWEET_KINDS:
                retweets += 1
    if anchor is None:
        return None
    return CovariateVector(
        days_since_creation=(change_time - anchor.account_created_at) / DAY_SECONDS,
        n_friends=anchor.friends_count,
        n_followers=anchor.followers_count,
        n_posts_total=anchor.statuses_count,
        n_tweets_prev_month=tweets,
        n_retweets_prev_month=retweets,
    )


@dataclass
class PropensityModel:
    weights: np.ndarray
    intercept: float
    converged: bool
    iterations: int
    # log1p + z-score transform fitted on the pooled sample
    means: np.ndarray
    scales: np.ndarray
    loglik_path: list[float]

    def transform(self, X) -> np.ndarray:
        X = covariate_matrix(X) if not isinstance(X, np.ndarray) else np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return (np.log1p(X) - self.means) / self.scales


def _penalized_loglik(D, y, beta, penalty) -> float:
    eta = D @ beta
    # log-likelihood of logistic regression: sum y*eta - log(1+e^eta)
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return ll - 0.5 * float(penalty @ (beta * beta))


def fit_propensity(treated_covs, control_covs, ridge: float = 1e-6,
                   tol: float = 1e-8, max_iter: int = 100) -> PropensityModel:
    """Penalized maximum-likelihood logistic fit of treatment on covariates.

    Newton/IRLS with step halving, ridge 1e-6 on the weights (not the
    intercept) so quasi-separated data still converges; stops when the
    largest coefficient update is below 1e-8. The penalized log-likelihood
    is non-decreasing across iterations.
    """
    Xt = covariate_matrix(treated_covs)
    Xc = covariate_matrix(control_covs)
    if len(Xt) == 0 or len(Xc) == 0:
        raise ValueError("fit_propensity: need at least one treated and one control")
    X = np.vstack([Xt, Xc])
    if not np.all(np.isfinite(X)):
        raise ValueError("fit_propensity: non-finite covariate")
    y = np.concatenate([np.ones(len(Xt)), np.zeros(len(Xc))])

    L = np.log1p(X)
    means = L.mean(axis=0)
    scales = L.std(axis=0)
    scales[scales == 0] = 1.0
    Z = (L - means) / scales
    n, p = Z.shape
    D = np.column_stack([np.ones(n), Z])
    penalty = np.full(p + 1, ridge)
    penalty[0] = 0.0

    beta = np.zeros(p + 1)
    loglik_path = [_penalized_loglik(D, y, beta, penalty)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = D @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        W = mu * (1.0 - mu)
        grad = D.T @ (y - mu) - penalty * beta
        H = (D * W[:, None]).T @ D + np.diag(penalty)
        step = np.linalg.solve(H, grad)
        # step halving keeps the penalized log-likelihood monotone
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            if _penalized_loglik(D, y, candidate, penalty) >= loglik_path[-1]:
                break
            scale *= 0.5
        beta = beta + scale * step
        loglik_path.append(_penalized_loglik(D, y, beta, penalty))
        if np.max(np.abs(scale * step)) < tol:
            converged = True
            break
    return PropensityModel(
        weights=beta[1:].copy(),
        intercept=float(beta[0]),
        converged=converged,
        iterations=iterations,
        means=means,
        scales=scales,
        loglik_path=loglik_path,
    )


def score(model: PropensityModel, cov) -> float:
    """Propensity in (0, 1) for one covariate vector."""
    return float(score_many(model, [cov])[0])


def score_many(model: PropensityModel, covs) -> np.ndarray:
    if not model.converged:
        raise ValueError("propensity model did not converge; refusing to score")
    Z = model.transform(covs)
    eta = model.intercept + Z @ model.weights
    return 1.0 / (1.0 + np.exp(-eta))


@dataclass(frozen=True)
class Stratum:
    index: int
    lo: float
    hi: float
    treated_members: tuple[str, ...]
    control_members: tuple[str, ...]


@dataclass(frozen=True)
class MatchSet:
    treated_id: str
    control_ids: tuple[str, ...]
    stratum_index: int
    distances: tuple[float, ...]


@dataclass
class MatchResult:
    strata: list[Stratum]
    matches: list[MatchSet]
    unmatched: list[str]
    control_reuse: dict[str, int]

    def matched_treated(self) -> list[str]:
        return [m.treated_id for m in self.matches]

    def matched_controls(self) -> list[str]:
        """Distinct matched control ids, sorted."""
        return sorted(self.control_reuse)


def stratify_and_match(treated_ids, control_ids, scores, weeks, z_covariates,
                       k_neighbors: int = 5, n_strata: int | None = None) -> MatchResult:
    """Stratified same-week nearest-neighbor matching with replacement.

    Strata come from Fisher-Jenks breaks over all propensity scores, with
    N = floor(sqrt(#treated)) strata (clamped to the number of distinct
    scores). Candidate controls share the treated user's stratum and
    epoch-anchored change week; the k nearest by Euclidean distance over
    z-scored covariates are kept, ties broken by user id. Treated users
    without candidates are reported unmatched, not errors.
    """
    treated_ids = list(treated_ids)
    control_ids = list(control_ids)
    if not treated_ids:
        return MatchResult([], [], [], {})
    all_scores = np.array([scores[u] for u in treated_ids + control_ids], dtype=float)
    if n_strata is None:
        n_strata = max(1, math.isqrt(len(treated_ids)))
    n_strata = min(n_strata, len(np.unique(all_scores)))
    breaks = jenks_breaks(all_scores, n_strata)

    t_scores = all_scores[:len(treated_ids)]
    c_scores = all_scores[len(treated_ids):]
    t_strata = assign_classes(t_scores, breaks)
    c_strata = assign_classes(c_scores, breaks)

    bounds = [0.0] + list(breaks) + [1.0]
    cells: dict[tuple[int, int], list[str]] = defaultdict(list)
    for uid, stratum in zip(control_ids, c_strata):
        cells[(int(stratum), weeks[uid])].append(uid)
    cell_z: dict[tuple[int, int], np.ndarray] = {}
    for key, members in cells.items():
        members.sort()
        cell_z[key] = np.vstack([z_covariates[c] for c in members])

    matches: list[MatchSet] = []
    unmatched: list[str] = []
    reuse: dict[str, int] = defaultdict(int)
    for uid, stratum in zip(treated_ids, t_strata):
        key = (int(stratum), weeks[uid])
        candidates = cells.get(key)
        if not candidates:
            unmatched.append(uid)
            continue
        zt = np.asarray(z_covariates[uid], dtype=float)
        dists = np.sqrt(np.sum((cell_z[key] - zt) ** 2, axis=1))
        # candidates are pre-sorted by id, so a stable argsort breaks
        # distance ties by user id
        order = np.argsort(dists, kind="stable")[:k_neighbors]
        chosen = [candidates[i] for i in order]
        for c in chosen:
            reuse[c] += 1
        matches.append(MatchSet(
            treated_id=uid,
            control_ids=tuple(chosen),
            stratum_index=int(stratum),
            distances=tuple(float(dists[i]) for i in order),
        ))

    strata = []
    for s in range(n_strata):
        strata.append(Stratum(
            index=s,
            lo=float(bounds[s]),
            hi=float(bounds[s + 1]),
            treated_members=tuple(u for u, st in zip(treated_ids, t_strata) if st == s),
            control_members=tuple(u for u, st in zip(control_ids, c_strata) if st == s),
        ))
    return MatchResult(strata, matches, unmatched, dict(reuse))


def smd(treated_values, control_values) -> float:
    """Standardized mean difference |mean_t - mean_c| / sqrt((var_t + var_c)/2).

    Sample variances use the n-1 denominator. When both variances are zero
    the result is 0 for equal means and +inf (a flagged sentinel) otherwise.
    """
    a = np.asarray(treated_values, dtype=float)
    b = np.asarray(control_values, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("smd: need at least two values per group")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    gap = abs(a.mean() - b.mean())
    if va == 0 and vb == 0:
        return 0.0 if gap == 0 else math.inf
    return float(gap / math.sqrt((va + vb) / 2.0))


@dataclass(frozen=True)
class BalanceRow:
    covariate: str
    smd_before: float
    smd_after: float
    passed: bool


@dataclass(frozen=True)
class BalanceReport:
    rows: tuple[BalanceRow, ...]
    threshold: float = 0.1

    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def balance_report(treated_before, control_before, treated_after, control_after,
                   threshold: float = 0.1) -> BalanceReport:
    """Per-covariate SMD before and after matching.

    The after-matching control sample should repeat each control once per
    match occurrence so reuse is weighted the way the estimator sees it.
    """
    Xb_t, Xb_c = covariate_matrix(treated_before), covariate_matrix(control_before)
    Xa_t, Xa_c = covariate_matrix(treated_after), covariate_matrix(control_after)
    rows = []
    for j, name in enumerate(COVARIATE_NAMES):
        before = smd(Xb_t[:, j], Xb_c[:, j])
        after = smd(Xa_t[:, j], Xa_c[:, j])
        rows.append(BalanceRow(name, before, after, abs(after) < threshold))
    return BalanceReport(tuple(rows), threshold)


def write_covariates(covariates: dict[str, CovariateVector], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("user_id",) + COVARIATE_NAMES)
        for uid in sorted(covariates):
            vec = covariates[uid]
            writer.writerow([uid] + [format(float(getattr(vec, n)), ".10g")
                                     for n in COVARIATE_NAMES])


def read_covariates(path: str | Path) -> dict[str, CovariateVector]:
    out: dict[str, CovariateVector] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(("user_id",) + COVARIATE_NAMES) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"covariates file {path} missing columns {sorted(missing)}")
        for row in reader:
            out[row["user_id"]] = CovariateVector(
                **{name: float(row[name]) for name in COVARIATE_NAMES})
    return out


def write_matches(result: MatchResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["treated_id", "control_id", "rank", "stratum", "distance"])
        for m in result.matches:
            for rank, (cid, dist) in enumerate(zip(m.control_ids, m.distances)):
                writer.writerow([m.treated_id, cid, rank, m.stratum_index,
                                 format(dist, ".10g")])


def read_matches(path: str | Path) -> list[MatchSet]:
    grouped: dict[str, list[tuple[int, str, int, float]]] = defaultdict(list)
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["treated_id", "control_id", "rank", "stratum", "distance"]
        if reader.fieldnames != expected:
            raise ValueError(f"unexpected matches header in {path}: {reader.fieldnames}")
        for row in reader:
            tid = row["treated_id"]
            if tid not in grouped:
                order.append(tid)
            grouped[tid].append((int(row["rank"]), row["control_id"],
                                 int(row["stratum"]), float(row["distance"])))
    out = []
    for tid in order:
        entries = sorted(grouped[tid])
        out.append(MatchSet(
            treated_id=tid,
            control_ids=tuple(e[1] for e in entries),
            stratum_index=entries[0][2],
            distances=tuple(e[3] for e in entries),
        ))
    return out


def write_balance(report: BalanceReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["covariate", "smd_before", "smd_after", "pass"])
        for row in report.rows:
            writer.writerow([row.covariate, format(row.smd_before, ".10g"),
                             format(row.smd_after, ".10g"), int(row.passed)])
