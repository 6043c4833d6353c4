"""In-memory matched-DiD harness shared by the acceptance suite.

Runs the real library pipeline (propensity fit, Jenks stratification,
same-week matching, weighted panel assembly, NB-GEE fit) on generator
arrays without materializing event files, so 100-seed sweeps stay fast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from identity_effects.estimation import FitResult, ModelSpec, SPEC_DID, fit_nb_gee
from identity_effects.matching import (balance_report, fit_propensity, score_many,
                                       stratify_and_match)
from identity_effects.panel import PanelObservation
from identity_effects.synth import CohortData
from identity_effects.timeutil import week_bucket


@dataclass
class MatchedRun:
    fit: FitResult
    naive_ratio: float
    smd_before: list[float]
    smd_after: list[float]
    n_matched: int
    n_unmatched: int


def naive_ratio_of_ratios(y: np.ndarray, treated: np.ndarray) -> float:
    yt, yc = y[treated == 1], y[treated == 0]
    return float((yt[:, 1].mean() / yt[:, 0].mean())
                 / (yc[:, 1].mean() / yc[:, 0].mean()))


def matched_did(data: CohortData, y: np.ndarray | None = None,
                n_id: np.ndarray | None = None,
                spec: ModelSpec = SPEC_DID) -> MatchedRun:
    """Match the cohort and fit the DiD model on the given outcome counts."""
    if y is None:
        y = data.y
    if n_id is None:
        n_id = data.n_id
    n_treated = int(data.treated.sum())
    X = data.covariates
    treated_ids = data.user_ids[:n_treated]
    control_ids = data.user_ids[n_treated:]

    model = fit_propensity(X[:n_treated], X[n_treated:])
    scores_arr = score_many(model, X)
    z = model.transform(X)
    scores = dict(zip(data.user_ids, scores_arr))
    z_map = {u: z[i] for i, u in enumerate(data.user_ids)}
    weeks = {u: week_bucket(int(t)) for u, t in zip(data.user_ids, data.change_time)}
    result = stratify_and_match(treated_ids, control_ids, scores, weeks, z_map)

    index = {u: i for i, u in enumerate(data.user_ids)}
    rows: list[PanelObservation] = []

    def emit(uid: str, treated_flag: int, weight: float) -> None:
        i = index[uid]
        cov = data.covariates[i]
        for j, period in enumerate(("pre", "post")):
            rows.append(PanelObservation(
                user_id=uid, treated=treated_flag, period=period, y=int(y[i, j]),
                x_friends=float(cov[1]), x_followers=float(cov[2]),
                x_posts=float(cov[3]),
                n_id=None if n_id is None else int(n_id[i, j]),
                weight=weight))

    for ms in result.matches:
        emit(ms.treated_id, 1, 1.0)
    for cid in sorted(result.control_reuse):
        emit(cid, 0, float(result.control_reuse[cid]))
    fit = fit_nb_gee(rows, spec)

    matched_t = [index[u] for u in result.matched_treated()]
    matched_c = [index[c] for ms in result.matches for c in ms.control_ids]
    balance = balance_report(X[:n_treated], X[n_treated:], X[matched_t], X[matched_c])
    return MatchedRun(
        fit=fit,
        naive_ratio=naive_ratio_of_ratios(y, data.treated),
        smd_before=[r.smd_before for r in balance.rows],
        smd_after=[r.smd_after for r in balance.rows],
        n_matched=len(result.matches),
        n_unmatched=len(result.unmatched),
    )


def ci_covers(fit: FitResult, term: str, value: float) -> bool:
    t = fit.terms[term]
    return (t.estimate - 1.96 * t.robust_se <= value
            <= t.estimate + 1.96 * t.robust_se)


def percent(b: float) -> float:
    return 100.0 * (math.exp(b) - 1.0)
