"""Difference-in-differences count regressions with cluster-robust errors.

The mean model is a log-link negative binomial:

    log E[y] = b0 + b1 * X_i + b2 * treat + b3 * post + b4 * treat x post
               (+ offset log(exposure))
               (+ b5 * log1p(n_id) + b6 * log1p(n_id) x treat x post)

Coefficients come from iteratively reweighted least squares on the NB
quasi-likelihood; the dispersion alpha is re-estimated each sweep by the
method of moments on Pearson residuals (mean squared Pearson residual
calibrated to one). Standard errors are the cluster-robust sandwich over
users with an independence working correlation, so they stay valid whatever
the true within-user correlation is. Row weights act as frequency weights
(matched controls reused k times count k times).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .panel import PanelObservation


class EstimationError(ValueError):
    pass


TERM_TREAT = "treat"
TERM_POST = "post"
TERM_TREAT_POST = "treat_post"
TERM_N_ID = "log1p_n_id"
TERM_N_ID_TREAT_POST = "log1p_n_id_treat_post"


@dataclass(frozen=True)
class ModelSpec:
    """Which terms enter the regression; the intercept is always present."""

    covariates: bool = True
    exposure_offset: bool = False
    n_id_terms: bool = False
    family: str = "negative_binomial"

    def term_names(self) -> list[str]:
        names = ["intercept"]
        if self.covariates:
            names += ["x_friends", "x_followers", "x_posts"]
        names += [TERM_TREAT, TERM_POST, TERM_TREAT_POST]
        if self.n_id_terms:
            names += [TERM_N_ID, TERM_N_ID_TREAT_POST]
        return names


SPEC_DID = ModelSpec()
SPEC_DID_NID = ModelSpec(n_id_terms=True)
NAMED_SPECS = {"did": SPEC_DID, "did_nid": SPEC_DID_NID}


@dataclass(frozen=True)
class TermEstimate:
    estimate: float
    robust_se: float
    z: float
    p: float


@dataclass
class FitResult:
    terms: dict[str, TermEstimate]
    alpha: float
    n_obs: int
    n_clusters: int
    converged: bool
    iterations: int
    fallback_used: bool = False
    dropped_zero_exposure: int = 0

    def __getitem__(self, name: str) -> TermEstimate:
        return self.terms[name]


def _design(panel: list[PanelObservation], spec: ModelSpec):
    if not panel:
        raise EstimationError("empty panel")
    y = np.array([row.y for row in panel], dtype=float)
    treated = np.array([row.treated for row in panel], dtype=float)
    post = np.array([1.0 if row.period == "post" else 0.0 for row in panel])
    weights = np.array([row.weight for row in panel], dtype=float)
    clusters = np.array([row.user_id for row in panel])

    cells = {(int(t), int(p)) for t, p in zip(treated, post)}
    if len(cells) < 4:
        raise EstimationError("degenerate panel: need all four treat x period cells")

    cols = [np.ones(len(panel))]
    names = ["intercept"]
    if spec.covariates:
        for attr in ("x_friends", "x_followers", "x_posts"):
            raw = np.array([getattr(row, attr) for row in panel], dtype=float)
            v = np.log1p(raw)
            sd = v.std()
            cols.append((v - v.mean()) / sd if sd > 0 else v - v.mean())
            names.append(attr)
    cols += [treated, post, treated * post]
    names += [TERM_TREAT, TERM_POST, TERM_TREAT_POST]
    if spec.n_id_terms:
        n_id = np.array(
            [row.n_id if row.n_id is not None else np.nan for row in panel], dtype=float)
        if np.any(np.isnan(n_id)):
            raise EstimationError("spec includes n_id terms but panel rows lack n_id")
        logn = np.log1p(n_id)
        cols += [logn, logn * treated * post]
        names += [TERM_N_ID, TERM_N_ID_TREAT_POST]

    D = np.column_stack(cols)
    offset = np.zeros(len(panel))
    dropped = 0
    if spec.exposure_offset:
        exposure = np.array(
            [row.exposure if row.exposure is not None else 0 for row in panel], dtype=float)
        keep = exposure > 0
        dropped = int(np.sum(~keep))
        y, D, offset, weights, clusters = (
            y[keep], D[keep], np.log(exposure[keep]), weights[keep], clusters[keep])
        cells = {(int(t), int(p)) for t, p in
                 zip(D[:, names.index(TERM_TREAT)], D[:, names.index(TERM_POST)])}
        if len(cells) < 4:
            raise EstimationError("degenerate panel after dropping zero-exposure rows")
    return y, D, names, offset, weights, clusters, dropped


def _check_rank(D: np.ndarray, names: list[str]) -> None:
    rank = np.linalg.matrix_rank(D)
    if rank < D.shape[1]:
        # pivoted QR points at the columns that do not add rank
        from scipy.linalg import qr

        _, _, piv = qr(D, pivoting=True, mode="economic")
        collinear = sorted(names[j] for j in piv[rank:])
        raise EstimationError(f"singular design; collinear terms: {', '.join(collinear)}")


def _moment_alpha(y, mu, w, dof) -> float:
    """Dispersion making the weighted mean squared Pearson residual one."""
    resid2 = (y - mu) ** 2

    def excess(alpha: float) -> float:
        return float(np.sum(w * resid2 / (mu * (1.0 + alpha * mu)))) - dof

    if excess(0.0) <= 0.0:
        return 0.0
    hi = 1.0
    while excess(hi) > 0.0 and hi < 1e8:
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _irls(y, D, offset, w, clusters, estimate_alpha: bool,
          tol: float = 1e-8, max_iter: int = 200):
    n, p = D.shape
    dof = max(float(np.sum(w)) - p, 1.0)
    ybar = max(float(np.average(y, weights=w)), 1e-3)
    beta = np.zeros(p)
    beta[0] = math.log(ybar) - float(np.mean(offset))
    alpha = 0.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = offset + D @ beta
        mu = np.exp(np.clip(eta, -30.0, 30.0))
        if estimate_alpha:
            alpha = _moment_alpha(y, mu, w, dof)
        W = w * mu / (1.0 + alpha * mu)
        z = (eta - offset) + (y - mu) / mu
        H = (D * W[:, None]).T @ D
        rhs = (D * W[:, None]).T @ z
        beta_new = np.linalg.solve(H, rhs)
        delta = float(np.max(np.abs(beta_new - beta)))
        beta = beta_new
        if delta < tol:
            converged = True
            break

    eta = offset + D @ beta
    mu = np.exp(np.clip(eta, -30.0, 30.0))
    W = w * mu / (1.0 + alpha * mu)
    bread = np.linalg.inv((D * W[:, None]).T @ D)
    # per-row score, summed within clusters for the independence-working sandwich
    u = D * (w * (y - mu) / (1.0 + alpha * mu))[:, None]
    order = np.argsort(clusters, kind="stable")
    cuts = np.flatnonzero(clusters[order][1:] != clusters[order][:-1]) + 1
    starts = np.concatenate([[0], cuts])
    Uc = np.add.reduceat(u[order], starts, axis=0)
    cov = bread @ (Uc.T @ Uc) @ bread
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return beta, se, alpha, converged, iterations, len(starts)


def fit_nb_gee(panel: list[PanelObservation], spec: ModelSpec = SPEC_DID) -> FitResult:
    """Fit the DiD count model; fall back to Poisson if the NB sweep stalls.

    Raises :class:`EstimationError` for degenerate panels or singular
    designs (naming the collinear terms). Non-convergence of the NB sweep is
    not an error: the result is refit with alpha fixed at zero (Poisson
    family) and flagged via ``fallback_used``.
    """
    y, D, names, offset, w, clusters, dropped = _design(panel, spec)
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise EstimationError("outcome counts must be finite and non-negative")
    _check_rank(D, names)

    beta, se, alpha, converged, iterations, n_clusters = _irls(
        y, D, offset, w, clusters, estimate_alpha=True)
    fallback = False
    if not converged:
        beta, se, alpha, converged, iterations, n_clusters = _irls(
            y, D, offset, w, clusters, estimate_alpha=False)
        fallback = True

    terms = {}
    for j, name in enumerate(names):
        est = float(beta[j])
        s = float(se[j])
        z = est / s if s > 0 else math.inf if est != 0 else 0.0
        p = float(erfc(abs(z) / math.sqrt(2.0))) if s > 0 else 0.0
        terms[name] = TermEstimate(est, s, z, p)
    return FitResult(
        terms=terms,
        alpha=float(alpha),
        n_obs=len(y),
        n_clusters=n_clusters,
        converged=converged,
        iterations=iterations,
        fallback_used=fallback,
        dropped_zero_exposure=dropped,
    )


def effect_percent(fit: FitResult, term: str = TERM_TREAT_POST,
                   ) -> tuple[float, float, float]:
    """Percent effect and 95% CI from a fitted coefficient.

    The CI exponentiates the coefficient interval endpoints, which is exact
    for the monotone transform 100*(exp(b) - 1).
    """
    if term not in fit.terms:
        raise KeyError(f"term {term!r} not in fit")
    t = fit.terms[term]
    point = 100.0 * (math.exp(t.estimate) - 1.0)
    lo = 100.0 * (math.exp(t.estimate - 1.96 * t.robust_se) - 1.0)
    hi = 100.0 * (math.exp(t.estimate + 1.96 * t.robust_se) - 1.0)
    return point, lo, hi


def holm_correct(p_values, alpha: float = 0.05) -> tuple[list[float], list[bool]]:
    """Holm-Bonferroni step-down adjustment, results in input order.

    adjusted_(i) = max over j <= i of min(1, (m - j + 1) * p_(j)) over the
    ascending ordering; a hypothesis is rejected while its adjusted p-value
    stays below alpha.
    """
    p = [float(x) for x in p_values]
    for x in p:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"p-value {x} outside [0, 1]")
    m = len(p)
    order = sorted(range(m), key=lambda i: (p[i], i))
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p[i]))
        adjusted[i] = running
    reject = [adj < alpha for adj in adjusted]
    return adjusted, reject


@dataclass(frozen=True)
class EffectReport:
    identity: str
    outcome_kind: str
    term: str
    estimate: float
    robust_se: float
    p_raw: float
    p_holm: float
    percent_effect: float
    ci_low: float
    ci_high: float
    significant: bool
    fallback_used: bool


@dataclass
class ExperimentResult:
    reports: list[EffectReport]
    failures: list[tuple[str, str, str]] = field(default_factory=list)  # identity, outcome, error
    nonconverged: list[tuple[str, str]] = field(default_factory=list)


def run_experiment(panels: dict[tuple[str, str], list[PanelObservation]],
                   spec: ModelSpec = SPEC_DID, alpha: float = 0.05,
                   ) -> ExperimentResult:
    """Fit every (identity, outcome) panel and Holm-correct within families.

    The family for each reported term is the set of identities sharing an
    outcome kind; treat x post and the two n_id terms are corrected as
    separate families. Failed fits are excluded from their family and
    recorded.
    """
    fits: dict[tuple[str, str], FitResult] = {}
    failures: list[tuple[str, str, str]] = []
    nonconverged: list[tuple[str, str]] = []
    for key in sorted(panels):
        try:
            fits[key] = fit_nb_gee(panels[key], spec)
            if not fits[key].converged:
                nonconverged.append(key)
        except (EstimationError, np.linalg.LinAlgError) as exc:
            failures.append((key[0], key[1], str(exc)))

    report_terms = [TERM_TREAT_POST]
    if spec.n_id_terms:
        report_terms += [TERM_N_ID, TERM_N_ID_TREAT_POST]

    reports: list[EffectReport] = []
    outcomes = sorted({outcome for _, outcome in fits})
    for outcome in outcomes:
        keys = [k for k in sorted(fits) if k[1] == outcome]
        for term in report_terms:
            raw = [fits[k].terms[term].p for k in keys]
            adjusted, reject = holm_correct(raw, alpha=alpha)
            for k, p_raw, p_holm, rej in zip(keys, raw, adjusted, reject):
                fit = fits[k]
                point, lo, hi = effect_percent(fit, term)
                t = fit.terms[term]
                reports.append(EffectReport(
                    identity=k[0],
                    outcome_kind=outcome,
                    term=term,
                    estimate=t.estimate,
                    robust_se=t.robust_se,
                    p_raw=p_raw,
                    p_holm=p_holm,
                    percent_effect=point,
                    ci_low=lo,
                    ci_high=hi,
                    significant=rej,
                    fallback_used=fit.fallback_used,
                ))
    reports.sort(key=lambda r: (r.outcome_kind, r.term, r.identity))
    return ExperimentResult(reports, failures, nonconverged)


_EFFECT_COLUMNS = ["identity", "outcome", "term", "estimate", "robust_se", "p_raw",
                   "p_holm", "percent_effect", "ci_low", "ci_high", "significant",
                   "fallback_used"]


def write_effects(result: ExperimentResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_EFFECT_COLUMNS)
        for r in result.reports:
            writer.writerow([
                r.identity, r.outcome_kind, r.term,
                format(r.estimate, ".10g"), format(r.robust_se, ".10g"),
                format(r.p_raw, ".10g"), format(r.p_holm, ".10g"),
                format(r.percent_effect, ".10g"), format(r.ci_low, ".10g"),
                format(r.ci_high, ".10g"), int(r.significant), int(r.fallback_used),
            ])


def read_effects(path: str | Path) -> list[EffectReport]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _EFFECT_COLUMNS:
            raise ValueError(f"unexpected effects header in {path}: {reader.fieldnames}")
        for row in reader:
            out.append(EffectReport(
                identity=row["identity"],
                outcome_kind=row["outcome"],
                term=row["term"],
                estimate=float(row["estimate"]),
                robust_se=float(row["robust_se"]),
                p_raw=float(row["p_raw"]),
                p_holm=float(row["p_holm"]),
                percent_effect=float(row["percent_effect"]),
                ci_low=float(row["ci_low"]),
                ci_high=float(row["ci_high"]),
                significant=row["significant"] == "1",
                fallback_used=row["fallback_used"] == "1",
            ))
    return out
