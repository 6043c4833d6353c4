"""End-to-end orchestration: stage functions, run manifest, composed runs.

Each stage is independently invocable (the CLI exposes one subcommand per
stage) and ``run_pipeline`` composes them in order, writing every
intermediate artifact as delimited text plus a deterministic run manifest.
Wall-clock timings go to a sidecar file so manifests stay byte identical
across reruns on identical inputs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .events import (ActivityEvent, FilterPolicy, ProfileTimeline, build_timelines,
                     filter_users, read_events, total_snapshots, write_timelines)
from .estimation import NAMED_SPECS, run_experiment, write_effects
from .matching import (CovariateVector, MatchResult, balance_report,
                       extract_covariates, fit_propensity, score_many,
                       stratify_and_match, write_balance, write_covariates,
                       write_matches)
from .panel import (NETWORK_OUTCOMES, OUTCOME_KINDS, PanelObservation, ScoreTable,
                    UserOutcome, assemble_panel, build_ego_network,
                    count_offensive_replies, count_outcomes, write_panel)
from .report import render_report
from .taxonomy import (CohortStatus, CompiledTaxonomy, IDENTITY_ADDED, NOT_ADDED,
                       classify_user, compile_taxonomy, load_bundled_taxonomy,
                       load_taxonomy)
from .timeutil import week_bucket

ALL_OUTCOMES = OUTCOME_KINDS + ("offensive_replies",) + NETWORK_OUTCOMES


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str
    out_dir: str
    identities: list[str]
    outcomes: list[str]
    window_start: int
    window_end: int
    scores: str | None = None
    taxonomy: str | None = None
    lang: list[str] = field(default_factory=lambda: ["en"])
    exclude_verified: bool = True
    strict: bool = False
    spec: str = "did"
    alpha: float = 0.05
    k_neighbors: int = 5
    window_days: int = 30
    network_weeks: int = 12
    threads: int = 1

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if overrides:
            doc.update({k: v for k, v in overrides.items() if v is not None})
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = [k for k in ("input", "out_dir", "identities", "outcomes",
                               "window_start", "window_end") if k not in doc]
        if missing:
            raise ConfigError(f"config missing required keys: {missing}")
        config = cls(**doc)
        config.validate()
        return config

    def validate(self) -> None:
        for outcome in self.outcomes:
            if outcome not in ALL_OUTCOMES:
                raise ConfigError(
                    f"unknown outcome {outcome!r}; valid: {list(ALL_OUTCOMES)}")
        if self.spec not in NAMED_SPECS:
            raise ConfigError(f"unknown spec {self.spec!r}; valid: {sorted(NAMED_SPECS)}")
        if not self.identities:
            raise ConfigError("config needs at least one identity")
        if self.window_start >= self.window_end:
            raise ConfigError("window_start must precede window_end")


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def check_identity_known(matcher: CompiledTaxonomy, identity: str) -> None:
    known = matcher.identities()
    if identity not in known:
        raise ConfigError(
            f"unknown identity {identity!r}; valid identities: {', '.join(known)}")


def classify_cohort(matcher: CompiledTaxonomy, timelines: dict[str, ProfileTimeline],
                    users: set[str], identity: str, window: tuple[int, int],
                    ) -> dict[str, CohortStatus]:
    check_identity_known(matcher, identity)
    return {uid: classify_user(matcher, timelines[uid], identity, window)
            for uid in sorted(users)}


def write_cohort(cohort: dict[str, CohortStatus], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "identity", "status", "change_time", "reason"])
        for uid in sorted(cohort):
            status = cohort[uid]
            writer.writerow([uid, status.identity or "", status.variant,
                             "" if status.change_time is None else status.change_time,
                             status.reason or ""])


def read_cohort(path: str | Path) -> dict[str, CohortStatus]:
    out: dict[str, CohortStatus] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["user_id", "identity", "status", "change_time", "reason"]
        if reader.fieldnames != expected:
            raise ValueError(f"unexpected cohort header in {path}: {reader.fieldnames}")
        for row in reader:
            out[row["user_id"]] = CohortStatus(
                variant=row["status"],
                identity=row["identity"] or None,
                change_time=int(row["change_time"]) if row["change_time"] else None,
                reason=row["reason"] or None,
            )
    return out


def cohort_covariates(events_by_user: dict[str, list[ActivityEvent]],
                      cohort: dict[str, CohortStatus],
                      ) -> dict[str, CovariateVector]:
    """Covariates at the change date for treated and control-pool users."""
    out: dict[str, CovariateVector] = {}
    for uid, status in cohort.items():
        if status.variant not in (IDENTITY_ADDED, NOT_ADDED):
            continue
        vec = extract_covariates(events_by_user.get(uid, []), status.change_time)
        if vec is not None:
            out[uid] = vec
    return out


@dataclass
class MatchStage:
    model: object
    result: MatchResult
    balance: object


def match_cohort(cohort: dict[str, CohortStatus],
                 covariates: dict[str, CovariateVector],
                 k_neighbors: int = 5) -> MatchStage:
    """Propensity fit, stratification, and same-week matching for one identity."""
    treated_ids = sorted(u for u, s in cohort.items()
                         if s.variant == IDENTITY_ADDED and u in covariates)
    control_ids = sorted(u for u, s in cohort.items()
                         if s.variant == NOT_ADDED and u in covariates)
    if not treated_ids or not control_ids:
        raise ConfigError("matching needs at least one treated and one control user")
    model = fit_propensity([covariates[u] for u in treated_ids],
                           [covariates[u] for u in control_ids])
    ids = treated_ids + control_ids
    scores = dict(zip(ids, score_many(model, [covariates[u] for u in ids])))
    z = model.transform([covariates[u] for u in ids])
    z_map = {u: z[i] for i, u in enumerate(ids)}
    weeks = {u: week_bucket(cohort[u].change_time) for u in ids}
    result = stratify_and_match(treated_ids, control_ids, scores, weeks, z_map,
                                k_neighbors=k_neighbors)

    matched_treated = result.matched_treated()
    controls_with_mult = [cid for ms in result.matches for cid in ms.control_ids]
    balance = balance_report(
        [covariates[u] for u in treated_ids],
        [covariates[u] for u in control_ids],
        [covariates[u] for u in matched_treated],
        [covariates[u] for u in controls_with_mult],
    )
    return MatchStage(model, result, balance)


def _ego_subset(events_by_author: dict[str, list[ActivityEvent]],
                events_by_target: dict[str, list[ActivityEvent]],
                ego: str) -> list[ActivityEvent]:
    own = events_by_author.get(ego, [])
    inbound = events_by_target.get(ego, [])
    touched: set[str] = set()
    for event in own:
        if event.target_user_id and event.target_user_id != ego:
            touched.add(event.target_user_id)
    for event in inbound:
        if event.user_id != ego:
            touched.add(event.user_id)
    subset = list(own) + list(inbound)
    for alter in touched:
        subset.extend(events_by_author.get(alter, []))
    return subset


def build_outcomes(events_by_author: dict[str, list[ActivityEvent]],
                   events_by_target: dict[str, list[ActivityEvent]],
                   scores: ScoreTable | None, matcher: CompiledTaxonomy,
                   cohort: dict[str, CohortStatus], users: list[str],
                   outcome: str, identity: str, window_days: int = 30,
                   network_weeks: int = 12) -> dict[str, UserOutcome]:
    """Per-user pre/post outcome tuples for one (identity, outcome) panel."""
    outcomes: dict[str, UserOutcome] = {}
    for uid in users:
        change = cohort[uid].change_time
        if outcome in OUTCOME_KINDS:
            if scores is None and outcome.startswith("identity_"):
                raise ConfigError(f"outcome {outcome!r} requires a scores file")
            counts = count_outcomes(events_by_author.get(uid, []),
                                    scores or ScoreTable(), uid, change, outcome,
                                    identity=identity, window_days=window_days)
            outcomes[uid] = UserOutcome.from_counts(counts)
        elif outcome == "offensive_replies":
            if scores is None:
                raise ConfigError("offensive_replies requires a scores file")
            relevant = events_by_author.get(uid, []) + events_by_target.get(uid, [])
            counts = count_offensive_replies(relevant, scores, uid, change,
                                             identity, window_days=window_days)
            outcomes[uid] = UserOutcome.from_counts(counts)
        elif outcome in NETWORK_OUTCOMES:
            subset = _ego_subset(events_by_author, events_by_target, uid)
            pre, post = build_ego_network(subset, uid, change, matcher,
                                          weeks=network_weeks)
            if outcome == "same_identity_out_degree":
                pair = (pre.same_identity_out_degree(identity),
                        post.same_identity_out_degree(identity))
            elif outcome == "same_identity_in_degree":
                pair = (pre.same_identity_in_degree(identity),
                        post.same_identity_in_degree(identity))
            elif outcome == "out_degree":
                pair = (pre.out_degree(), post.out_degree())
            else:
                pair = (pre.in_degree(), post.in_degree())
            outcomes[uid] = UserOutcome(y=pair)
        else:
            raise ConfigError(f"unknown outcome {outcome!r}")
    return outcomes


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    inputs: dict[str, str]
    stages: dict
    wall_clock: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        # timings live in the sidecar so manifests stay byte identical
        doc = {
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "stages": self.stages,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_pipeline(config: RunConfig) -> RunManifest:
    """Execute ingest, cohort, match, panel, estimate, and report in order."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # hash only analysis-determining keys so the same analysis rerun into a
    # different directory produces an identical manifest
    hashed = {k: v for k, v in config.__dict__.items()
              if k not in ("out_dir", "threads")}
    canonical = json.dumps(hashed, sort_keys=True, default=str)
    manifest = RunManifest(
        tool_version=__version__,
        config_hash="sha256:" + hashlib.sha256(canonical.encode()).hexdigest(),
        inputs={"events": sha256_file(config.input)},
        stages={},
    )
    if config.scores:
        manifest.inputs["scores"] = sha256_file(config.scores)
    timings: list[tuple[str, float]] = []

    def timed(name: str):
        timings.append((name, time.perf_counter()))

    # ingest
    timed("ingest")
    events, skipped = read_events(config.input, strict=config.strict)
    timelines = build_timelines(events)
    policy = FilterPolicy(allowed_langs=tuple(config.lang),
                          exclude_verified=config.exclude_verified)
    retained = filter_users(timelines, events, policy)
    write_timelines({u: timelines[u] for u in retained}, out_dir / "timelines.csv")
    manifest.stages["ingest"] = {
        "events": len(events),
        "skipped": skipped,
        "users": len(timelines),
        "snapshots": total_snapshots(timelines),
        "retained_users": len(retained),
    }

    matcher = compile_taxonomy(
        load_taxonomy(config.taxonomy) if config.taxonomy else load_bundled_taxonomy())
    scores = ScoreTable.read(config.scores) if config.scores else None
    window = (config.window_start, config.window_end)

    events_by_author: dict[str, list[ActivityEvent]] = defaultdict(list)
    events_by_target: dict[str, list[ActivityEvent]] = defaultdict(list)
    for event in events:
        events_by_author[event.user_id].append(event)
        if event.target_user_id:
            events_by_target[event.target_user_id].append(event)

    panels: dict[tuple[str, str], list[PanelObservation]] = {}
    cohort_stage: dict[str, dict] = {}
    match_stage: dict[str, dict] = {}
    panel_stage: dict[str, dict] = {}
    for identity in config.identities:
        timed(f"cohort[{identity}]")
        cohort = classify_cohort(matcher, timelines, retained, identity, window)
        safe = identity.replace(":", "_")
        write_cohort(cohort, out_dir / f"cohort_{safe}.csv")
        variant_counts: dict[str, int] = defaultdict(int)
        for status in cohort.values():
            variant_counts[status.variant] += 1
        cohort_stage[identity] = dict(sorted(variant_counts.items()))

        timed(f"covariates[{identity}]")
        covariates = cohort_covariates(events_by_author, cohort)
        write_covariates(covariates, out_dir / f"covariates_{safe}.csv")

        timed(f"match[{identity}]")
        stage = match_cohort(cohort, covariates, k_neighbors=config.k_neighbors)
        write_matches(stage.result, out_dir / f"matches_{safe}.csv")
        write_balance(stage.balance, out_dir / f"balance_{safe}.csv")
        match_stage[identity] = {
            "treated": len(stage.result.matches) + len(stage.result.unmatched),
            "matched_treated": len(stage.result.matches),
            "matched_controls": len(stage.result.matched_controls()),
            "unmatched_treated": len(stage.result.unmatched),
            "strata": len(stage.result.strata),
            "balance_pass": stage.balance.all_passed(),
        }

        timed(f"panel[{identity}]")
        users = stage.result.matched_treated() + stage.result.matched_controls()
        for outcome in config.outcomes:
            outcomes = build_outcomes(events_by_author, events_by_target, scores,
                                      matcher, cohort, users, outcome, identity,
                                      window_days=config.window_days,
                                      network_weeks=config.network_weeks)
            rows, report = assemble_panel(stage.result.matches, outcomes, covariates)
            panels[(identity, outcome)] = rows
            panel_stage[f"{identity}|{outcome}"] = {
                "rows": len(rows),
                "treated_users": report.n_treated,
                "control_users": report.n_controls,
                "flagged": len(report.flagged_users),
                "missing_covariates": len(report.missing_covariates),
            }

    manifest.stages["cohort"] = cohort_stage
    manifest.stages["match"] = match_stage
    manifest.stages["panel"] = panel_stage
    write_panel(panels, out_dir / "panel.csv")

    timed("estimate")
    result = run_experiment(panels, NAMED_SPECS[config.spec], alpha=config.alpha)
    write_effects(result, out_dir / "effects.csv")
    manifest.stages["estimate"] = {
        "fits_attempted": len(panels),
        "fits_failed": len(result.failures),
        "fallback_used": sum(1 for r in result.reports if r.fallback_used),
        "reports": len(result.reports),
    }

    timed("report")
    render_report(result.reports, out_dir / "report")
    timed("done")

    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(manifest.to_json())
    with open(out_dir / "timings.txt", "w", encoding="utf-8", newline="\n") as fh:
        for (name, start), (_, end) in zip(timings, timings[1:]):
            elapsed = end - start
            manifest.wall_clock[name] = elapsed
            fh.write(f"{name}\t{elapsed:.3f}s\n")
    return manifest
