"""Command-line interface.

Subcommands mirror the pipeline stages (ingest, label, cohort, match, panel,
estimate, distances, report), plus `simulate` for synthetic scenarios and
`run` for the composed pipeline. Exit codes: 0 success, 2 config error,
3 data error, 4 estimation non-convergence without a usable fallback.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .distances import read_matrix, shift_report, write_shift_report
from .estimation import NAMED_SPECS, read_effects, run_experiment, write_effects
from .events import (FilterPolicy, ParseError, build_timelines, filter_users,
                     read_events, read_timelines, write_timelines)
from .matching import read_covariates, read_matches
from .panel import ScoreTable, assemble_panel, read_panel, write_panel
from .pipeline import (ConfigError, RunConfig, build_outcomes, classify_cohort,
                       match_cohort, read_cohort, run_pipeline, write_cohort)
from .report import render_report
from .synth import (bundled_scenario_path, emit_network_scenario, generate,
                    load_scenario)
from .taxonomy import (TaxonomyError, compile_taxonomy, load_bundled_taxonomy,
                       load_taxonomy)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NONCONVERGED = 4


def _matcher(taxonomy_path: str | None):
    taxonomy = load_taxonomy(taxonomy_path) if taxonomy_path else load_bundled_taxonomy()
    return compile_taxonomy(taxonomy)


def cmd_ingest(args) -> int:
    events, skipped = read_events(args.input, strict=args.strict)
    timelines = build_timelines(events)
    policy = FilterPolicy(allowed_langs=tuple(args.lang or ["en"]),
                          exclude_verified=not args.include_verified)
    retained = filter_users(timelines, events, policy)
    write_timelines({u: timelines[u] for u in retained}, args.out)
    print(f"ingest: {len(events)} events ({skipped} skipped), "
          f"{len(timelines)} users, {len(retained)} retained -> {args.out}")
    return EXIT_OK


def cmd_label(args) -> int:
    matcher = _matcher(args.taxonomy)
    timelines = read_timelines(args.timelines)
    if args.identity:
        # with a target identity this is cohort classification
        if args.window_start is None or args.window_end is None:
            raise ConfigError("--identity also needs --window-start/--window-end")
        cohort = classify_cohort(matcher, timelines, set(timelines), args.identity,
                                 (args.window_start, args.window_end))
        write_cohort(cohort, args.out)
        print(f"label: cohort for {args.identity} -> {args.out}")
        return EXIT_OK
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "timestamp", "category", "subcategory",
                         "span_start", "span_end"])
        n = 0
        for uid in sorted(timelines):
            for ts, text in timelines[uid].snapshots:
                labels, _ = matcher.label_profile(text)
                for lab in sorted(labels, key=lambda l: (l.category, l.subcategory)):
                    writer.writerow([uid, ts, lab.category, lab.subcategory,
                                     lab.span[0], lab.span[1]])
                    n += 1
    print(f"label: {n} labels -> {args.out}")
    return EXIT_OK


def cmd_cohort(args) -> int:
    matcher = _matcher(args.taxonomy)
    timelines = read_timelines(args.timelines)
    cohort = classify_cohort(matcher, timelines, set(timelines), args.identity,
                             (args.window_start, args.window_end))
    write_cohort(cohort, args.out)
    counts: dict[str, int] = {}
    for status in cohort.values():
        counts[status.variant] = counts.get(status.variant, 0) + 1
    print(f"cohort: {dict(sorted(counts.items()))} -> {args.out}")
    return EXIT_OK


def cmd_match(args) -> int:
    cohort = read_cohort(args.cohort)
    covariates = read_covariates(args.covariates)
    stage = match_cohort(cohort, covariates, k_neighbors=args.k_neighbors)
    from .matching import write_balance, write_matches

    write_matches(stage.result, args.out)
    write_balance(stage.balance, args.balance)
    print(f"match: {len(stage.result.matches)} matched, "
          f"{len(stage.result.unmatched)} unmatched, "
          f"balance {'pass' if stage.balance.all_passed() else 'FAIL'} -> {args.out}")
    return EXIT_OK


def cmd_panel(args) -> int:
    from collections import defaultdict

    events, _ = read_events(args.events)
    scores = ScoreTable.read(args.scores) if args.scores else None
    cohort = read_cohort(args.cohort)
    matches = read_matches(args.matches)
    covariates = read_covariates(args.covariates)
    matcher = _matcher(args.taxonomy)

    by_author = defaultdict(list)
    by_target = defaultdict(list)
    for event in events:
        by_author[event.user_id].append(event)
        if event.target_user_id:
            by_target[event.target_user_id].append(event)
    users = sorted({m.treated_id for m in matches}
                   | {c for m in matches for c in m.control_ids})
    outcomes = build_outcomes(by_author, by_target, scores, matcher, cohort, users,
                              args.outcome, args.identity,
                              window_days=args.window_days,
                              network_weeks=args.network_weeks)
    rows, report = assemble_panel(matches, outcomes, covariates)
    write_panel({(args.identity, args.outcome): rows}, args.out)
    print(f"panel: {len(rows)} rows ({report.n_treated} treated, "
          f"{report.n_controls} controls, {len(report.flagged_users)} flagged) "
          f"-> {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    panels = read_panel(args.panel)
    result = run_experiment(panels, NAMED_SPECS[args.spec], alpha=args.alpha)
    write_effects(result, args.out)
    for identity, outcome, error in result.failures:
        print(f"warning: fit failed for {identity}/{outcome}: {error}",
              file=sys.stderr)
    print(f"estimate: {len(result.reports)} effect rows -> {args.out}")
    if result.nonconverged:
        print(f"error: non-convergence without fallback for {result.nonconverged}",
              file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_distances(args) -> int:
    report = shift_report(
        read_matrix(args.ap_topics), read_matrix(args.pre_topics),
        read_matrix(args.post_topics), read_matrix(args.ap_styles),
        read_matrix(args.pre_styles), read_matrix(args.post_styles))
    write_shift_report(report, args.out)
    print(f"distances: topic {report['topic']}, style {report['style']} -> {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    path = Path(args.config)
    if not path.exists():
        path = bundled_scenario_path(args.config)
    config = load_scenario(path)
    if args.seed is not None:
        config.seed = args.seed
    if args.network:
        paths = emit_network_scenario(config, args.out_dir)
    else:
        paths = generate(config, args.out_dir)
    print("simulate: wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {"out_dir": args.out_dir, "strict": args.strict or None,
                 "spec": args.spec, "alpha": args.alpha}
    config = RunConfig.from_file(args.config, overrides)
    manifest = run_pipeline(config)
    print(f"run: manifest -> {Path(config.out_dir) / 'manifest.json'}")
    estimate = manifest.stages.get("estimate", {})
    if estimate.get("fits_attempted") and estimate.get("fits_failed") \
            == estimate.get("fits_attempted"):
        print("error: every estimation failed", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_report(args) -> int:
    reports = read_effects(args.effects)
    outputs = render_report(reports, args.out_dir)
    print("report: wrote " + ", ".join(str(p) for p in sorted(outputs.values())))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="identity-effects",
        description="Detect profile identity disclosures and estimate their "
                    "behavioral effects with matched DiD regressions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse events and build profile timelines")
    p.add_argument("--input", required=True)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--lang", action="append", default=None,
                   help="allowed language tag (repeatable; default en)")
    p.add_argument("--include-verified", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("label", help="label profile snapshots with identities")
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--timelines", required=True)
    p.add_argument("--identity", default=None,
                   help="classify users against this identity instead of "
                        "emitting per-snapshot labels")
    p.add_argument("--window-start", type=int, default=None)
    p.add_argument("--window-end", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("cohort", help="classify users against a target identity")
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--timelines", required=True)
    p.add_argument("--identity", required=True)
    p.add_argument("--window-start", type=int, required=True)
    p.add_argument("--window-end", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("match", help="propensity matching with balance report")
    p.add_argument("--cohort", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--balance", required=True)
    p.add_argument("--k-neighbors", type=int, default=5)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("panel", help="build pre/post outcome panel")
    p.add_argument("--events", required=True)
    p.add_argument("--scores", default=None)
    p.add_argument("--cohort", required=True)
    p.add_argument("--matches", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--identity", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--window-days", type=int, default=30)
    p.add_argument("--network-weeks", type=int, default=12)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_panel)

    p = sub.add_parser("estimate", help="fit DiD regressions and correct p-values")
    p.add_argument("--panel", required=True)
    p.add_argument("--spec", choices=sorted(NAMED_SPECS), default="did")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("distances", help="topic/style shift report")
    p.add_argument("--ap-topics", required=True)
    p.add_argument("--pre-topics", required=True)
    p.add_argument("--post-topics", required=True)
    p.add_argument("--ap-styles", required=True)
    p.add_argument("--pre-styles", required=True)
    p.add_argument("--post-styles", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--config", required=True,
                   help="scenario file or bundled name "
                        "(null, confounded-null, confounded-effect)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--network", action="store_true",
                   help="emit the network (homophily) variant")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="composed pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--spec", choices=sorted(NAMED_SPECS), default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="forest plots and summary from effects.csv")
    p.add_argument("--effects", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TaxonomyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"config error: missing file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
