"""Forest plots and text summaries for estimation output.

One SVG per outcome kind for the treat x post effects: point estimates with
95% CIs, significant positives in red, significant negatives in blue,
everything else grey. SVG output is deterministic (fixed hash salt, no
embedded date) so reruns are byte identical.
"""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .estimation import EffectReport, TERM_TREAT_POST  # noqa: E402

SIG_POSITIVE = "#c0392b"
SIG_NEGATIVE = "#2e6da4"
NEUTRAL = "#8a8a8a"


def _marker_color(report: EffectReport) -> str:
    if report.significant and report.percent_effect > 0:
        return SIG_POSITIVE
    if report.significant and report.percent_effect < 0:
        return SIG_NEGATIVE
    return NEUTRAL


def forest_plot(reports: list[EffectReport], path: str | Path, title: str) -> None:
    """Render one outcome's effects as a forest plot SVG."""
    rows = sorted(reports, key=lambda r: r.identity, reverse=True)
    height = max(2.0, 0.45 * len(rows) + 1.2)
    fig, ax = plt.subplots(figsize=(7.0, height))
    for i, r in enumerate(rows):
        color = _marker_color(r)
        ax.plot([r.ci_low, r.ci_high], [i, i], color=color, lw=1.6, zorder=2)
        ax.plot([r.percent_effect], [i], "o", color=color, ms=5.5, zorder=3)
    ax.axvline(0.0, color="#444444", lw=0.8, ls="--", zorder=1)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([r.identity for r in rows], fontsize=9)
    ax.set_xlabel("percent effect (95% CI)")
    ax.set_title(title, fontsize=11)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    plt.rcParams["svg.hashsalt"] = "identity-effects"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def summary_text(reports: list[EffectReport]) -> str:
    lines = []
    header = (f"{'outcome':<28}{'identity':<24}{'term':<24}{'effect%':>9}"
              f"{'ci_low':>9}{'ci_high':>9}{'p_holm':>9}  sig")
    lines.append(header)
    lines.append("-" * len(header))
    if not reports:
        lines.append("(no effects)")
    for r in sorted(reports, key=lambda r: (r.outcome_kind, r.term, r.identity)):
        lines.append(
            f"{r.outcome_kind:<28}{r.identity:<24}{r.term:<24}"
            f"{r.percent_effect:>9.2f}{r.ci_low:>9.2f}{r.ci_high:>9.2f}"
            f"{r.p_holm:>9.4f}  {'*' if r.significant else ''}")
    return "\n".join(lines) + "\n"


def render_report(reports: list[EffectReport], out_dir: str | Path,
                  ) -> dict[str, Path]:
    """Write one forest-plot SVG per outcome kind plus a text summary.

    An empty report list still yields a valid (empty) summary file.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, Path] = {}

    by_outcome: dict[str, list[EffectReport]] = defaultdict(list)
    for r in reports:
        if r.term == TERM_TREAT_POST:
            by_outcome[r.outcome_kind].append(r)
    for outcome in sorted(by_outcome):
        path = out_dir / f"forest_{outcome}.svg"
        forest_plot(by_outcome[outcome], path,
                    f"Disclosure effect on {outcome.replace('_', ' ')}")
        outputs[outcome] = path

    summary = out_dir / "summary.txt"
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(summary_text(reports))
    outputs["summary"] = summary
    return outputs
