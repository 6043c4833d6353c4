"""Identity taxonomy: declarative regex rules, profile labeling, cohort classification.

A taxonomy file is YAML with a ``categories`` list; each category has a
``name``, an optional ``mutually_exclusive`` flag, and a ``subcategories``
list whose entries carry a ``name`` and a ``patterns`` list. A pattern is
either a plain regex source string or a mapping with ``pattern`` and optional
``word_boundary_anchored`` / ``case_insensitive`` keys (both default true).
See ``data/taxonomy.yaml`` for the bundled example.
"""
from __future__ import annotations

import csv
import re
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .events import ProfileTimeline


class TaxonomyError(ValueError):
    pass


@dataclass(frozen=True)
class IdentityRule:
    pattern: str
    word_boundary_anchored: bool = True
    case_insensitive: bool = True


@dataclass(frozen=True)
class Subcategory:
    name: str
    rules: tuple[IdentityRule, ...]


@dataclass(frozen=True)
class Category:
    name: str
    mutually_exclusive: bool
    subcategories: tuple[Subcategory, ...]


@dataclass(frozen=True)
class IdentityTaxonomy:
    categories: tuple[Category, ...]

    def identities(self) -> list[str]:
        """All 'category:subcategory' identifiers, in file order."""
        return [f"{c.name}:{s.name}" for c in self.categories for s in c.subcategories]

    def category(self, name: str) -> Category:
        for c in self.categories:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class IdentityLabel:
    """One subcategory match; span is byte offsets into the normalized profile."""

    category: str
    subcategory: str
    span: tuple[int, int]

    @property
    def identity(self) -> str:
        return f"{self.category}:{self.subcategory}"


@dataclass(frozen=True)
class CohortStatus:
    """Outcome of classifying one user timeline against one target identity."""

    variant: str  # identity_added | not_added | always_positive | always_negative | excluded
    identity: str | None = None
    change_time: int | None = None
    pre_profile: str | None = None
    post_profile: str | None = None
    reason: str | None = None


IDENTITY_ADDED = "identity_added"
NOT_ADDED = "not_added"
ALWAYS_POSITIVE = "always_positive"
ALWAYS_NEGATIVE = "always_negative"
EXCLUDED = "excluded"


def normalize_profile(text: str) -> str:
    """NFC-normalize and strip the surrounding whitespace of a profile."""
    return unicodedata.normalize("NFC", text).strip()


def _parse_rule(entry, where: str) -> IdentityRule:
    if isinstance(entry, str):
        return IdentityRule(pattern=entry)
    if isinstance(entry, dict) and "pattern" in entry:
        return IdentityRule(
            pattern=str(entry["pattern"]),
            word_boundary_anchored=bool(entry.get("word_boundary_anchored", True)),
            case_insensitive=bool(entry.get("case_insensitive", True)),
        )
    raise TaxonomyError(f"{where}: pattern entry must be a string or a mapping with 'pattern'")


def load_taxonomy(path: str | Path) -> IdentityTaxonomy:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "categories" not in doc:
        raise TaxonomyError(f"{path}: taxonomy file must contain a 'categories' list")
    categories = []
    seen_cats: set[str] = set()
    seen_subs: set[tuple[str, str]] = set()
    for centry in doc["categories"] or []:
        cname = str(centry.get("name", "")).strip()
        if not cname:
            raise TaxonomyError(f"{path}: category without a name")
        if cname in seen_cats:
            raise TaxonomyError(f"{path}: duplicate category {cname!r}")
        seen_cats.add(cname)
        subs = []
        for sentry in centry.get("subcategories") or []:
            sname = str(sentry.get("name", "")).strip()
            if not sname:
                raise TaxonomyError(f"{path}: category {cname!r} has a subcategory without a name")
            if (cname, sname) in seen_subs:
                raise TaxonomyError(f"{path}: duplicate subcategory {cname}:{sname}")
            seen_subs.add((cname, sname))
            patterns = sentry.get("patterns") or []
            if not patterns:
                raise TaxonomyError(f"{path}: subcategory {cname}:{sname} has no patterns")
            rules = tuple(
                _parse_rule(p, f"{cname}:{sname} rule {i}") for i, p in enumerate(patterns)
            )
            subs.append(Subcategory(sname, rules))
        categories.append(Category(cname, bool(centry.get("mutually_exclusive", False)), tuple(subs)))
    if not categories:
        raise TaxonomyError(f"{path}: no categories")
    return IdentityTaxonomy(tuple(categories))


class CompiledTaxonomy:
    """All taxonomy rules compiled into one shareable, immutable matcher."""

    def __init__(self, taxonomy: IdentityTaxonomy):
        self.taxonomy = taxonomy
        self._rules: list[tuple[str, str, re.Pattern]] = []
        self._exclusive = {c.name for c in taxonomy.categories if c.mutually_exclusive}
        for cat in taxonomy.categories:
            for sub in cat.subcategories:
                for idx, rule in enumerate(sub.rules):
                    source = unicodedata.normalize("NFC", rule.pattern)
                    if rule.word_boundary_anchored:
                        # (?<!\w)/(?!\w) instead of \b so patterns whose edges are
                        # not word characters (emoji, slashes) still anchor
                        source = rf"(?<!\w)(?:{source})(?!\w)"
                    flags = re.IGNORECASE if rule.case_insensitive else 0
                    try:
                        compiled = re.compile(source, flags)
                    except re.error as exc:
                        raise TaxonomyError(
                            f"invalid pattern in {cat.name}:{sub.name} rule {idx}: {exc}"
                        ) from exc
                    self._rules.append((cat.name, sub.name, compiled))

    def identities(self) -> list[str]:
        return self.taxonomy.identities()

    def label_profile(self, profile_text: str) -> tuple[set[IdentityLabel], set[str]]:
        """All subcategory labels for a profile plus mutual-exclusion conflicts.

        A category appears in the conflict set when it is mutually exclusive
        and at least two of its subcategories matched.
        """
        text = normalize_profile(profile_text)
        best: dict[tuple[str, str], tuple[int, int]] = {}
        for cat, sub, pattern in self._rules:
            m = pattern.search(text)
            if m is None:
                continue
            span = m.span()
            key = (cat, sub)
            if key not in best or span < best[key]:
                best[key] = span
        labels = set()
        per_cat: dict[str, set[str]] = {}
        for (cat, sub), (start, end) in best.items():
            byte_span = (
                len(text[:start].encode("utf-8")),
                len(text[:end].encode("utf-8")),
            )
            labels.add(IdentityLabel(cat, sub, byte_span))
            per_cat.setdefault(cat, set()).add(sub)
        conflicts = {
            cat for cat, subs in per_cat.items()
            if cat in self._exclusive and len(subs) >= 2
        }
        return labels, conflicts

    def identity_set(self, profile_text: str) -> set[str]:
        labels, _ = self.label_profile(profile_text)
        return {lab.identity for lab in labels}


def compile_taxonomy(source: IdentityTaxonomy | str | Path) -> CompiledTaxonomy:
    """Compile a taxonomy (or taxonomy file) into a matcher.

    Compilation is total: any invalid pattern raises :class:`TaxonomyError`
    naming the category, subcategory, and rule index.
    """
    if not isinstance(source, IdentityTaxonomy):
        source = load_taxonomy(source)
    if not source.categories:
        raise TaxonomyError("no categories")
    return CompiledTaxonomy(source)


def bundled_taxonomy_path() -> Path:
    return Path(resources.files("identity_effects").joinpath("data/taxonomy.yaml"))


def load_bundled_taxonomy() -> IdentityTaxonomy:
    return load_taxonomy(bundled_taxonomy_path())


def _split_identity(identity: str) -> tuple[str, str]:
    if ":" not in identity:
        raise ValueError(f"identity must be 'category:subcategory', got {identity!r}")
    cat, sub = identity.split(":", 1)
    return cat, sub


def _added_in_pair(matcher: CompiledTaxonomy, identity: str,
                   pre_profile: str, post_profile: str) -> bool:
    """Addition test shared by classify_user and the labeler evaluation.

    True when the target identity is absent from the pre profile, present in
    the post profile, and neither profile has a mutual-exclusion conflict in
    the identity's category.
    """
    cat, _ = _split_identity(identity)
    pre_labels, pre_conflicts = matcher.label_profile(pre_profile)
    post_labels, post_conflicts = matcher.label_profile(post_profile)
    if cat in pre_conflicts or cat in post_conflicts:
        return False
    pre_ids = {lab.identity for lab in pre_labels}
    post_ids = {lab.identity for lab in post_labels}
    return identity not in pre_ids and identity in post_ids


def classify_user(matcher: CompiledTaxonomy, timeline: ProfileTimeline,
                  identity: str, window: tuple[int, int]) -> CohortStatus:
    """Classify one user's timeline against a target identity.

    *window* is a half-open [start, end) interval; only snapshots inside it
    are considered. Two snapshots mean exactly one profile change.
    """
    cat, _ = _split_identity(identity)
    start, end = window
    snaps = [(ts, text) for ts, text in timeline.snapshots if start <= ts < end]
    if len(snaps) == 0:
        return CohortStatus(EXCLUDED, identity=identity, reason="no snapshots in window")
    if len(snaps) > 2:
        return CohortStatus(EXCLUDED, identity=identity, reason="multiple changes")

    if len(snaps) == 1:
        _, text = snaps[0]
        labels, conflicts = matcher.label_profile(text)
        ids = {lab.identity for lab in labels}
        if cat in conflicts:
            return CohortStatus(EXCLUDED, identity=identity,
                                reason=f"conflict in category {cat}")
        if identity in ids:
            return CohortStatus(ALWAYS_POSITIVE, identity=identity, pre_profile=text,
                                post_profile=text)
        if not ids:
            return CohortStatus(ALWAYS_NEGATIVE, identity=identity, pre_profile=text,
                                post_profile=text)
        return CohortStatus(EXCLUDED, identity=identity,
                            reason="unchanged profile with other identities")

    (pre_ts, pre_text), (post_ts, post_text) = snaps
    pre_labels, pre_conflicts = matcher.label_profile(pre_text)
    post_labels, post_conflicts = matcher.label_profile(post_text)
    if cat in pre_conflicts or cat in post_conflicts:
        return CohortStatus(EXCLUDED, identity=identity, change_time=post_ts,
                            reason=f"conflict in category {cat}")
    pre_ids = {lab.identity for lab in pre_labels}
    post_ids = {lab.identity for lab in post_labels}
    if identity in pre_ids:
        return CohortStatus(EXCLUDED, identity=identity, change_time=post_ts,
                            reason="identity present before change")
    if identity in post_ids:
        return CohortStatus(IDENTITY_ADDED, identity=identity, change_time=post_ts,
                            pre_profile=pre_text, post_profile=post_text)
    if not pre_ids and not post_ids:
        return CohortStatus(NOT_ADDED, identity=identity, change_time=post_ts,
                            pre_profile=pre_text, post_profile=post_text)
    return CohortStatus(EXCLUDED, identity=identity, change_time=post_ts,
                        reason="no identity addition")


@dataclass(frozen=True)
class LabelerScore:
    """Precision and recall may be absent when undefined (no positives)."""

    precision: float | None
    recall: float | None
    f1: float | None
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class FixturePair:
    pre_profile: str
    post_profile: str
    identity: str
    gold: bool


def evaluate_labeler(matcher: CompiledTaxonomy, fixture: list[FixturePair],
                     ) -> tuple[dict[str, LabelerScore], dict[str, LabelerScore]]:
    """Per-identity and per-category precision/recall/F1 of the addition test.

    The prediction for each (pre, post) pair is the same addition rule used
    by classify_user. Category scores are aggregated over their identities'
    confusion counts. Recall is absent (None) with no gold positives,
    precision is absent with no predicted positives; F1 needs both.
    """
    counts: dict[str, list[int]] = {}
    for pair in fixture:
        predicted = _added_in_pair(matcher, pair.identity, pair.pre_profile, pair.post_profile)
        tp, fp, fn, tn = counts.setdefault(pair.identity, [0, 0, 0, 0])
        if predicted and pair.gold:
            tp += 1
        elif predicted and not pair.gold:
            fp += 1
        elif not predicted and pair.gold:
            fn += 1
        else:
            tn += 1
        counts[pair.identity] = [tp, fp, fn, tn]

    def score(tp: int, fp: int, fn: int, tn: int) -> LabelerScore:
        precision = tp / (tp + fp) if tp + fp else None
        recall = tp / (tp + fn) if tp + fn else None
        if precision is None or recall is None or precision + recall == 0:
            f1 = None
        else:
            f1 = 2 * precision * recall / (precision + recall)
        return LabelerScore(precision, recall, f1, tp, fp, fn, tn)

    per_identity = {ident: score(*c) for ident, c in sorted(counts.items())}
    by_cat: dict[str, list[int]] = {}
    for ident, c in counts.items():
        cat = ident.split(":", 1)[0]
        agg = by_cat.setdefault(cat, [0, 0, 0, 0])
        for i in range(4):
            agg[i] += c[i]
    per_category = {cat: score(*c) for cat, c in sorted(by_cat.items())}
    return per_identity, per_category


def read_fixture(path: str | Path) -> list[FixturePair]:
    pairs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"pre_profile", "post_profile", "identity", "gold"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ValueError(f"fixture {path} must have columns {sorted(expected)}")
        for row in reader:
            pairs.append(FixturePair(
                pre_profile=row["pre_profile"],
                post_profile=row["post_profile"],
                identity=row["identity"],
                gold=row["gold"].strip() in ("1", "true", "True"),
            ))
    return pairs


def bundled_fixture_path() -> Path:
    return Path(resources.files("identity_effects").joinpath("data/labeler_fixture.csv"))
