"""Build the bundled labeler fixture: 20 annotated pre/post pairs per subcategory.

Each subcategory gets 10 positive pairs (identity phrase added) and 10
negatives split across three kinds: no disclosure in either profile,
disclosure in both, and disclosure only pre-change. The script verifies the
bundled taxonomy scores F1 = 1.0 on the result before writing
src/identity_effects/data/labeler_fixture.csv.

Usage: python tools/make_fixture.py
"""
from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np

from identity_effects.synth import NEUTRAL_BIO_PARTS
from identity_effects.taxonomy import (FixturePair, compile_taxonomy, evaluate_labeler,
                                       load_bundled_taxonomy)

PHRASES = {
    "age:13-17": ["15 years old", "16 y/o", "14yo"],
    "age:18-24": ["19 years old", "21 y/o", "18yo"],
    "age:25-34": ["27 years old", "30 y/o", "33yo"],
    "age:35-49": ["38 years old", "45 y/o", "40yo"],
    "age:50+": ["52 years old", "60 y/o", "55yo"],
    "ethnicity:african": ["african", "proudly african"],
    "ethnicity:american": ["american", "\U0001F1FA\U0001F1F8"],
    "ethnicity:british": ["british", "\U0001F1EC\U0001F1E7"],
    "ethnicity:canadian": ["canadian", "\U0001F1E8\U0001F1E6"],
    "ethnicity:german": ["german", "\U0001F1E9\U0001F1EA"],
    "ethnicity:indian": ["indian", "\U0001F1EE\U0001F1F3"],
    "ethnicity:irish": ["irish", "\U0001F1EE\U0001F1EA"],
    "ethnicity:japanese": ["japanese", "\U0001F1EF\U0001F1F5"],
    "ethnicity:mexican": ["mexican", "\U0001F1F2\U0001F1FD"],
    "gender:men": ["he/him", "he / him", "he/his"],
    "gender:women": ["she/her", "she / her", "she/hers"],
    "gender:nonbinary": ["they/them", "non-binary", "enby"],
    "occupation:administrative": ["office administrator", "admin assistant",
                                  "receptionist"],
    "occupation:business": ["entrepreneur", "business owner", "marketer"],
    "occupation:community": ["social worker", "community organizer", "youth mentor"],
    "occupation:computer": ["software engineer", "programmer", "web developer"],
    "occupation:education": ["teacher", "professor", "lecturer"],
    "occupation:engineering": ["civil engineer", "mechanical engineer"],
    "occupation:healthcare": ["nurse", "physician", "paramedic"],
    "occupation:legal": ["lawyer", "attorney", "paralegal"],
    "occupation:management": ["manager", "founder", "ceo"],
    "occupation:science": ["scientist", "researcher", "biologist"],
    "personal:socialmedia": ["insta: nightowl", "snap: nightowl", "tiktok addict"],
    "personal:sensitive": ["unemployed", "disabled", "chronic illness warrior"],
    "political:conservative": ["conservative", "republican", "maga"],
    "political:liberal": ["liberal", "democrat", "progressive"],
    "political:activism": ["blm", "black lives matter", "activist"],
    "relationship:partner": ["husband", "wife", "spouse"],
    "relationship:parent": ["mom of two", "proud dad", "father of three"],
    "relationship:sibling": ["big brother", "little sister", "sibling of four"],
    "religion:christian": ["christian", "catholic", "baptist"],
    "religion:islam": ["muslim", "islamic studies"],
    "religion:hinduism": ["hindu", "hinduism"],
    "religion:atheism": ["atheist", "agnostic"],
    "religion:general": ["god first", "child of god"],
    "sexuality:lgbtq": ["queer", "lgbtq+", "lesbian"],
}

N_POSITIVE = 10
NEGATIVE_KINDS = ("none", "none", "none", "none", "both", "both", "both",
                  "pre_only", "pre_only", "pre_only")


def neutral_bio(rng, exclude: set[str] = frozenset()) -> str:
    parts = [p for p in NEUTRAL_BIO_PARTS if p not in exclude]
    picked = rng.choice(len(parts), size=2, replace=False)
    return " | ".join(parts[i] for i in picked)


def build_pairs() -> list[FixturePair]:
    taxonomy = load_bundled_taxonomy()
    identities = taxonomy.identities()
    missing = [i for i in identities if i not in PHRASES]
    if missing:
        sys.exit(f"phrase bank missing identities: {missing}")
    rng = np.random.default_rng(20200406)
    pairs: list[FixturePair] = []
    for identity in identities:
        phrases = PHRASES[identity]
        for k in range(N_POSITIVE):
            pre = neutral_bio(rng)
            phrase = phrases[k % len(phrases)]
            pairs.append(FixturePair(pre, f"{pre} | {phrase}", identity, True))
        for k, kind in enumerate(NEGATIVE_KINDS):
            phrase = phrases[k % len(phrases)]
            base = neutral_bio(rng)
            if kind == "none":
                post = f"{base} | {neutral_bio(rng)}"
                pairs.append(FixturePair(base, post, identity, False))
            elif kind == "both":
                pre = f"{base} | {phrase}"
                pairs.append(FixturePair(pre, f"{pre} | {neutral_bio(rng)}",
                                         identity, False))
            else:  # pre_only: phrase removed by the change
                pre = f"{base} | {phrase}"
                pairs.append(FixturePair(pre, base, identity, False))
    return pairs


def main() -> None:
    pairs = build_pairs()
    matcher = compile_taxonomy(load_bundled_taxonomy())
    per_identity, per_category = evaluate_labeler(matcher, pairs)
    bad = {k: v for k, v in per_identity.items() if v.f1 != 1.0}
    if bad:
        for k, v in bad.items():
            print(f"FAIL {k}: P={v.precision} R={v.recall} "
                  f"tp={v.tp} fp={v.fp} fn={v.fn}")
        sys.exit("fixture does not reach F1=1.0 on every identity")
    out = Path(__file__).resolve().parents[1] / "src/identity_effects/data/labeler_fixture.csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pre_profile", "post_profile", "identity", "gold"])
        for p in pairs:
            writer.writerow([p.pre_profile, p.post_profile, p.identity, int(p.gold)])
    print(f"wrote {len(pairs)} pairs covering {len(per_identity)} identities -> {out}")
    print(f"category F1: " + ", ".join(
        f"{cat}={score.f1:.2f}" for cat, score in per_category.items()))


if __name__ == "__main__":
    main()
