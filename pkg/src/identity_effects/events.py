"""Activity-stream parsing, profile-timeline reconstruction, and population filters.

The input format is newline-delimited JSON, one event per line, UTF-8,
optionally gzip-compressed. Field names match :class:`ActivityEvent`.
"""
from __future__ import annotations

import gzip
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import IO, Iterable

EVENT_KINDS = ("tweet", "retweet", "reply", "quote")

_REQUIRED_FIELDS = (
    "event_id", "user_id", "timestamp", "kind", "text", "profile_text",
    "friends_count", "followers_count", "statuses_count",
    "account_created_at", "verified", "lang",
)

_COUNTER_FIELDS = ("friends_count", "followers_count", "statuses_count")


class ParseError(ValueError):
    """Raised in strict mode when a record cannot be parsed.

    Carries the 1-based line number and the offending field (when known).
    """

    def __init__(self, line_no: int, field_name: str, message: str):
        self.line_no = line_no
        self.field_name = field_name
        super().__init__(f"line {line_no}, field {field_name!r}: {message}")


@dataclass(frozen=True)
class ActivityEvent:
    event_id: str
    user_id: str
    timestamp: int
    kind: str
    text: str
    profile_text: str
    friends_count: int
    followers_count: int
    statuses_count: int
    account_created_at: int
    verified: bool
    lang: str
    target_user_id: str | None = None

    def sort_key(self) -> tuple[int, str]:
        # timestamp ties are broken by event_id so downstream ordering is total
        return (self.timestamp, self.event_id)


@dataclass(frozen=True)
class ProfileTimeline:
    """Chronological, run-length-deduplicated profile history for one user."""

    user_id: str
    snapshots: tuple[tuple[int, str], ...]

    def profile_at(self, timestamp: int) -> str | None:
        """Profile text in effect at *timestamp*, or None if before first snapshot."""
        current = None
        for ts, text in self.snapshots:
            if ts > timestamp:
                break
            current = text
        return current


@dataclass(frozen=True)
class FilterPolicy:
    allowed_langs: tuple[str, ...] = ("en",)
    exclude_verified: bool = True


def _check_record(rec: dict, line_no: int) -> ActivityEvent:
    for name in _REQUIRED_FIELDS:
        if name not in rec:
            raise ParseError(line_no, name, "missing field")
    kind = rec["kind"]
    if kind not in EVENT_KINDS:
        raise ParseError(line_no, "kind", f"unknown kind {kind!r}")
    try:
        timestamp = int(rec["timestamp"])
        created = int(rec["account_created_at"])
        counters = {name: int(rec[name]) for name in _COUNTER_FIELDS}
    except (TypeError, ValueError) as exc:
        raise ParseError(line_no, "timestamp", f"non-integer numeric field: {exc}") from exc
    for name, value in counters.items():
        if value < 0:
            raise ParseError(line_no, name, "negative counter")
    if timestamp < created:
        raise ParseError(line_no, "timestamp", "event precedes account creation")
    target = rec.get("target_user_id")
    if target is not None and not isinstance(target, str):
        raise ParseError(line_no, "target_user_id", "must be a string or null")
    if kind == "reply" and not target:
        raise ParseError(line_no, "target_user_id", "reply without target author")
    if not isinstance(rec["event_id"], str) or not rec["event_id"]:
        raise ParseError(line_no, "event_id", "must be a non-empty string")
    if not isinstance(rec["user_id"], str) or not rec["user_id"]:
        raise ParseError(line_no, "user_id", "must be a non-empty string")
    return ActivityEvent(
        event_id=rec["event_id"],
        user_id=rec["user_id"],
        timestamp=timestamp,
        kind=kind,
        text=str(rec["text"]),
        profile_text=str(rec["profile_text"]),
        friends_count=counters["friends_count"],
        followers_count=counters["followers_count"],
        statuses_count=counters["statuses_count"],
        account_created_at=created,
        verified=bool(rec["verified"]),
        lang=str(rec["lang"]),
        target_user_id=target,
    )


def parse_events(stream: IO[bytes] | Iterable[bytes], strict: bool = False,
                 ) -> tuple[list[ActivityEvent], int]:
    """Parse newline-delimited event records from a byte stream.

    Returns (events in input order, skipped record count). In lenient mode
    malformed records are counted and skipped; in strict mode the first
    malformed record raises :class:`ParseError` with line number and field.
    """
    events: list[ActivityEvent] = []
    skipped = 0
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ParseError(line_no, "<record>", "not an object")
            events.append(_check_record(rec, line_no))
        except ParseError:
            if strict:
                raise
            skipped += 1
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            if strict:
                raise ParseError(line_no, "<record>", f"invalid JSON: {exc}") from exc
            skipped += 1
    return events, skipped


def _open_maybe_gzip(path: str | Path) -> IO[bytes]:
    fh = open(path, "rb")
    magic = fh.read(2)
    fh.seek(0)
    if magic == b"\x1f\x8b":
        return gzip.open(fh, "rb")
    return fh


def read_events(path: str | Path, strict: bool = False) -> tuple[list[ActivityEvent], int]:
    """Read events from a plain or gzip-compressed newline-delimited file."""
    with _open_maybe_gzip(path) as fh:
        return parse_events(fh, strict=strict)


def serialize_event(event: ActivityEvent) -> str:
    rec = asdict(event)
    return json.dumps(rec, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_events(events: Iterable[ActivityEvent], path: str | Path) -> None:
    """Write events as newline-delimited JSON; gzip when path ends in .gz."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8", newline="\n") as fh:
        for event in events:
            fh.write(serialize_event(event))
            fh.write("\n")


def build_timelines(events: Iterable[ActivityEvent]) -> dict[str, ProfileTimeline]:
    """Reconstruct per-user profile timelines from events in any order.

    Snapshots are sorted by (timestamp, event_id); consecutive snapshots with
    identical profile text are collapsed keeping the earliest timestamp.
    """
    per_user: dict[str, list[ActivityEvent]] = defaultdict(list)
    for event in events:
        per_user[event.user_id].append(event)
    timelines: dict[str, ProfileTimeline] = {}
    for user_id, user_events in per_user.items():
        user_events.sort(key=ActivityEvent.sort_key)
        snapshots: list[tuple[int, str]] = []
        for event in user_events:
            if not snapshots or snapshots[-1][1] != event.profile_text:
                snapshots.append((event.timestamp, event.profile_text))
        timelines[user_id] = ProfileTimeline(user_id, tuple(snapshots))
    return timelines


def total_snapshots(timelines: dict[str, ProfileTimeline]) -> int:
    """Total distinct-profile count across all timelines."""
    return sum(len(t.snapshots) for t in timelines.values())


def filter_users(timelines: dict[str, ProfileTimeline],
                 events: Iterable[ActivityEvent],
                 policy: FilterPolicy = FilterPolicy()) -> set[str]:
    """Users retained after the verified and language filters.

    A user is dropped when any of their events is verified (if the policy
    excludes verified accounts) or when their modal per-event lang tag is not
    allowed. Modal ties are broken by the lexicographically smallest tag.
    """
    verified_users: set[str] = set()
    langs: dict[str, Counter] = defaultdict(Counter)
    for event in events:
        if event.user_id not in timelines:
            continue
        if event.verified:
            verified_users.add(event.user_id)
        langs[event.user_id][event.lang] += 1
    retained = set()
    for user_id in timelines:
        if policy.exclude_verified and user_id in verified_users:
            continue
        counts = langs.get(user_id)
        if not counts:
            continue
        modal = min(counts, key=lambda tag: (-counts[tag], tag))
        if modal in policy.allowed_langs:
            retained.add(user_id)
    return retained


def write_timelines(timelines: dict[str, ProfileTimeline], path: str | Path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "timestamp", "profile_text"])
        for user_id in sorted(timelines):
            for ts, text in timelines[user_id].snapshots:
                writer.writerow([user_id, ts, text])


def read_timelines(path: str | Path) -> dict[str, ProfileTimeline]:
    import csv

    rows: dict[str, list[tuple[int, str]]] = defaultdict(list)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "timestamp", "profile_text"]:
            raise ValueError(f"unexpected timelines header in {path}: {header}")
        for user_id, ts, text in reader:
            rows[user_id].append((int(ts), text))
    return {
        user_id: ProfileTimeline(user_id, tuple(sorted(snaps)))
        for user_id, snaps in rows.items()
    }
