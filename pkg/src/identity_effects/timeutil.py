"""Calendar conventions used across the pipeline.

All timestamps are UTC seconds. A "month" is a fixed 30-day span and a
"week" is a 7-day bucket anchored on the Monday preceding the Unix epoch
(1969-12-29 00:00 UTC), so week boundaries fall on Monday midnights.
"""
from __future__ import annotations

DAY_SECONDS = 86_400
WEEK_SECONDS = 7 * DAY_SECONDS
MONTH_SECONDS = 30 * DAY_SECONDS

# Monday 1969-12-29 00:00:00 UTC; the epoch itself was a Thursday.
EPOCH_MONDAY = -3 * DAY_SECONDS


def week_bucket(timestamp: int | float) -> int:
    """Index of the epoch-Monday-anchored 7-day bucket containing *timestamp*."""
    return int((int(timestamp) - EPOCH_MONDAY) // WEEK_SECONDS)


def week_start(bucket: int) -> int:
    """Timestamp of the first second of week *bucket*."""
    return EPOCH_MONDAY + bucket * WEEK_SECONDS
