from __future__ import annotations

import pytest

from identity_effects.events import ActivityEvent
from identity_effects.taxonomy import compile_taxonomy, load_bundled_taxonomy


def make_event(event_id="e1", user_id="u1", timestamp=1_600_000_000, kind="tweet",
               text="hello", profile_text="", friends_count=10, followers_count=20,
               statuses_count=30, account_created_at=1_500_000_000, verified=False,
               lang="en", target_user_id=None) -> ActivityEvent:
    if kind == "reply" and target_user_id is None:
        target_user_id = "other"
    return ActivityEvent(
        event_id=event_id, user_id=user_id, timestamp=timestamp, kind=kind,
        text=text, profile_text=profile_text, friends_count=friends_count,
        followers_count=followers_count, statuses_count=statuses_count,
        account_created_at=account_created_at, verified=verified, lang=lang,
        target_user_id=target_user_id)


@pytest.fixture(scope="session")
def matcher():
    return compile_taxonomy(load_bundled_taxonomy())
