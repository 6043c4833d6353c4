"""Synthetic cohorts with known confounding and known treatment effects.

The generator draws six correlated, heavy-tailed activity covariates per
user (a shared log-normal activity factor plus idiosyncratic noise),
assigns treatment by a logistic model on the standardized covariate index
(loading ``gamma``), and draws pre/post outcome counts from a negative
binomial whose log mean is

    b0 + b1 * index + b2 * T + b3 * post + b4 * T * post
       + trend_gamma * index * post
       (+ b5 * log1p(n_id) + b6 * log1p(n_id) * T * post)

The ``trend_gamma`` term makes high-activity users grow faster regardless
of treatment; combined with ``gamma`` it produces the confounding that a
naive pre/post comparison suffers from and matching must remove. Negative
binomial sampling uses the gamma-Poisson mixture parameterized by
(mean, alpha), matching the estimator's parameterization.

Profile texts are synthesized from the bundled taxonomy phrase bank so the
rule-based labeler classifies every synthetic user correctly by
construction; emitted event streams round-trip through ingest in strict
mode. Output is byte deterministic for a fixed config.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import yaml

from .events import ActivityEvent, write_events
from .matching import COVARIATE_NAMES
from .panel import ScoreTable
from .taxonomy import compile_taxonomy, load_bundled_taxonomy
from .timeutil import DAY_SECONDS, WEEK_SECONDS

# Monday 2020-04-06 00:00 UTC, aligned to a week-bucket boundary
OBS_START = 1_586_131_200

# log-scale location/scale per covariate (days since creation, friends,
# followers, total posts, tweets prev month, retweets prev month)
COV_LOG_MEANS = (5.5, 4.5, 5.0, 6.0, 2.5, 1.8)
COV_LOG_SDS = (0.8, 0.9, 1.1, 1.0, 0.7, 0.8)

NEUTRAL_BIO_PARTS = (
    "coffee enthusiast", "weekend hiker", "amateur photographer",
    "plant collector", "puzzle solver", "vinyl listener", "sourdough baking",
    "trail runner", "sunset chaser", "casual birdwatcher", "mountain air",
    "rainy day reader", "kitchen experiments", "city wanderer",
    "notebook hoarder", "tea before noon",
)

IDENTITY_PHRASES = {
    "gender:women": ("she/her", "she / her", "she/hers"),
    "gender:men": ("he/him", "he / him", "he/his"),
    "gender:nonbinary": ("they/them", "she/they", "non-binary"),
    "age:18-24": ("19 years old", "21 y/o", "18yo"),
    "political:liberal": ("proud democrat", "liberal"),
    "political:conservative": ("conservative at heart", "proud republican"),
    "relationship:parent": ("mom of two", "proud dad"),
    "religion:christian": ("christian", "catholic"),
    "sexuality:lgbtq": ("queer", "lgbtq+"),
    "occupation:education": ("high school teacher", "math educator"),
    "ethnicity:canadian": ("canadian", "\U0001F1E8\U0001F1E6"),
}


@dataclass
class SynthConfig:
    """Scenario parameters; see the bundled scenario files for examples."""

    seed: int = 0
    n_treated: int = 300
    n_control_pool: int = 1500
    identity: str = "gender:women"
    outcome: str = "identity_tweets"  # identity_tweets | offensive_replies
    gamma: float = 0.0            # covariate index -> treatment propensity
    trend_gamma: float = 0.0      # covariate index -> post-period growth
    true_beta: dict = field(default_factory=lambda: {
        "b0": 1.6, "b1": 0.3, "b2": 0.05, "b3": 0.1, "b4": 0.0,
        "b5": 0.0, "b6": 0.0})
    alpha: float = 0.3            # NB dispersion; 0 gives Poisson counts
    cov_factor_loading: float = 0.85
    cov_log_means: tuple = COV_LOG_MEANS
    cov_log_sds: tuple = COV_LOG_SDS
    weeks_span: int = 4
    window_days: int = 30
    # score mixtures: uniform(lo, hi) for true identity/offensive events
    # and for background events
    identity_score_range: tuple = (0.7, 1.0)
    background_score_range: tuple = (0.0, 0.3)
    offensive_score_range: tuple = (0.7, 1.0)
    clean_score_range: tuple = (0.0, 0.3)
    # offensive-reply scenario: per-user identity-tweet rate heterogeneity
    n_id_log_mean: float = 0.8
    n_id_log_sd: float = 0.5
    background_replies: float = 2.0
    # network scenario
    homophily_treated: float = 0.3
    homophily_control: float = 0.15
    alter_same_identity_frac: float = 0.15
    n_alters: int = 2000
    out_rate: float = 6.0
    in_rate: float = 4.0
    network_weeks: int = 12

    def validate(self) -> None:
        if self.n_treated <= 0 or self.n_control_pool <= 0:
            raise ValueError("user counts must be positive")
        if self.alpha < 0:
            raise ValueError("dispersion alpha must be >= 0")
        if self.weeks_span < 1:
            raise ValueError("weeks_span must be >= 1")
        if self.identity not in IDENTITY_PHRASES:
            raise ValueError(
                f"no phrase bank for identity {self.identity!r}; "
                f"known: {sorted(IDENTITY_PHRASES)}")
        if self.outcome not in ("identity_tweets", "offensive_replies"):
            raise ValueError(f"unsupported outcome {self.outcome!r}")
        for name in ("identity_score_range", "background_score_range",
                     "offensive_score_range", "clean_score_range"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi <= 1):
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1")
        for key in ("b0", "b1", "b2", "b3", "b4"):
            if key not in self.true_beta:
                raise ValueError(f"true_beta missing {key}")
        if not 0 < self.cov_factor_loading < 1:
            raise ValueError("cov_factor_loading must be in (0, 1)")
        for h in (self.homophily_treated, self.homophily_control,
                  self.alter_same_identity_frac):
            if not 0 <= h <= 1:
                raise ValueError("homophily parameters must be probabilities")

    @property
    def beta(self) -> dict:
        merged = {"b5": 0.0, "b6": 0.0}
        merged.update({k: float(v) for k, v in self.true_beta.items()})
        return merged


def load_scenario(path: str | Path) -> SynthConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    known = set(SynthConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"{path}: unknown scenario keys {sorted(unknown)}")
    for key in ("cov_log_means", "cov_log_sds", "identity_score_range",
                "background_score_range", "offensive_score_range",
                "clean_score_range"):
        if key in doc:
            doc[key] = tuple(doc[key])
    config = SynthConfig(**doc)
    config.validate()
    return config


def bundled_scenario_path(name: str) -> Path:
    from importlib import resources

    path = Path(resources.files("identity_effects").joinpath(
        f"data/scenarios/{name}.yaml"))
    if not path.exists():
        raise ValueError(f"unknown bundled scenario {name!r}")
    return path


@dataclass
class CohortData:
    """In-memory cohort: arrays aligned over users, treated block first."""

    config: SynthConfig
    user_ids: list[str]
    treated: np.ndarray          # (n,) 0/1
    covariates: np.ndarray       # (n, 6) raw values
    index: np.ndarray            # (n,) standardized confounding index
    change_week: np.ndarray      # (n,) offset within weeks_span
    change_time: np.ndarray      # (n,) UTC seconds
    y: np.ndarray                # (n, 2) outcome counts (pre, post)
    n_id: np.ndarray | None      # (n, 2) identity-tweet counts (offensive scenario)


def _draw_covariates(rng, m: int, config: SynthConfig):
    rho = config.cov_factor_loading
    mu = np.asarray(config.cov_log_means)
    sd = np.asarray(config.cov_log_sds)
    f = rng.normal(size=(m, 1))
    eps = rng.normal(size=(m, 6))
    zlog = rho * f + math.sqrt(1.0 - rho * rho) * eps
    raw = np.maximum(np.floor(np.expm1(mu + sd * zlog)), 0.0)
    # accounts must be old enough for every window to postdate creation
    min_days = 2 * config.window_days + 14 * config.network_weeks
    raw[:, 0] = np.maximum(raw[:, 0], min_days)
    index_sd = math.sqrt(rho * rho + (1.0 - rho * rho) / 6.0)
    index = zlog.mean(axis=1) / index_sd
    return raw, index


def _nb_draw(rng, mean: np.ndarray, alpha: float) -> np.ndarray:
    if alpha <= 0:
        return rng.poisson(mean).astype(np.int64)
    lam = rng.gamma(1.0 / alpha, alpha * mean)
    return rng.poisson(lam).astype(np.int64)


def generate_cohort(config: SynthConfig) -> CohortData:
    """Draw users, treatment, change times, and outcome counts (no files)."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    a0 = math.log(config.n_treated / config.n_control_pool)

    need_t, need_c = config.n_treated, config.n_control_pool
    Xt, Xc, It, Ic = [], [], [], []
    while need_t > 0 or need_c > 0:
        m = max(4096, 2 * (need_t + need_c))
        X, index = _draw_covariates(rng, m, config)
        p = 1.0 / (1.0 + np.exp(-(a0 + config.gamma * index)))
        is_treated = rng.random(m) < p
        kt = min(need_t, int(is_treated.sum()))
        kc = min(need_c, int((~is_treated).sum()))
        Xt.append(X[is_treated][:kt]); It.append(index[is_treated][:kt])
        Xc.append(X[~is_treated][:kc]); Ic.append(index[~is_treated][:kc])
        need_t -= kt
        need_c -= kc

    X = np.vstack([np.vstack(Xt), np.vstack(Xc)])
    index = np.concatenate([np.concatenate(It), np.concatenate(Ic)])
    n = config.n_treated + config.n_control_pool
    treated = np.zeros(n, dtype=np.int64)
    treated[:config.n_treated] = 1
    user_ids = [f"u{i:06d}" for i in range(n)]

    change_week = rng.integers(0, config.weeks_span, size=n)
    offset = rng.integers(DAY_SECONDS, 6 * DAY_SECONDS, size=n)
    change_time = OBS_START + change_week * WEEK_SECONDS + offset

    beta = config.beta
    n_id = None
    eta_base = beta["b0"] + beta["b1"] * index + beta["b2"] * treated
    eta_pre = eta_base.copy()
    eta_post = (eta_base + beta["b3"] + beta["b4"] * treated
                + config.trend_gamma * index)
    if config.outcome == "offensive_replies":
        rate = np.exp(config.n_id_log_mean + config.n_id_log_sd * rng.normal(size=n))
        n_id = np.column_stack([rng.poisson(rate), rng.poisson(rate)]).astype(np.int64)
        eta_pre = eta_pre + beta["b5"] * np.log1p(n_id[:, 0])
        eta_post = (eta_post + beta["b5"] * np.log1p(n_id[:, 1])
                    + beta["b6"] * np.log1p(n_id[:, 1]) * treated)

    y = np.column_stack([
        _nb_draw(rng, np.exp(eta_pre), config.alpha),
        _nb_draw(rng, np.exp(eta_post), config.alpha),
    ])
    return CohortData(config, user_ids, treated, X, index,
                      np.asarray(change_week), np.asarray(change_time), y, n_id)


def observation_window(config: SynthConfig) -> tuple[int, int]:
    """Window bounds that contain every emitted snapshot of a scenario."""
    margin = (config.window_days + 10) * DAY_SECONDS \
        + config.network_weeks * WEEK_SECONDS
    hi = OBS_START + (config.weeks_span + 1) * WEEK_SECONDS + margin
    return OBS_START - margin, hi


def _bio_pair(rng, config: SynthConfig, is_treated: bool) -> tuple[str, str]:
    parts = rng.choice(len(NEUTRAL_BIO_PARTS), size=3, replace=False)
    pre = " | ".join(NEUTRAL_BIO_PARTS[i] for i in parts[:2])
    if is_treated:
        phrases = IDENTITY_PHRASES[config.identity]
        addition = phrases[int(rng.integers(len(phrases)))]
    else:
        addition = NEUTRAL_BIO_PARTS[parts[2]]
    return pre, f"{pre} | {addition}"


def _uniform_times(rng, count: int, lo: int, hi: int) -> list[int]:
    if count <= 0:
        return []
    return sorted(int(t) for t in rng.integers(lo, hi + 1, size=count))


def _check_phrase_bank(matcher, identity: str) -> None:
    for part in NEUTRAL_BIO_PARTS:
        ids = matcher.identity_set(part)
        if ids:
            raise AssertionError(f"neutral bio part {part!r} matches {ids}")
    for phrase in IDENTITY_PHRASES[identity]:
        ids = matcher.identity_set(phrase)
        if identity not in ids:
            raise AssertionError(f"phrase {phrase!r} does not match {identity}")


class _StreamBuilder:
    """Accumulates events, scores, and per-event ground-truth flags."""

    def __init__(self, rng, config: SynthConfig):
        self.rng = rng
        self.config = config
        self.score_name = "identity:" + config.identity.split(":", 1)[1]
        self.events: list[ActivityEvent] = []
        self.scores = ScoreTable()
        self.truth_events: list[tuple[str, int, int]] = []
        self._seq: dict[str, int] = {}

    def _event_id(self, author: str) -> str:
        seq = self._seq.get(author, 0)
        self._seq[author] = seq + 1
        return f"{author}-{seq:05d}"

    def add(self, author: str, ts: int, kind: str, bio: str, cov,
            account_created_at: int, text: str = "",
            target: str | None = None) -> str:
        event_id = self._event_id(author)
        self.events.append(ActivityEvent(
            event_id=event_id,
            user_id=author,
            timestamp=int(ts),
            kind=kind,
            text=text,
            profile_text=bio,
            friends_count=int(cov[1]),
            followers_count=int(cov[2]),
            statuses_count=int(cov[3]),
            account_created_at=int(account_created_at),
            verified=False,
            lang="en",
            target_user_id=target,
        ))
        return event_id

    def score_identity(self, event_id: str, is_identity: bool) -> None:
        lo, hi = (self.config.identity_score_range if is_identity
                  else self.config.background_score_range)
        self.scores.add(event_id, self.score_name, float(self.rng.uniform(lo, hi)))
        self.truth_events.append((event_id, int(is_identity), 0))

    def score_offensive(self, event_id: str, is_offensive: bool) -> None:
        lo, hi = (self.config.offensive_score_range if is_offensive
                  else self.config.clean_score_range)
        self.scores.add(event_id, "offensive", float(self.rng.uniform(lo, hi)))
        self.truth_events.append((event_id, 0, int(is_offensive)))

    def emit_profile_user(self, uid: str, cov, change_time: int, is_treated: bool,
                          own_counts: tuple[int, int], anchor_gap: int,
                          emit_retweets: bool = True) -> tuple[str, str]:
        """Anchor, change event, own tweets and retweets for one cohort user.

        ``own_counts`` are the identity-true tweet counts per window; the
        background tweet count tops the window up to the drawn
        tweets-prev-month covariate so extraction reproduces it. Network
        scenarios suppress the retweet filler so ego out-edges stay exactly
        the simulated ones. Returns the (pre, post) bios for reuse by edge
        events.
        """
        config = self.config
        rng = self.rng
        window = config.window_days * DAY_SECONDS
        created = int(change_time - cov[0] * DAY_SECONDS)
        pre_bio, post_bio = _bio_pair(rng, config, is_treated)

        self.add(uid, change_time - anchor_gap, "tweet", pre_bio, cov, created,
                 text="anchor")
        self.add(uid, change_time, "tweet", post_bio, cov, created,
                 text="profile refresh")
        for side, own in zip(("pre", "post"), own_counts):
            bio = pre_bio if side == "pre" else post_bio
            if side == "pre":
                lo, hi = change_time - window, change_time - 1
            else:
                lo, hi = change_time + 1, change_time + window
            background = max(0, int(cov[4]) - own)
            flags = [True] * own + [False] * background
            for ts, is_identity in zip(_uniform_times(rng, len(flags), lo, hi), flags):
                event_id = self.add(uid, ts, "tweet", bio, cov, created, text="note")
                self.score_identity(event_id, is_identity)
            if emit_retweets:
                for ts in _uniform_times(rng, int(cov[5]), lo, hi):
                    self.add(uid, ts, "retweet", bio, cov, created, target="pool00000")
        return pre_bio, post_bio

    def emit_replies(self, uid: str, change_time: int, y_counts: tuple[int, int],
                     replier_pool: list[str]) -> None:
        """Offensive and clean replies from other users toward *uid*."""
        config = self.config
        rng = self.rng
        window = config.window_days * DAY_SECONDS
        replier_cov = (400.0, 50.0, 80.0, 300.0, 5.0, 2.0)
        created = OBS_START - 700 * DAY_SECONDS
        for side, y in zip(("pre", "post"), y_counts):
            if side == "pre":
                lo, hi = change_time - window, change_time - 1
            else:
                lo, hi = change_time + 1, change_time + window
            background = int(rng.poisson(config.background_replies))
            flags = [True] * y + [False] * background
            for ts, offensive in zip(_uniform_times(rng, len(flags), lo, hi), flags):
                author = replier_pool[int(rng.integers(len(replier_pool)))]
                event_id = self.add(author, ts, "reply", "rainy day reader",
                                    replier_cov, created, text="@reply", target=uid)
                self.score_offensive(event_id, offensive)


def generate(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Materialize a scenario to files: events, scores, and ground truth.

    Writes events.jsonl, scores.csv, truth_users.csv, truth_events.csv and
    truth_params.yaml under *out_dir*; returns their paths.
    """
    config.validate()
    data = generate_cohort(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    matcher = compile_taxonomy(load_bundled_taxonomy())
    _check_phrase_bank(matcher, config.identity)

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    builder = _StreamBuilder(rng, config)
    anchor_gap = (config.window_days + 5) * DAY_SECONDS
    replier_pool = [f"r{i:05d}" for i in range(500)]
    for i, uid in enumerate(data.user_ids):
        change = int(data.change_time[i])
        if config.outcome == "offensive_replies":
            own = (int(data.n_id[i, 0]), int(data.n_id[i, 1]))
        else:
            own = (int(data.y[i, 0]), int(data.y[i, 1]))
        builder.emit_profile_user(uid, data.covariates[i], change,
                                  bool(data.treated[i]), own, anchor_gap)
        if config.outcome == "offensive_replies":
            builder.emit_replies(uid, change, (int(data.y[i, 0]), int(data.y[i, 1])),
                                 replier_pool)

    paths = {
        "events": out_dir / "events.jsonl",
        "scores": out_dir / "scores.csv",
        "truth_users": out_dir / "truth_users.csv",
        "truth_events": out_dir / "truth_events.csv",
        "truth_params": out_dir / "truth_params.yaml",
    }
    write_events(builder.events, paths["events"])
    builder.scores.write(paths["scores"])
    _write_truth(data, builder.truth_events, paths)
    return paths


def _write_truth(data: CohortData, truth_events, paths) -> None:
    with open(paths["truth_users"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "treated", "change_time", "week", "index",
                         "y_pre", "y_post", "n_id_pre", "n_id_post"]
                        + list(COVARIATE_NAMES))
        for i, uid in enumerate(data.user_ids):
            n_id_pre = "" if data.n_id is None else int(data.n_id[i, 0])
            n_id_post = "" if data.n_id is None else int(data.n_id[i, 1])
            writer.writerow([
                uid, int(data.treated[i]), int(data.change_time[i]),
                int(data.change_week[i]), format(float(data.index[i]), ".10g"),
                int(data.y[i, 0]), int(data.y[i, 1]), n_id_pre, n_id_post,
            ] + [format(float(v), ".10g") for v in data.covariates[i]])
    with open(paths["truth_events"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "identity_true", "offensive_true"])
        for row in truth_events:
            writer.writerow(row)
    window = observation_window(data.config)
    params = {
        "true_beta": data.config.beta,
        "identity": data.config.identity,
        "outcome": data.config.outcome,
        "observation_start": int(window[0]),
        "observation_end": int(window[1]),
        "config": _config_doc(data.config),
    }
    with open(paths["truth_params"], "w", encoding="utf-8") as fh:
        yaml.safe_dump(params, fh, sort_keys=True)


def _config_doc(config: SynthConfig) -> dict:
    doc = asdict(config)
    for key, value in doc.items():
        if isinstance(value, tuple):
            doc[key] = list(value)
    return doc


def read_truth_users(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    return rows


@dataclass
class NetworkData:
    """In-memory network scenario; degree counts are distinct-alter counts."""

    config: SynthConfig
    cohort: CohortData
    same_out: np.ndarray   # (n, 2) pre/post
    total_out: np.ndarray
    same_in: np.ndarray
    total_in: np.ndarray
    # per ego: list of (period, direction, kind, alter_index, timestamp)
    edges: list[list[tuple[str, str, str, int, int]]]
    alter_ids: list[str]
    alter_same_identity: np.ndarray


def generate_network(config: SynthConfig) -> NetworkData:
    """Simulate interaction edges with a homophily shift for treated egos.

    Pre-period out-edges pick same-identity alters at the pool base rate for
    everyone; post-period treated egos pick them with probability
    ``homophily_treated`` while controls use ``homophily_control``. In-edges
    are identity-agnostic in both periods, so the in-degree effect is null
    by construction.
    """
    config.validate()
    cohort = generate_cohort(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    n = len(cohort.user_ids)
    n_alters = config.n_alters
    n_same = max(1, int(round(config.alter_same_identity_frac * n_alters)))
    alter_ids = [f"a{i:05d}" for i in range(n_alters)]
    same_flag = np.zeros(n_alters, dtype=bool)
    same_flag[:n_same] = True

    window = config.network_weeks * WEEK_SECONDS
    same_out = np.zeros((n, 2), dtype=np.int64)
    total_out = np.zeros((n, 2), dtype=np.int64)
    same_in = np.zeros((n, 2), dtype=np.int64)
    total_in = np.zeros((n, 2), dtype=np.int64)
    edges: list[list[tuple[str, str, str, int, int]]] = []

    base = config.alter_same_identity_frac

    def draw_alter(p_same: float) -> int:
        if rng.random() < p_same:
            return int(rng.integers(n_same))
        return int(n_same + rng.integers(n_alters - n_same))

    for i in range(n):
        change = int(cohort.change_time[i])
        ego_edges: list[tuple[str, str, str, int, int]] = []
        for j, period in enumerate(("pre", "post")):
            if period == "pre":
                lo, hi = change - window, change - 1
                h_out = base
            else:
                lo, hi = change + 1, change + window
                h_out = (config.homophily_treated if cohort.treated[i]
                         else config.homophily_control)
            k_out = int(rng.poisson(config.out_rate))
            k_in = int(rng.poisson(config.in_rate))
            out_targets = [draw_alter(h_out) for _ in range(k_out)]
            in_authors = [draw_alter(base) for _ in range(k_in)]
            for target, ts in zip(out_targets, _uniform_times(rng, k_out, lo, hi)):
                kind = "reply" if rng.random() < 0.5 else "retweet"
                ego_edges.append((period, "out", kind, target, ts))
            for author, ts in zip(in_authors, _uniform_times(rng, k_in, lo, hi)):
                kind = "reply" if rng.random() < 0.5 else "retweet"
                ego_edges.append((period, "in", kind, author, ts))
            distinct_out = set(out_targets)
            distinct_in = set(in_authors)
            total_out[i, j] = len(distinct_out)
            total_in[i, j] = len(distinct_in)
            same_out[i, j] = sum(1 for t in distinct_out if same_flag[t])
            same_in[i, j] = sum(1 for t in distinct_in if same_flag[t])
        edges.append(ego_edges)
    return NetworkData(config, cohort, same_out, total_out, same_in, total_in,
                       edges, alter_ids, same_flag)


def emit_network_scenario(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Materialize a network scenario: profile machinery plus edge events.

    Alters post a weekly anchor tweet carrying their bio, so their profile
    is observable inside every ego's window; same-identity alters carry the
    target identity phrase.
    """
    network = generate_network(config)
    cohort = network.cohort
    config = network.config
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    matcher = compile_taxonomy(load_bundled_taxonomy())
    _check_phrase_bank(matcher, config.identity)

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 3]))
    builder = _StreamBuilder(rng, config)
    anchor_gap = config.network_weeks * WEEK_SECONDS + 5 * DAY_SECONDS
    alter_bios = [
        f"mountain air | {IDENTITY_PHRASES[config.identity][0]}"
        if network.alter_same_identity[a] else "mountain air | tea before noon"
        for a in range(config.n_alters)
    ]
    alter_cov = (600.0, 40.0, 60.0, 200.0, 3.0, 1.0)
    alter_created = OBS_START - 700 * DAY_SECONDS

    for i, uid in enumerate(cohort.user_ids):
        change = int(cohort.change_time[i])
        pre_bio, post_bio = builder.emit_profile_user(
            uid, cohort.covariates[i], change, bool(cohort.treated[i]), (0, 0),
            anchor_gap, emit_retweets=False)
        created = int(change - cohort.covariates[i][0] * DAY_SECONDS)
        for period, direction, kind, alter_idx, ts in network.edges[i]:
            alter = network.alter_ids[alter_idx]
            if direction == "out":
                bio = pre_bio if ts <= change else post_bio
                builder.add(uid, ts, kind, bio, cohort.covariates[i], created,
                            text="" if kind == "retweet" else "@interaction",
                            target=alter)
            else:
                builder.add(alter, ts, kind, alter_bios[alter_idx], alter_cov,
                            alter_created,
                            text="" if kind == "retweet" else "@interaction",
                            target=uid)

    span_lo = int(cohort.change_time.min()) - config.network_weeks * WEEK_SECONDS
    span_hi = int(cohort.change_time.max()) + config.network_weeks * WEEK_SECONDS
    for a, alter in enumerate(network.alter_ids):
        ts = span_lo + (a % 7) * DAY_SECONDS
        while ts <= span_hi:
            builder.add(alter, ts, "tweet", alter_bios[a], alter_cov,
                        alter_created, text="weekly note")
            ts += WEEK_SECONDS

    paths = {
        "events": out_dir / "events.jsonl",
        "scores": out_dir / "scores.csv",
        "truth_users": out_dir / "truth_users.csv",
        "truth_events": out_dir / "truth_events.csv",
        "truth_network": out_dir / "truth_network.csv",
        "truth_params": out_dir / "truth_params.yaml",
    }
    write_events(builder.events, paths["events"])
    builder.scores.write(paths["scores"])
    _write_truth(cohort, builder.truth_events, paths)
    with open(paths["truth_network"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "same_out_pre", "same_out_post", "total_out_pre",
                         "total_out_post", "same_in_pre", "same_in_post",
                         "total_in_pre", "total_in_post"])
        for i, uid in enumerate(cohort.user_ids):
            writer.writerow([
                uid,
                int(network.same_out[i, 0]), int(network.same_out[i, 1]),
                int(network.total_out[i, 0]), int(network.total_out[i, 1]),
                int(network.same_in[i, 0]), int(network.same_in[i, 1]),
                int(network.total_in[i, 0]), int(network.total_in[i, 1]),
            ])
    return paths
