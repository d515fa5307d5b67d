"""Seeded synthetic KPI telemetry with weekly hot spot regularities.

KPIs are built in "threshold units" (a KPI crosses its threshold at 1.0) and then
rescaled by a per-KPI unit factor, so the emitted :class:`ScoringConfig` uses
the unit factors as thresholds and uniform weights summing to one.
"""

from __future__ import annotations

import datetime as dt
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DAYS_PER_WEEK,
    HOURS_PER_DAY,
    HOURS_PER_WEEK,
    KpiDataset,
    ScoringConfig,
    build_calendar,
)

log = logging.getLogger(__name__)

DAY_LETTERS = "MTWTFSS"
NEVER_HOT = "-------"

# relative counts (%) of the most frequent hot weekly patterns, never-hot excluded
HOT_PATTERN_SHARES = {
    "MTWTFSS": 14.4,
    "MTWTF--": 8.5,
    "MTWTFS-": 7.2,
    "----F--": 5.4,
    "-----S-": 4.7,
    "M------": 4.1,
    "-T-----": 4.1,
    "---T---": 3.9,
    "------S": 3.5,
    "--W----": 3.2,
    "-TWTF--": 2.4,
    "MTWT---": 2.3,
    "---TF--": 1.7,
    "MT-----": 1.6,
    "----FS-": 1.5,
    "MTW----": 1.4,
    "--WTF--": 1.4,
    "--WT---": 1.3,
    "-----SS": 1.3,
}

DEFAULT_HOLIDAYS = ("2015-12-08", "2015-12-25", "2016-01-01", "2016-01-06", "2016-03-25")

KPI_GROUPS = ("usage", "congestion", "interference")


def pattern_from_bits(bits) -> str:
    return "".join(DAY_LETTERS[d] if b else "-" for d, b in enumerate(bits))


def pattern_to_bits(pattern: str) -> np.ndarray:
    if len(pattern) != DAYS_PER_WEEK:
        raise ValueError(f"weekly pattern must have 7 characters: {pattern!r}")
    bits = np.array([c != "-" for c in pattern], dtype=bool)
    canonical = pattern_from_bits(bits)
    if canonical != pattern:
        raise ValueError(f"malformed weekly pattern {pattern!r} (expected like {canonical!r})")
    return bits


ALL_PATTERNS = tuple(pattern_from_bits(b) for b in itertools.product((0, 1), repeat=7))


def default_pattern_mix(never_hot: float = 0.70) -> dict[str, float]:
    """Reference shares for the listed hot patterns; the unlisted remainder is spread
    uniformly over the other hot patterns."""
    listed = sum(HOT_PATTERN_SHARES.values()) / 100.0
    others = [p for p in ALL_PATTERNS if p != NEVER_HOT and p not in HOT_PATTERN_SHARES]
    hot = 1.0 - never_hot
    mix = {NEVER_HOT: never_hot}
    for p, c in HOT_PATTERN_SHARES.items():
        mix[p] = hot * c / 100.0
    for p in others:
        mix[p] = hot * (1.0 - listed) / len(others)
    return mix


def default_daily_shape() -> np.ndarray:
    hours = np.arange(HOURS_PER_DAY)
    dist = np.minimum(np.abs(hours - 16.5), HOURS_PER_DAY - np.abs(hours - 16.5))
    return 0.25 + 0.75 * np.exp(-0.5 * (dist / 4.5) ** 2)


def kpi_group_of(l_kpis: int) -> list[str]:
    """Usage, congestion and interference families in contiguous thirds."""
    bounds = np.linspace(0, l_kpis, len(KPI_GROUPS) + 1).round().astype(int)
    groups = []
    for g, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        groups.extend([KPI_GROUPS[g]] * (b - a))
    return groups


@dataclass
class MissingnessConfig:
    point_rate: float = 0.02
    row_rate: float = 0.01
    slice_rate: float = 0.0015
    slice_mean_length: float = 6.0
    outage_sector_fraction: float = 0.10

    def validate(self):
        for name in ("point_rate", "row_rate", "slice_rate", "outage_sector_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.slice_mean_length < 2:
            raise ValueError("slice_mean_length must be >= 2")
        if self.point_rate + self.row_rate + self.slice_rate * self.slice_mean_length > 1.0:
            raise ValueError("missingness rates would exceed 100% missing")

    @property
    def is_zero(self) -> bool:
        return (
            self.point_rate == 0
            and self.row_rate == 0
            and self.slice_rate == 0
            and self.outage_sector_fraction == 0
        )


@dataclass
class GeneratorConfig:
    n_sectors: int = 200
    m_weeks: int = 18
    l_kpis: int = 21
    weekly_pattern_mix: dict = field(default_factory=default_pattern_mix)
    pattern_persistence: float = 0.8
    day_flip_prob: float = 0.03
    persistent_hot_fraction: float = 0.03
    emerging_failure_rate: float = 0.3
    emerging_lead_days: int = 21
    emerging_min_days: int = 7
    emerging_max_days: int = 28
    tower_coherence: float = 0.5
    tower_failure_share: float = 0.5
    hot_hours: int = 16
    daily_shape: np.ndarray = field(default_factory=default_daily_shape)
    noise_std: float = 0.05
    missingness: MissingnessConfig = field(default_factory=MissingnessConfig)
    hot_threshold: float = 0.6
    tower_spacing_km: float = 1.0
    start: dt.datetime = dt.datetime(2015, 11, 30)
    holidays: tuple = DEFAULT_HOLIDAYS
    seed: int = 0

    def validate(self):
        if self.n_sectors < 1 or self.m_weeks < 1 or self.l_kpis < 1:
            raise ValueError("n_sectors, m_weeks and l_kpis must be >= 1")
        if not self.weekly_pattern_mix:
            raise ValueError("weekly_pattern_mix is empty")
        for p in self.weekly_pattern_mix:
            pattern_to_bits(p)
        probs = np.array(list(self.weekly_pattern_mix.values()), dtype=float)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("weekly pattern probabilities must be >= 0 and sum to 1")
        for name in (
            "pattern_persistence",
            "day_flip_prob",
            "persistent_hot_fraction",
            "tower_coherence",
            "tower_failure_share",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.emerging_failure_rate < 0 or self.noise_std < 0:
            raise ValueError("emerging_failure_rate and noise_std must be >= 0")
        if not 7 <= self.emerging_min_days <= self.emerging_max_days:
            raise ValueError("need 7 <= emerging_min_days <= emerging_max_days")
        shape = np.asarray(self.daily_shape, dtype=float)
        if shape.shape != (HOURS_PER_DAY,) or np.any(shape < 0):
            raise ValueError("daily_shape must be 24 non-negative values")
        if not 1 <= self.hot_hours <= HOURS_PER_DAY:
            raise ValueError("hot_hours must be in [1, 24]")
        if self.hot_hours / HOURS_PER_DAY <= self.hot_threshold:
            raise ValueError("hot_hours/24 must exceed hot_threshold or hot days never score hot")
        if not 0 < self.hot_threshold < 1:
            raise ValueError("hot_threshold must be in (0, 1) for unit-sum weights")
        self.missingness.validate()


@dataclass
class GroundTruth:
    latent_hotness: np.ndarray
    assigned_pattern: list[str]
    emerging_events: list[tuple[int, int]]
    persistent_sectors: np.ndarray
    tower_of_sector: np.ndarray
    kpi_groups: list[str]


def sample_weekly_pattern(mix: dict[str, float], rng: np.random.Generator) -> str:
    if not mix:
        raise ValueError("empty pattern mix")
    keys = list(mix)
    p = np.array([mix[k] for k in keys], dtype=float)
    return keys[rng.choice(len(keys), p=p / p.sum())]


def _sample_patterns(mix: dict[str, float], size, rng: np.random.Generator) -> np.ndarray:
    keys = list(mix)
    p = np.array([mix[k] for k in keys], dtype=float)
    bits = np.stack([pattern_to_bits(k) for k in keys])
    return bits[rng.choice(len(keys), size=size, p=p / p.sum())]


def _place_events(cfg: GeneratorConfig, latent, persistent, tower, rng) -> list[tuple[int, int]]:
    n, m_days = latent.shape
    occupied = np.zeros_like(latent)
    events = []
    eligible = np.flatnonzero(~persistent)
    if eligible.size == 0 or cfg.emerging_failure_rate == 0:
        return events
    counts = rng.poisson(cfg.emerging_failure_rate, size=eligible.size)
    lo = DAYS_PER_WEEK
    hi = m_days - cfg.emerging_min_days
    if hi < lo:
        return events

    def try_place(i, onset, duration):
        a, b = onset - DAYS_PER_WEEK, min(onset + duration, m_days)
        if occupied[i, a:b].any():
            return False
        occupied[i, a:b] = True
        latent[i, a:onset] = False
        latent[i, onset:b] = True
        events.append((int(i), int(onset)))
        return True

    for i, k in zip(eligible, counts):
        for _ in range(k):
            for _attempt in range(20):
                onset = int(rng.integers(lo, hi + 1))
                duration = int(rng.integers(cfg.emerging_min_days, cfg.emerging_max_days + 1))
                duration = max(min(duration, m_days - onset), cfg.emerging_min_days)
                if try_place(i, onset, duration):
                    siblings = np.flatnonzero((tower == tower[i]) & ~persistent)
                    for s in siblings:
                        if s != i and rng.random() < cfg.tower_failure_share:
                            try_place(s, onset, duration)
                    break
    events.sort()
    return events


def _latent_hotness(cfg: GeneratorConfig, rng: np.random.Generator):
    n, m_weeks = cfg.n_sectors, cfg.m_weeks
    tower = np.arange(n) // 3
    assigned = _sample_patterns(cfg.weekly_pattern_mix, n, rng)
    copy = (np.arange(n) % 3 != 0) & (rng.random(n) < cfg.tower_coherence)
    assigned[copy] = assigned[tower[copy] * 3]

    fresh = _sample_patterns(cfg.weekly_pattern_mix, (n, m_weeks), rng)
    keep = rng.random((n, m_weeks)) < cfg.pattern_persistence
    weeks = np.where(keep[..., None], assigned[:, None, :], fresh)
    latent = weeks.reshape(n, m_weeks * DAYS_PER_WEEK).copy()
    flips = rng.random(latent.shape) < cfg.day_flip_prob
    latent ^= flips

    persistent = np.zeros(n, dtype=bool)
    n_persistent = int(round(cfg.persistent_hot_fraction * n))
    persistent[rng.permutation(n)[:n_persistent]] = True
    latent[persistent] = True

    events = _place_events(cfg, latent, persistent, tower, rng)

    # only the designated persistent sectors may be hot for the whole period
    all_hot = latent.all(axis=1) & ~persistent
    for i in np.flatnonzero(all_hot):
        latent[i, rng.integers(latent.shape[1])] = False

    patterns = [pattern_from_bits(b) for b in assigned]
    for i in np.flatnonzero(persistent):
        patterns[i] = "MTWTFSS"
    return latent, patterns, events, persistent, tower


def _coordinates(n: int, spacing: float, rng: np.random.Generator) -> np.ndarray:
    n_towers = -(-n // 3)
    side = int(np.ceil(np.sqrt(n_towers)))
    gx, gy = np.meshgrid(np.arange(side), np.arange(side), indexing="xy")
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)[:n_towers].astype(float) * spacing
    grid += rng.uniform(-0.3 * spacing, 0.3 * spacing, size=grid.shape)
    return np.repeat(grid, 3, axis=0)[:n]


def _precursor_ramp(events, n, m_days, lead) -> np.ndarray:
    """Per sector-hour ramp in [0, 1) climbing over ``lead`` days before each onset."""
    m_hours = m_days * HOURS_PER_DAY
    ramp = np.zeros((n, m_hours))
    if lead <= 0:
        return ramp
    lead_hours = lead * HOURS_PER_DAY
    for i, onset in events:
        end = onset * HOURS_PER_DAY
        start = max(0, end - lead_hours)
        hours = np.arange(start, end)
        ramp[i, start:end] = np.maximum(ramp[i, start:end], (hours - (end - lead_hours)) / lead_hours)
    return ramp


def _kpi_values(cfg: GeneratorConfig, latent, events, rng_levels, rng_noise):
    n, m_days = latent.shape
    l = cfg.l_kpis
    m_hours = m_days * HOURS_PER_DAY
    shape = np.asarray(cfg.daily_shape, dtype=float)
    shape = shape / shape.max() if shape.max() > 0 else np.full(HOURS_PER_DAY, 1.0)
    hot_hour = np.zeros(HOURS_PER_DAY, dtype=bool)
    hot_hour[np.argsort(-shape, kind="stable")[: cfg.hot_hours]] = True
    hour_shape = np.tile(shape, m_days)
    hour_hot = np.tile(hot_hour, m_days)

    cold_level = rng_levels.uniform(0.35, 0.6, size=(n, l))
    hot_level = rng_levels.uniform(1.25, 1.45, size=(n, l))
    unit = 10.0 ** rng_levels.uniform(-1, 2, size=l)
    interference = np.array([g == "interference" for g in kpi_group_of(l)])
    ramp = _precursor_ramp(events, n, m_days, cfg.emerging_lead_days)

    kpi = np.empty((n, m_hours, l))
    chunk = 32
    for a in range(0, n, chunk):
        b = min(n, a + chunk)
        hot = np.repeat(latent[a:b], HOURS_PER_DAY, axis=1) & hour_hot[None, :]
        cold_z = cold_level[a:b, None, :] * (0.2 + 0.8 * hour_shape)[None, :, None]
        pre = ramp[a:b, :, None] * interference[None, None, :]
        cold_z = cold_z + (0.9 - cold_z) * pre
        hot_z = hot_level[a:b, None, :] + 0.4 * hour_shape[None, :, None]
        z = np.where(hot[..., None], hot_z, cold_z)
        if cfg.noise_std > 0:
            z = z * (1.0 + cfg.noise_std * rng_noise.standard_normal(z.shape))
        kpi[a:b] = z * unit
    return kpi, unit


def inject_missing(
    data: KpiDataset, cfg: MissingnessConfig | GeneratorConfig, rng: np.random.Generator
) -> KpiDataset:
    """Mark point, hour-row, temporal-slice and whole-outage gaps as missing."""
    if isinstance(cfg, GeneratorConfig):
        cfg = cfg.missingness
    cfg.validate()
    if data.missing_mask.any():
        raise ValueError("inject_missing expects an all-false mask")
    n, m, l = data.kpi.shape
    mask = np.zeros((n, m, l), dtype=bool)
    if cfg.point_rate > 0:
        mask |= rng.random((n, m, l)) < cfg.point_rate
    rows = np.zeros((n, m), dtype=bool)
    if cfg.row_rate > 0:
        rows |= rng.random((n, m)) < cfg.row_rate
    if cfg.slice_rate > 0:
        starts = np.argwhere(rng.random((n, m)) < cfg.slice_rate)
        lengths = 2 + rng.geometric(1.0 / (cfg.slice_mean_length - 1), size=len(starts)) - 1
        for (i, j), length in zip(starts, lengths):
            rows[i, j : j + length] = True
    if cfg.outage_sector_fraction > 0:
        n_out = int(round(cfg.outage_sector_fraction * n))
        for i in rng.permutation(n)[:n_out]:
            length = int(rng.integers(int(0.6 * HOURS_PER_WEEK), 2 * HOURS_PER_WEEK))
            length = min(length, m)
            j = int(rng.integers(0, m - length + 1))
            rows[i, j : j + length] = True
    mask |= rows[..., None]
    kpi = np.where(mask, np.nan, data.kpi)
    log.info("injected missing values: %.2f%% of entries", 100.0 * mask.mean())
    return data.replace(kpi=kpi, missing_mask=mask)


def generate_dataset(cfg: GeneratorConfig | None = None):
    """Build ``(KpiDataset, GroundTruth, ScoringConfig)`` deterministically from ``cfg.seed``."""
    cfg = cfg or GeneratorConfig()
    cfg.validate()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(5)]
    rng_pattern, rng_levels, rng_noise, rng_missing, rng_coords = streams

    latent, patterns, events, persistent, tower = _latent_hotness(cfg, rng_pattern)
    kpi, unit = _kpi_values(cfg, latent, events, rng_levels, rng_noise)
    m_hours = cfg.m_weeks * HOURS_PER_WEEK
    calendar = build_calendar(cfg.start, m_hours, cfg.holidays)
    holidays = tuple(dt.date.fromisoformat(h) if isinstance(h, str) else h for h in cfg.holidays)
    data = KpiDataset(
        kpi=kpi,
        missing_mask=np.zeros(kpi.shape, dtype=bool),
        sector_coords=_coordinates(cfg.n_sectors, cfg.tower_spacing_km, rng_coords),
        calendar=calendar,
        start_timestamp=cfg.start,
        holidays=holidays,
    )
    if not cfg.missingness.is_zero:
        data = inject_missing(data, cfg.missingness, rng_missing)
    scoring = ScoringConfig(
        weights=np.full(cfg.l_kpis, 1.0 / cfg.l_kpis),
        kpi_thresholds=unit,
        hot_threshold=cfg.hot_threshold,
    )
    truth = GroundTruth(
        latent_hotness=latent,
        assigned_pattern=patterns,
        emerging_events=events,
        persistent_sectors=persistent,
        tower_of_sector=tower,
        kpi_groups=kpi_group_of(cfg.l_kpis),
    )
    return data, truth, scoring
