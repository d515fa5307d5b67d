"""Domain types, calendar construction, score integration and hot spot labels.

All time indices are 0-based. A window ``(x - y, x]`` covers the ``y`` samples
at indices ``x - y + 1 .. x``.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HOURS_PER_DAY = 24
HOURS_PER_WEEK = 168
DAYS_PER_WEEK = 7

PERIOD_HOURS = {"hour": 1, "day": HOURS_PER_DAY, "week": HOURS_PER_WEEK}

CALENDAR_COLUMNS = ("hour_of_day", "day_of_week", "day_of_month", "is_weekend", "is_holiday")


@dataclass
class KpiDataset:
    """KPI tensor of shape (n_sectors, m_hours, l_kpis) plus its missing mask."""

    kpi: np.ndarray
    missing_mask: np.ndarray
    sector_coords: np.ndarray
    calendar: np.ndarray
    start_timestamp: dt.datetime
    sector_ids: np.ndarray | None = None
    holidays: tuple[dt.date, ...] = ()

    def __post_init__(self):
        self.kpi = np.asarray(self.kpi, dtype=np.float64)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        self.sector_coords = np.asarray(self.sector_coords, dtype=np.float64).reshape(-1, 2)
        self.calendar = np.asarray(self.calendar, dtype=np.int64)
        if self.kpi.ndim != 3:
            raise ValueError(f"kpi must be 3-D, got shape {self.kpi.shape}")
        n, m, _ = self.kpi.shape
        if self.missing_mask.shape != self.kpi.shape:
            raise ValueError("missing_mask shape differs from kpi shape")
        if m % HOURS_PER_WEEK:
            raise ValueError(f"m_hours={m} is not a whole number of weeks")
        if self.sector_coords.shape[0] != n:
            raise ValueError("sector_coords must have one row per sector")
        if self.calendar.shape != (m, len(CALENDAR_COLUMNS)):
            raise ValueError(f"calendar must be ({m}, 5), got {self.calendar.shape}")
        if not np.all(np.isfinite(self.kpi[~self.missing_mask])):
            raise ValueError("non-missing KPI values must be finite")
        if self.sector_ids is None:
            self.sector_ids = np.arange(n)
        self.sector_ids = np.asarray(self.sector_ids, dtype=np.int64)

    @property
    def n_sectors(self) -> int:
        return self.kpi.shape[0]

    @property
    def m_hours(self) -> int:
        return self.kpi.shape[1]

    @property
    def m_days(self) -> int:
        return self.m_hours // HOURS_PER_DAY

    @property
    def m_weeks(self) -> int:
        return self.m_hours // HOURS_PER_WEEK

    @property
    def l_kpis(self) -> int:
        return self.kpi.shape[2]

    def select_sectors(self, keep: np.ndarray) -> "KpiDataset":
        keep = np.asarray(keep)
        return KpiDataset(
            kpi=self.kpi[keep],
            missing_mask=self.missing_mask[keep],
            sector_coords=self.sector_coords[keep],
            calendar=self.calendar,
            start_timestamp=self.start_timestamp,
            sector_ids=self.sector_ids[keep],
            holidays=self.holidays,
        )

    def replace(self, **changes) -> "KpiDataset":
        fields = dict(
            kpi=self.kpi,
            missing_mask=self.missing_mask,
            sector_coords=self.sector_coords,
            calendar=self.calendar,
            start_timestamp=self.start_timestamp,
            sector_ids=self.sector_ids,
            holidays=self.holidays,
        )
        fields.update(changes)
        return KpiDataset(**fields)


@dataclass
class ScoringConfig:
    weights: np.ndarray
    kpi_thresholds: np.ndarray
    hot_threshold: float = 0.6

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.kpi_thresholds = np.asarray(self.kpi_thresholds, dtype=np.float64).ravel()
        self.hot_threshold = float(self.hot_threshold)
        if self.weights.shape != self.kpi_thresholds.shape:
            raise ValueError("weights and kpi_thresholds must have the same length")
        if np.any(self.weights < 0) or not np.any(self.weights > 0):
            raise ValueError("weights must be non-negative with at least one positive entry")
        if not (0.0 < self.hot_threshold < self.weights.sum()):
            raise ValueError("hot_threshold must lie strictly between 0 and the sum of weights")

    @property
    def max_score(self) -> float:
        return float(self.weights.sum())


@dataclass
class ScoreSet:
    s_raw: np.ndarray
    s_hour: np.ndarray
    s_day: np.ndarray
    s_week: np.ndarray
    y_hour: np.ndarray
    y_day: np.ndarray
    y_week: np.ndarray
    y_become: np.ndarray
    become_labeled: np.ndarray = field(default=None)

    @property
    def m_days(self) -> int:
        return self.s_day.shape[1]


def heaviside(x: float) -> int:
    """Step function with H(0) = 0."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"heaviside of non-finite value {x!r}")
    return 1 if x > 0 else 0


def compute_raw_scores(data: KpiDataset | np.ndarray, cfg: ScoringConfig) -> np.ndarray:
    """Hourly score: weighted count of KPIs strictly above their thresholds."""
    if isinstance(data, KpiDataset):
        if data.missing_mask.any():
            raise ValueError("dataset still has missing values; impute before scoring")
        kpi = data.kpi
    else:
        kpi = np.asarray(data, dtype=np.float64)
    if kpi.shape[-1] != cfg.weights.shape[0]:
        raise ValueError(
            f"scoring config covers {cfg.weights.shape[0]} KPIs, data has {kpi.shape[-1]}"
        )
    if not np.all(np.isfinite(kpi)):
        raise ValueError("KPI values must be finite for scoring")
    above = kpi > cfg.kpi_thresholds
    return above.astype(np.float64) @ cfg.weights


def windowed_mean(x: int, y: int, z: Sequence[float]) -> float:
    """Mean of ``z`` over the ``y`` samples ending at index ``x`` (inclusive)."""
    if y < 1:
        raise ValueError("window length must be >= 1")
    z = np.asarray(z, dtype=np.float64)
    start = x - y + 1
    if start < 0:
        raise ValueError(f"window ({x - y}, {x}] starts before the series")
    if x >= z.shape[-1]:
        raise ValueError(f"window end {x} is past the series end {z.shape[-1] - 1}")
    return float(np.mean(z[..., start : x + 1], axis=-1))


def integrate_scores(s_raw: np.ndarray, period: str) -> np.ndarray:
    """Average hourly scores over consecutive hour/day/week blocks.

    Column ``j`` of the result is the windowed mean ending at hour
    ``(j + 1) * delta - 1``.
    """
    try:
        delta = PERIOD_HOURS[period]
    except KeyError:
        raise ValueError(f"unknown integration period {period!r}") from None
    s_raw = np.asarray(s_raw, dtype=np.float64)
    m = s_raw.shape[-1]
    if m % delta:
        raise ValueError(f"series length {m} not divisible by {delta}")
    if delta == 1:
        return s_raw.copy()
    return s_raw.reshape(*s_raw.shape[:-1], m // delta, delta).mean(axis=-1)


def label_hot_spots(s: np.ndarray, cfg: ScoringConfig | float) -> np.ndarray:
    eps = cfg.hot_threshold if isinstance(cfg, ScoringConfig) else float(cfg)
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s > eps


def become_labeled_days(m_days: int) -> np.ndarray:
    """Days with a full week of context on both sides (days j-6..j and j+1..j+7)."""
    days = np.arange(m_days)
    return (days >= DAYS_PER_WEEK - 1) & (days + DAYS_PER_WEEK <= m_days - 1)


def _trailing_week_means(s_raw: np.ndarray, m_days: int) -> np.ndarray:
    """Mean of S' over the 168 hours ending with day j, for every day j (NaN if short)."""
    n, m = s_raw.shape
    csum = np.zeros((n, m + 1))
    np.cumsum(s_raw, axis=1, out=csum[:, 1:])
    ends = (np.arange(m_days) + 1) * HOURS_PER_DAY
    starts = ends - HOURS_PER_WEEK
    out = np.full((n, m_days), np.nan)
    ok = starts >= 0
    out[:, ok] = (csum[:, ends[ok]] - csum[:, starts[ok]]) / HOURS_PER_WEEK
    return out


def label_become_hot_spot(
    s_raw: np.ndarray, s_day: np.ndarray, cfg: ScoringConfig | float
) -> np.ndarray:
    """Days on which a sector turns from a cold week into a hot week.

    Day ``j`` is active when the week ending with day ``j`` has mean raw score
    at or below the threshold, the following week (days ``j+1 .. j+7``) is above
    it, day ``j`` itself is not hot and day ``j+1`` is. A sector must climb
    above the threshold again on the trailing-week mean before it can fire a
    second time. Days without a full week of context are left at False; see
    :func:`become_labeled_days`.
    """
    eps = cfg.hot_threshold if isinstance(cfg, ScoringConfig) else float(cfg)
    s_raw = np.asarray(s_raw, dtype=np.float64)
    s_day = np.asarray(s_day, dtype=np.float64)
    n, m_days = s_day.shape
    if s_raw.shape != (n, m_days * HOURS_PER_DAY):
        raise ValueError("s_raw and s_day cover different spans")

    trailing = _trailing_week_means(s_raw, m_days)
    labeled = become_labeled_days(m_days)
    out = np.zeros((n, m_days), dtype=bool)
    if not labeled.any():
        return out
    days = np.flatnonzero(labeled)
    before = trailing[:, days]
    after = trailing[:, days + DAYS_PER_WEEK]
    cold_before = (before - eps) <= 0
    hot_after = (after - eps) > 0
    step = (s_day[:, days] - eps <= 0) & (s_day[:, days + 1] - eps > 0)
    out[:, days] = cold_before & hot_after & step

    # discard consecutive activations
    hot_trailing = np.nan_to_num(trailing, nan=-np.inf) > eps
    for i in np.flatnonzero(out.sum(axis=1) > 1):
        active = np.flatnonzero(out[i])
        last = active[0]
        for j in active[1:]:
            if hot_trailing[i, last + 1 : j].any():
                last = j
            else:
                out[i, j] = False
    return out


def _parse_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        try:
            return dt.date.fromisoformat(value.strip())
        except ValueError:
            raise ValueError(f"malformed holiday date {value!r}") from None
    raise ValueError(f"malformed holiday date {value!r}")


def build_calendar(
    start: dt.datetime, m_hours: int, holidays: Iterable = ()
) -> np.ndarray:
    """Hourly calendar matrix with columns :data:`CALENDAR_COLUMNS`."""
    if m_hours < 1:
        raise ValueError("m_hours must be >= 1")
    if isinstance(start, str):
        start = dt.datetime.fromisoformat(start)
    elif isinstance(start, dt.date) and not isinstance(start, dt.datetime):
        start = dt.datetime.combine(start, dt.time())
    holiday_set = {_parse_date(h) for h in holidays}
    cal = np.zeros((m_hours, len(CALENDAR_COLUMNS)), dtype=np.int64)
    one_hour = dt.timedelta(hours=1)
    for j in range(m_hours):
        ts = start + j * one_hour
        dow = ts.weekday()
        cal[j] = (ts.hour, dow, ts.day, int(dow >= 5), int(ts.date() in holiday_set))
    return cal


def compute_scores(data: KpiDataset, cfg: ScoringConfig) -> ScoreSet:
    """Raw, integrated scores and labels for an imputed dataset."""
    s_raw = compute_raw_scores(data, cfg)
    s_day = integrate_scores(s_raw, "day")
    s_week = integrate_scores(s_raw, "week")
    return ScoreSet(
        s_raw=s_raw,
        s_hour=s_raw.copy(),
        s_day=s_day,
        s_week=s_week,
        y_hour=label_hot_spots(s_raw, cfg),
        y_day=label_hot_spots(s_day, cfg),
        y_week=label_hot_spots(s_week, cfg),
        y_become=label_become_hot_spot(s_raw, s_day, cfg),
        become_labeled=become_labeled_days(s_day.shape[1]),
    )
