"""Forecasting input tensor and the three feature encodings fed to classifiers.

Channel order of the input tensor (0-based):

    0 .. l-1    KPIs
    l .. l+4    calendar (hour of day, day of week, day of month, weekend, holiday)
    l+5         hourly score
    l+6         daily score, repeated over its 24 hours
    l+7         weekly score, repeated over its 168 hours
    l+8         daily hot spot label, repeated over its 24 hours

With l = 21 the daily label sits at 1-based index 30.

Feature vector layouts (all row-major):

* raw:          (hour, channel), 24*w*C values
* percentiles:  (day, percentile in 5/25/50/75/95, channel), 5*w*C values
* handcrafted:  (channel, HANDCRAFTED_NAMES), 137*C values
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CALENDAR_COLUMNS, HOURS_PER_DAY, HOURS_PER_WEEK, KpiDataset, ScoreSet

PERCENTILES = (5, 25, 50, 75, 95)
SCORE_CHANNELS = ("score_hour", "score_day", "score_week", "label_day")
N_EXTRA_CHANNELS = len(CALENDAR_COLUMNS) + len(SCORE_CHANNELS)


def _handcrafted_names() -> list[str]:
    names = []
    for part in ("all", "first", "second"):
        names += [f"{part}_{s}" for s in ("mean", "std", "min", "max")]
    names += [f"halfdiff_{s}" for s in ("mean", "std", "min", "max")]
    names += [f"day_profile_{h}" for h in range(24)]
    names += [f"week_profile_{p}" for p in range(7)]
    names += ["weekday_minus_weekend", "day_peak_minus_trough"]
    names += [f"day_min_{h}" for h in range(24)] + [f"day_max_{h}" for h in range(24)]
    names += [f"week_min_{p}" for p in range(7)] + [f"week_max_{p}" for p in range(7)]
    names += [f"last_day_{h}" for h in range(24)] + ["last_day_mean", "last_day_std"]
    return names


# week-profile positions count back from the most recent day (0 = last day)
HANDCRAFTED_NAMES = tuple(_handcrafted_names())


@dataclass(frozen=True)
class FeatureLayout:
    names: tuple[str, ...]

    @classmethod
    def for_kpis(cls, l_kpis: int) -> "FeatureLayout":
        kpis = tuple(f"kpi_{k}" for k in range(l_kpis))
        cal = tuple(f"cal_{c}" for c in CALENDAR_COLUMNS)
        return cls(kpis + cal + SCORE_CHANNELS)

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def l_kpis(self) -> int:
        return len(self.names) - N_EXTRA_CHANNELS


@dataclass
class InputTensor:
    x: np.ndarray
    layout: FeatureLayout

    @property
    def n_sectors(self) -> int:
        return self.x.shape[0]

    @property
    def m_days(self) -> int:
        return self.x.shape[1] // HOURS_PER_DAY


def assemble_input_tensor(data: KpiDataset, scores: ScoreSet) -> InputTensor:
    n, m, l = data.kpi.shape
    if data.missing_mask.any():
        raise ValueError("assemble the input tensor from imputed data")
    if scores.s_hour.shape != (n, m):
        raise ValueError("hourly scores do not match the KPI tensor")
    if scores.s_day.shape != (n, m // HOURS_PER_DAY) or scores.s_week.shape != (
        n,
        m // HOURS_PER_WEEK,
    ):
        raise ValueError("daily/weekly score resolution mismatch")
    x = np.empty((n, m, l + N_EXTRA_CHANNELS))
    x[..., :l] = data.kpi
    x[..., l : l + 5] = data.calendar[None, :, :]
    x[..., l + 5] = scores.s_hour
    x[..., l + 6] = np.repeat(scores.s_day, HOURS_PER_DAY, axis=1)
    x[..., l + 7] = np.repeat(scores.s_week, HOURS_PER_WEEK, axis=1)
    x[..., l + 8] = np.repeat(scores.y_day.astype(float), HOURS_PER_DAY, axis=1)
    return InputTensor(x, FeatureLayout.for_kpis(l))


def window_bounds(t: int, w: int) -> tuple[int, int]:
    """Hour range [start, stop) of the ``w`` days ending with day ``t``."""
    if w < 1:
        raise ValueError("window must span at least one day")
    if t - w + 1 < 0:
        raise ValueError(f"window of {w} days ending at day {t} starts before the data")
    return (t - w + 1) * HOURS_PER_DAY, (t + 1) * HOURS_PER_DAY


def slice_window(x: InputTensor | np.ndarray, sector: int, t: int, w: int) -> np.ndarray:
    arr = x.x if isinstance(x, InputTensor) else x
    start, stop = window_bounds(t, w)
    if stop > arr.shape[1]:
        raise ValueError(f"day {t} is past the end of the data")
    return arr[sector, start:stop]


def window_block(x: InputTensor | np.ndarray, t: int, w: int) -> np.ndarray:
    """All sectors' windows at once: (n, 24w, C)."""
    arr = x.x if isinstance(x, InputTensor) else x
    start, stop = window_bounds(t, w)
    if stop > arr.shape[1]:
        raise ValueError(f"day {t} is past the end of the data")
    return arr[:, start:stop]


def _days(window: np.ndarray) -> np.ndarray:
    rows, c = window.shape[-2:]
    if rows % HOURS_PER_DAY:
        raise ValueError("window rows must be a multiple of 24")
    return window.reshape(*window.shape[:-2], rows // HOURS_PER_DAY, HOURS_PER_DAY, c)


def raw_features(window: np.ndarray) -> np.ndarray:
    window = np.asarray(window, dtype=np.float64)
    return window.reshape(*window.shape[:-2], -1)


def unflatten_raw(vector: np.ndarray, n_channels: int) -> np.ndarray:
    vector = np.asarray(vector)
    return vector.reshape(*vector.shape[:-1], -1, n_channels)


def percentile_features(window: np.ndarray) -> np.ndarray:
    days = _days(np.asarray(window, dtype=np.float64))
    q = np.percentile(days, PERCENTILES, axis=-2, method="linear")
    # (5, ..., w, C) -> (..., w, 5, C)
    q = np.moveaxis(q, 0, -2)
    return q.reshape(*q.shape[:-3], -1)


def _week_positions(w: int) -> np.ndarray:
    return (w - 1 - np.arange(w)) % 7


def handcrafted_features(window: np.ndarray, weekend_channel: int | None = None) -> np.ndarray:
    """Summary statistics per channel, laid out as ``HANDCRAFTED_NAMES``.

    Windows shorter than a week cannot fill every week-profile position; the
    empty positions take the mean of all day means (see :func:`week_profile_fallback`).
    """
    window = np.asarray(window, dtype=np.float64)
    rows, c = window.shape[-2:]
    if rows < 2 * HOURS_PER_DAY:
        raise ValueError("handcrafted features need at least two days")
    days = _days(window)
    w = days.shape[-3]
    if weekend_channel is None:
        weekend_channel = c - N_EXTRA_CHANNELS + CALENDAR_COLUMNS.index("is_weekend")

    def stats(block):
        return [block.mean(-2), block.std(-2), block.min(-2), block.max(-2)]

    n_first = w // 2
    first = days[..., :n_first, :, :].reshape(*days.shape[:-3], -1, c)
    second = days[..., n_first:, :, :].reshape(*days.shape[:-3], -1, c)
    s_all, s_first, s_second = stats(window), stats(first), stats(second)
    halfdiff = [b - a for a, b in zip(s_first, s_second)]

    day_profile = days.mean(-3)
    day_means = days.mean(-2)
    pos = _week_positions(w)
    overall = day_means.mean(-2)
    week_avg, week_min, week_max = [], [], []
    for p in range(7):
        sel = day_means[..., pos == p, :]
        if sel.shape[-2]:
            week_avg.append(sel.mean(-2))
            week_min.append(sel.min(-2))
            week_max.append(sel.max(-2))
        else:
            week_avg.append(overall)
            week_min.append(overall)
            week_max.append(overall)

    weekend = window[..., weekend_channel] > 0.5
    n_we = weekend.sum(-1)[..., None]
    n_wd = (~weekend).sum(-1)[..., None]
    sum_we = np.sum(window * weekend[..., None], axis=-2)
    sum_wd = np.sum(window * ~weekend[..., None], axis=-2)
    both = (n_we > 0) & (n_wd > 0)
    wd_we = np.where(both, sum_wd / np.maximum(n_wd, 1) - sum_we / np.maximum(n_we, 1), 0.0)
    peak_trough = day_profile.max(-2) - day_profile.min(-2)

    last = days[..., -1, :, :]
    parts = (
        [x[..., None] for x in s_all + s_first + s_second + halfdiff]
        + [np.moveaxis(day_profile, -2, -1)]
        + [np.stack(week_avg, axis=-1)]
        + [wd_we[..., None], peak_trough[..., None]]
        + [np.moveaxis(days.min(-3), -2, -1), np.moveaxis(days.max(-3), -2, -1)]
        + [np.stack(week_min, axis=-1), np.stack(week_max, axis=-1)]
        + [np.moveaxis(last, -2, -1), last.mean(-2)[..., None], last.std(-2)[..., None]]
    )
    feats = np.concatenate(parts, axis=-1)
    assert feats.shape[-1] == len(HANDCRAFTED_NAMES)
    return feats.reshape(*feats.shape[:-2], -1)


def week_profile_fallback(w: int) -> bool:
    """True when a ``w``-day window leaves week-profile positions empty."""
    return w < 7


def feature_length(kind: str, w: int, n_channels: int) -> int:
    per = {"raw": HOURS_PER_DAY * w, "percentile": len(PERCENTILES) * w, "handcrafted": len(HANDCRAFTED_NAMES)}
    return per[kind] * n_channels


FEATURE_EXTRACTORS = {
    "raw": raw_features,
    "percentile": percentile_features,
    "handcrafted": handcrafted_features,
}


def extract(kind: str, x: InputTensor, t: int, w: int) -> np.ndarray:
    """Feature matrix (n_sectors, n_features) for the window ending at day ``t``."""
    block = window_block(x, t, w)
    if kind == "handcrafted":
        return handcrafted_features(block, weekend_channel=x.layout.index("cal_is_weekend"))
    return FEATURE_EXTRACTORS[kind](block)
