"""Reference forecasters that only look at past scores and labels.

Each function returns one ranking score per sector for a forecast issued at
day ``t``; the horizon does not enter any of them.
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class BaselineKind(str, Enum):
    RANDOM = "Random"
    PERSIST = "Persist"
    AVERAGE = "Average"
    TREND = "Trend"


def predict_random(rng: np.random.Generator, size: int | None = None):
    """Uniform draws in [0, 1)."""
    return rng.random(size) if size is not None else float(rng.random())


def predict_persist(y_day: np.ndarray, i, t: int):
    """Today's label, whatever the horizon."""
    v = np.asarray(y_day)[i, t]
    return v.astype(np.float64) if np.ndim(v) else float(v)


def _window_mean(s: np.ndarray, t: int, w: int) -> np.ndarray:
    if w < 1:
        raise ValueError("w must be >= 1")
    if t - w + 1 < 0:
        raise ValueError(f"window of {w} days ending at {t} starts before the data")
    return s[..., t - w + 1 : t + 1].mean(axis=-1)


def predict_average(s_day: np.ndarray, i, t: int, w: int):
    """Mean daily score over days ``t-w+1 .. t``."""
    s = np.asarray(s_day, dtype=np.float64)[i]
    return _window_mean(s, t, w)


def predict_trend(s_day: np.ndarray, i, t: int, w: int):
    """Average plus the half-window slope.

    Uses ``k = w // 2`` days per half: ``avg + (mean(t-k+1..t) - mean(t-2k+1..t-k)) / k``.
    """
    if w < 2:
        raise ValueError("trend needs w >= 2")
    s = np.asarray(s_day, dtype=np.float64)[i]
    k = w // 2
    recent = _window_mean(s, t, k)
    older = _window_mean(s, t - k, k)
    return _window_mean(s, t, w) + (recent - older) / k
