"""Exploratory statistics of hot spot behaviour over time and space."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import DAYS_PER_WEEK, HOURS_PER_DAY

DAY_LETTERS = "MTWTFSS"
NEVER_HOT = "-------"


def _normalize(counts: np.ndarray) -> np.ndarray:
    total = counts.sum()
    return counts / total if total > 0 else counts.astype(np.float64)


def duty_histograms(y_hour, y_day, y_week) -> dict[str, np.ndarray]:
    """Frequencies of hot hours per sector-day, hot days per sector-week and
    hot weeks per sector. Bin ``k`` holds the share with exactly ``k`` hot units."""
    y_hour = np.asarray(y_hour, dtype=bool)
    y_day = np.asarray(y_day, dtype=bool)
    y_week = np.asarray(y_week, dtype=bool)
    n, m_hours = y_hour.shape
    if m_hours % HOURS_PER_DAY or y_day.shape[1] % DAYS_PER_WEEK:
        raise ValueError("label matrices must cover whole days and weeks")
    per_day = y_hour.reshape(n, -1, HOURS_PER_DAY).sum(axis=2).ravel()
    per_week = y_day.reshape(y_day.shape[0], -1, DAYS_PER_WEEK).sum(axis=2).ravel()
    per_sector = y_week.sum(axis=1)
    return {
        "hours_per_day": _normalize(np.bincount(per_day, minlength=HOURS_PER_DAY + 1)),
        "days_per_week": _normalize(np.bincount(per_week, minlength=DAYS_PER_WEEK + 1)),
        "weeks_per_sector": _normalize(np.bincount(per_sector, minlength=y_week.shape[1] + 1)),
    }


def run_lengths(y) -> Counter:
    """Counter of maximal runs of ones per length, over every row of ``y``.

    A run cut off by the start or end of the series counts at its observed length.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.int8))
    padded = np.pad(y, ((0, 0), (1, 1)))
    d = np.diff(padded, axis=1)
    starts = np.nonzero(d == 1)
    ends = np.nonzero(d == -1)
    # nonzero scans row-major, so starts and ends pair up in order
    lengths = ends[1] - starts[1]
    return Counter({int(k): int(v) for k, v in zip(*np.unique(lengths, return_counts=True))})


def run_length_histograms(y_hour, y_day) -> dict[str, Counter]:
    return {"consecutive_hours": run_lengths(y_hour), "consecutive_days": run_lengths(y_day)}


def pattern_string(bits, first_weekday: int = 0) -> str:
    """7-character pattern, e.g. ``MTWTF--``; ``bits[0]`` falls on ``first_weekday``."""
    chars = ["-"] * DAYS_PER_WEEK
    for k, b in enumerate(bits):
        if b:
            d = (first_weekday + k) % DAYS_PER_WEEK
            chars[d] = DAY_LETTERS[d]
    return "".join(chars)


@dataclass
class CensusRow:
    rank: int
    pattern: str
    count: int
    share: float


def weekly_pattern_census(y_day, first_weekday: int = 0, exclude_never_hot: bool = True):
    """Ranked weekly patterns over all sector-weeks.

    Shares are normalised over hot patterns only unless ``exclude_never_hot``
    is False; the never-hot row is still listed (rank 0 when excluded).
    Ties in count are ordered by pattern string.
    """
    y = np.asarray(y_day, dtype=bool)
    if y.shape[1] % DAYS_PER_WEEK:
        raise ValueError("y_day must cover whole weeks")
    weeks = y.reshape(-1, DAYS_PER_WEEK)
    codes = weeks @ (1 << np.arange(DAYS_PER_WEEK))
    counts = np.bincount(codes, minlength=1 << DAYS_PER_WEEK)
    table = {}
    for code in np.flatnonzero(counts):
        bits = [(code >> k) & 1 for k in range(DAYS_PER_WEEK)]
        table[pattern_string(bits, first_weekday)] = int(counts[code])
    never = table.pop(NEVER_HOT, 0)
    denom = sum(table.values()) + (0 if exclude_never_hot else never)
    ordered = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = []
    if not exclude_never_hot and never:
        ordered = sorted(ordered + [(NEVER_HOT, never)], key=lambda kv: (-kv[1], kv[0]))
    for rank, (p, c) in enumerate(ordered, start=1):
        rows.append(CensusRow(rank, p, c, c / denom if denom else 0.0))
    if exclude_never_hot and never:
        rows.insert(0, CensusRow(0, NEVER_HOT, never, float("nan")))
    return rows


def pearson(a, b) -> float:
    """Pearson correlation; NaN when either series is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equally long series of length >= 2")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.dot(da, da)), np.sqrt(np.dot(db, db))
    if sa == 0 or sb == 0:
        return float("nan")
    return float(np.clip(np.dot(da, db) / (sa * sb), -1.0, 1.0))


def weekly_consistency(y_day, percentiles=(5, 25, 50, 75, 95)) -> dict:
    """Mean correlation of each week with the sector's average week.

    Weeks with a constant 7-vector (or a constant average week) are excluded;
    sectors with no usable week get NaN and are left out of the percentiles.
    """
    y = np.asarray(y_day, dtype=np.float64)
    n = y.shape[0]
    weeks = y.reshape(n, -1, DAYS_PER_WEEK)
    mean_week = weeks.mean(axis=1, keepdims=True)
    dw = weeks - weeks.mean(axis=2, keepdims=True)
    dm = mean_week - mean_week.mean(axis=2, keepdims=True)
    num = (dw * dm).sum(axis=2)
    den = np.sqrt((dw**2).sum(axis=2) * (dm**2).sum(axis=2))
    valid = den > 0
    r = np.divide(num, den, out=np.zeros_like(num), where=valid)
    n_valid = valid.sum(axis=1)
    per_sector = np.divide(r.sum(axis=1), n_valid, out=np.full(n, np.nan), where=n_valid > 0)
    ok = ~np.isnan(per_sector)
    summary = dict(zip(percentiles, np.percentile(per_sector[ok], percentiles))) if ok.any() else {}
    return {
        "per_sector": per_sector,
        "percentiles": summary,
        "mean": float(per_sector[ok].mean()) if ok.any() else float("nan"),
        "n_excluded_sectors": int((~ok).sum()),
        "n_excluded_weeks": int((~valid).sum()),
    }


@dataclass(frozen=True)
class DistanceBuckets:
    """A 0-km bucket (co-located sectors) followed by half-open log-spaced
    intervals ``[edges[k], edges[k+1])``."""

    edges: tuple[float, ...]

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.float64)
        if e.size < 2 or np.any(e <= 0) or np.any(np.diff(e) <= 0):
            raise ValueError("bucket edges must be positive and strictly increasing")

    @classmethod
    def logarithmic(cls, lo: float = 0.05, hi: float = 50.0, n: int = 10) -> "DistanceBuckets":
        return cls(tuple(float(v) for v in np.geomspace(lo, hi, n + 1)))

    @property
    def labels(self) -> list[str]:
        return ["0"] + [f"{a:.3g}-{b:.3g}" for a, b in zip(self.edges[:-1], self.edges[1:])]

    def __len__(self):
        return len(self.edges)

    def assign(self, d) -> np.ndarray:
        """Bucket index per distance; -1 when outside every bucket."""
        d = np.asarray(d, dtype=np.float64)
        e = np.asarray(self.edges)
        idx = np.searchsorted(e, d, side="right")
        out = np.where((idx >= 1) & (idx < e.size), idx, -1)
        return np.where(d == 0, 0, out)


SPATIAL_MODES = ("avg-nearest", "max-nearest", "max-top")


def _correlation_matrix(y) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    d = y - y.mean(axis=1, keepdims=True)
    norm = np.sqrt((d * d).sum(axis=1))
    constant = norm == 0
    z = np.divide(d, norm[:, None], out=np.zeros_like(d), where=~constant[:, None])
    c = np.clip(z @ z.T, -1.0, 1.0)
    return c, constant


def box_stats(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return {"count": 0, "min": None, "q1": None, "median": None, "q3": None, "max": None, "mean": None}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"count": int(v.size), "min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max()), "mean": float(v.mean())}


def spatial_correlation(y_hour, coords, mode: str = "avg-nearest", buckets: DistanceBuckets | None = None,
                        n_nearest: int = 500, n_top: int = 100) -> dict:
    """Per-bucket distribution of per-sector correlations with other sectors.

    ``avg-nearest``/``max-nearest`` look at the ``n_nearest`` closest sectors
    and take the per-bucket mean or maximum; ``max-top`` takes the ``n_top``
    most correlated sectors anywhere and the per-bucket maximum. Neighbour
    counts are capped at ``n - 1``. Pairs involving a constant series and
    pairs outside every bucket are counted, not assigned.
    """
    if mode not in SPATIAL_MODES:
        raise ValueError(f"mode must be one of {SPATIAL_MODES}")
    y = np.asarray(y_hour)
    coords = np.asarray(coords, dtype=np.float64)
    n = y.shape[0]
    if n < 2:
        raise ValueError("spatial correlation needs at least two sectors")
    if coords.shape != (n, 2):
        raise ValueError("coords must be (n_sectors, 2)")
    buckets = buckets or DistanceBuckets.logarithmic()
    corr, constant = _correlation_matrix(y)
    dist = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    k = min(n_top if mode == "max-top" else n_nearest, n - 1)
    n_b = len(buckets)
    per_bucket = [[] for _ in range(n_b)]
    assigned = excluded_constant = excluded_distance = 0
    for i in range(n):
        others = np.r_[0:i, i + 1 : n]
        if mode == "max-top":
            valid = others[:0] if constant[i] else others[~constant[others]]
            excluded_constant += others.size - valid.size
            order = np.argsort(-corr[i, valid], kind="stable")
            neigh = valid[order[:k]]
        else:
            order = np.argsort(dist[i, others], kind="stable")
            neigh = others[order[:k]]
            bad = constant[neigh] | constant[i]
            excluded_constant += int(bad.sum())
            neigh = neigh[~bad]
        b = buckets.assign(dist[i, neigh])
        excluded_distance += int((b < 0).sum())
        vals = corr[i, neigh]
        for j in range(n_b):
            sel = vals[b == j]
            assigned += sel.size
            if sel.size:
                per_bucket[j].append(sel.mean() if mode == "avg-nearest" else sel.max())
    return {
        "mode": mode,
        "buckets": buckets.labels,
        "stats": [box_stats(v) for v in per_bucket],
        "assigned": assigned,
        "excluded_constant": excluded_constant,
        "excluded_distance": excluded_distance,
        "neighbors": k,
    }
