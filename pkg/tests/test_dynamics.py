from collections import Counter

import numpy as np
import pytest

from hotspot import dynamics


def test_duty_histograms_extremes():
    zeros = dynamics.duty_histograms(np.zeros((2, 336)), np.zeros((2, 14)), np.zeros((2, 2)))
    for h in zeros.values():
        assert h[0] == 1.0
    ones = dynamics.duty_histograms(np.ones((1, 168 * 18)), np.ones((1, 126)), np.ones((1, 18)))
    assert ones["hours_per_day"][24] == 1.0
    assert ones["days_per_week"][7] == 1.0
    assert ones["weeks_per_sector"][18] == 1.0


def test_duty_histograms_hand_counts():
    y_hour = np.zeros((2, 168))
    y_hour[0, :3] = 1          # day 0 of sector 0: 3 hot hours
    y_hour[1, 24:48] = 1       # day 1 of sector 1: 24 hot hours
    y_day = np.zeros((2, 7))
    y_day[1, 1] = 1
    y_week = np.array([[0], [1]])
    h = dynamics.duty_histograms(y_hour, y_day, y_week)
    assert h["hours_per_day"][0] == pytest.approx(12 / 14)
    assert h["hours_per_day"][3] == pytest.approx(1 / 14)
    assert h["hours_per_day"][24] == pytest.approx(1 / 14)
    assert h["days_per_week"].tolist()[:2] == [0.5, 0.5]
    assert h["weeks_per_sector"].tolist() == [0.5, 0.5]
    for v in h.values():
        assert v.sum() == pytest.approx(1.0, abs=1e-9)


def test_run_lengths():
    assert dynamics.run_lengths([1, 1, 0, 1]) == Counter({2: 1, 1: 1})
    assert dynamics.run_lengths(np.zeros((3, 5))) == Counter()
    assert dynamics.run_lengths([[0, 1, 1, 1], [1, 0, 0, 0]]) == Counter({3: 1, 1: 1})


def test_census_examples():
    y = np.zeros((2, 14), bool)
    y[0, :5] = True            # MTWTF--
    y[1, 7:12] = True          # MTWTF--
    rows = dynamics.weekly_pattern_census(y)
    assert rows[0].pattern == "-------" and rows[0].rank == 0 and rows[0].count == 2
    assert (rows[1].pattern, rows[1].count, rows[1].share) == ("MTWTF--", 2, 1.0)
    cold = dynamics.weekly_pattern_census(np.zeros((3, 7), bool))
    assert [r.pattern for r in cold] == ["-------"]


def test_census_respects_first_weekday_and_inclusion():
    y = np.zeros((1, 7), bool)
    y[0, 0] = True
    assert dynamics.weekly_pattern_census(y, first_weekday=4)[-1].pattern == "----F--"
    rows = dynamics.weekly_pattern_census(np.r_[y, np.zeros((1, 7), bool)], exclude_never_hot=False)
    assert sum(r.share for r in rows) == pytest.approx(1.0)


def test_census_permutation_invariant(rng):
    y = rng.random((40, 21)) < 0.3
    a = dynamics.weekly_pattern_census(y)
    b = dynamics.weekly_pattern_census(y[rng.permutation(40)])
    assert [(r.rank, r.pattern, r.count) for r in a] == [(r.rank, r.pattern, r.count) for r in b]
    assert [r.share for r in a[1:]] == [r.share for r in b[1:]]


def test_pearson():
    a = np.array([1.0, 2.0, 4.0, 3.0])
    assert dynamics.pearson(a, a) == pytest.approx(1.0)
    assert dynamics.pearson(a, -a) == pytest.approx(-1.0)
    assert dynamics.pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
    assert np.isnan(dynamics.pearson([1, 1, 1], [1, 2, 3]))


def test_weekly_consistency():
    week = np.array([1, 1, 0, 0, 1, 0, 0])
    periodic = np.tile(week, 4)[None, :]
    assert dynamics.weekly_consistency(periodic)["per_sector"][0] == pytest.approx(1.0)
    res = dynamics.weekly_consistency(np.zeros((2, 14)))
    assert np.isnan(res["per_sector"]).all() and res["n_excluded_sectors"] == 2


def test_weekly_consistency_matches_pearson(rng):
    y = (rng.random((1, 28)) < 0.5).astype(float)
    weeks = y.reshape(4, 7)
    mean = weeks.mean(axis=0)
    rs = [dynamics.pearson(w, mean) for w in weeks]
    rs = [r for r in rs if not np.isnan(r)]
    assert dynamics.weekly_consistency(y)["per_sector"][0] == pytest.approx(np.mean(rs))


def test_buckets():
    b = dynamics.DistanceBuckets.logarithmic()
    assert len(b.edges) == 11 and b.labels[0] == "0"
    assert b.assign([0.0, 0.01, 0.05, 1.0, 49.9, 50.0]).tolist() == [0, -1, 1, 5, 10, -1]
    with pytest.raises(ValueError):
        dynamics.DistanceBuckets((1.0, 0.5))


def test_spatial_colocated_identical_series():
    coords = np.array([[0.0, 0.0], [0.0, 0.0], [3.0, 0.0]])
    y = np.array([[1, 0, 1, 1, 0], [1, 0, 1, 1, 0], [0, 1, 1, 0, 0]])
    res = dynamics.spatial_correlation(y, coords, "avg-nearest", n_nearest=2)
    assert res["stats"][0]["median"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dynamics.spatial_correlation(y[:1], coords[:1])


def test_spatial_independent_series_near_zero(rng):
    n = 120
    coords = rng.uniform(0, 20, size=(n, 2))
    y = rng.random((n, 2000)) < 0.3
    res = dynamics.spatial_correlation(y, coords, "avg-nearest", n_nearest=40)
    meds = [s["median"] for s in res["stats"] if s["count"] > 5]
    assert meds and max(abs(m) for m in meds) < 0.05


def test_spatial_avg_mode_accounting(rng):
    n = 30
    coords = rng.uniform(0, 5, size=(n, 2))
    y = (rng.random((n, 200)) < 0.3).astype(int)
    y[3] = 0  # constant series
    res = dynamics.spatial_correlation(y, coords, "avg-nearest", n_nearest=500)
    assert res["neighbors"] == n - 1
    assert res["assigned"] + res["excluded_constant"] + res["excluded_distance"] == n * (n - 1)
    assert res["excluded_constant"] == 2 * (n - 1)


def test_spatial_same_tower_strongest(clean_set):
    data, _, _, s, _ = clean_set
    for mode in dynamics.SPATIAL_MODES:
        res = dynamics.spatial_correlation(s.y_hour, data.sector_coords, mode, n_nearest=40, n_top=10)
        meds = [st["median"] for st in res["stats"]]
        zero = meds[0]
        assert all(zero > m for m in meds[1:] if m is not None)
