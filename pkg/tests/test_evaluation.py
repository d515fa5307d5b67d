import datetime as dt
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hotspot import core, evaluation, features
from hotspot.evaluation import ExperimentGrid


def test_average_precision_examples():
    assert evaluation.average_precision([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert evaluation.average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == pytest.approx(5 / 6)
    # ties keep input order
    assert evaluation.average_precision([1, 1, 1], [0, 0, 1]) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        evaluation.average_precision([0.2, 0.1], [0, 0])


def test_expected_random_ap_against_permutations():
    for n, r in [(4, 1), (5, 2), (6, 3)]:
        labels = np.r_[np.ones(r), np.zeros(n - r)]
        aps = [evaluation.average_precision(-np.arange(n), labels[list(p)])
               for p in itertools.permutations(range(n))]
        assert evaluation.expected_random_ap(n, r) == pytest.approx(np.mean(aps), abs=1e-12)


def test_random_ap_near_prevalence_at_scale(rng):
    n, r = 1000, 100
    labels = np.r_[np.ones(r), np.zeros(n - r)]
    aps = [evaluation.average_precision(rng.random(n), labels) for _ in range(10_000)]
    assert np.mean(aps) == pytest.approx(r / n, abs=0.01)
    assert np.mean(aps) == pytest.approx(evaluation.expected_random_ap(n, r), abs=0.002)


def test_lift_and_ratio():
    assert evaluation.lift(0.3, 0.3) == 1.0
    assert evaluation.ratio(10, 11.4) == pytest.approx(14.0)
    assert evaluation.ratio(2.0, 2.0) == 0.0
    assert evaluation.ratio(3 * 2.0, 3 * 2.6) == pytest.approx(evaluation.ratio(2.0, 2.6))


def test_precision_recall_curve():
    perfect = evaluation.precision_recall_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert perfect[:2] == [(0.5, 1.0), (1.0, 1.0)]
    rev = evaluation.precision_recall_curve([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0])
    assert rev[-1] == (1.0, 0.5)
    curve = evaluation.precision_recall_curve([0.5, 0.5, 0.3, 0.1, 0.1], [1, 0, 1, 0, 1])
    assert len(curve) == 3


def test_ks_trivial_cases():
    a = np.arange(10.0)
    d, p = evaluation.ks_two_sample(a, a)
    assert d == 0 and p == 1.0
    d, p = evaluation.ks_two_sample(np.zeros(8), np.ones(8))
    assert d == 1.0 and p < 1e-3
    d2, p2 = evaluation.ks_two_sample(np.exp(a), np.exp(a + 0.5))
    assert (d2, p2) == evaluation.ks_two_sample(a, a + 0.5)
    with pytest.raises(ValueError):
        evaluation.ks_two_sample([], [1.0])


def permutation_p(a, b, rng, n_perm=20_000):
    d0, _ = evaluation.ks_two_sample(a, b)
    pooled = np.r_[a, b]
    hits = 0
    for _ in range(n_perm):
        rng.shuffle(pooled)
        d, _ = evaluation.ks_two_sample(pooled[: a.size], pooled[a.size :])
        hits += d >= d0 - 1e-12
    return hits / n_perm


def test_ks_p_matches_permutation_oracle():
    rng = np.random.default_rng(3)
    for shift in (0.0, 0.5, 0.9):
        a = rng.normal(size=18)
        b = rng.normal(shift, 1, size=18)
        assert evaluation.ks_two_sample(a, b)[1] == pytest.approx(permutation_p(a, b, rng, 4000), abs=0.02)


def test_ks_asymptotic_branch_for_large_samples(rng):
    a, b = rng.normal(size=400), rng.normal(size=400)
    d, p = evaluation.ks_two_sample(a, b)
    assert 0 < p <= 1
    assert evaluation._kolmogorov_sf(0.0) == 1.0
    assert evaluation._kolmogorov_sf(1.36) == pytest.approx(0.0494, abs=1e-3)
    assert evaluation._kolmogorov_sf(0.5) == pytest.approx(0.9639, abs=1e-3)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=15),
       st.lists(st.floats(-100, 100), min_size=2, max_size=15))
def test_ks_invariant_under_increasing_transform(a, b):
    a, b = np.array(a), np.array(b)
    assert evaluation.ks_two_sample(a, b) == evaluation.ks_two_sample(np.arctan(a / 50), np.arctan(b / 50))


def test_confidence_interval():
    assert evaluation.confidence_interval([2.0, 2.0, 2.0]) == (2.0, 2.0, 2.0)
    m, lo, hi = evaluation.confidence_interval([-1.0, 1.0])
    assert m == 0 and lo == -hi
    v = [1.0, 2.0, 4.0, 7.0, 11.0]
    half = 1.96 * np.std(v, ddof=1) / math.sqrt(5)
    assert evaluation.confidence_interval(v) == pytest.approx((5.0, 5.0 - half, 5.0 + half))
    assert evaluation.confidence_interval([3.0]) == (3.0, 3.0, 3.0)


def toy_inputs(day_labels):
    """One KPI per sector, constant per day: 1 on hot days, 0 otherwise."""
    y = np.asarray(day_labels, dtype=float)
    n, m_days = y.shape
    kpi = np.repeat(y, 24, axis=1)[..., None]
    start = dt.datetime(2015, 11, 30)
    data = core.KpiDataset(kpi, np.zeros(kpi.shape, bool), np.zeros((n, 2)),
                           core.build_calendar(start, m_days * 24), start)
    s = core.compute_scores(data, core.ScoringConfig([1.0], [0.5], 0.6))
    return data, s, features.assemble_input_tensor(data, s)


def test_single_cell_persist_by_hand():
    y = np.zeros((4, 14), int)
    y[:, 7] = [1, 0, 1, 0]
    y[:, 8] = [1, 1, 0, 0]
    data, s, x = toy_inputs(y)
    grid = ExperimentGrid(t_values=(7,), h_values=(1,), w_values=(1,), models=("Persist",), targets=("be-hot",))
    res = evaluation.run_grid(data, s, x, grid)
    (rec,) = res.records
    assert rec["psi"] == pytest.approx(5 / 6)
    assert rec["lift"] == pytest.approx((5 / 6) / (49 / 72))


def test_grid_skips_are_reported():
    y = np.zeros((4, 14), int)
    y[:, 9] = [1, 0, 0, 0]
    data, s, x = toy_inputs(y)
    grid = ExperimentGrid(t_values=(2, 8, 13), h_values=(1,), w_values=(1, 5),
                          models=("Persist", "Trend", "RF-F2"), targets=("be-hot",))
    res = evaluation.run_grid(data, s, x, grid)
    reasons = {(r["t"], r["w"], r["model"]): r["reason"] for r in res.skipped}
    assert "before data start" in reasons[(2, 5, "Persist")]
    assert "past data end" in reasons[(13, 1, "Persist")]
    assert reasons[(8, 1, "Trend")] == "trend needs w >= 2"
    assert "handcrafted" in reasons[(8, 1, "RF-F2")]
    assert "single-class" in reasons[(8, 5, "RF-F2")]
    assert {(r["t"], r["w"], r["model"]) for r in res.records} == {(8, 1, "Persist"), (8, 5, "Persist"),
                                                                   (8, 5, "Trend")}


def test_grid_rejects_unknown_models():
    with pytest.raises(ValueError):
        ExperimentGrid(models=("Oracle",))
    with pytest.raises(ValueError):
        ExperimentGrid(random_mode="guess")


def test_grid_is_reproducible(clean_set):
    data, _, _, s, x = clean_set
    grid = ExperimentGrid(t_values=(40, 50), h_values=(1, 7), w_values=(3,), n_trees=4,
                          models=("Random", "Tree", "RF-R", "RF-F1"), importance_cells=((7, 3),))
    a = evaluation.run_grid(data, s, x, grid)
    b = evaluation.run_grid(data, s, x, grid)
    assert a.records == b.records
    assert all(r["runtime_ms"] is None for r in a.records)
    key = ("be-hot", 7, 3)
    assert a.importances[key].shape == (72, 30)
    assert a.importances[key].sum() == pytest.approx(1.0)


def test_become_target_uses_labeled_days_only(clean_set):
    data, _, _, s, x = clean_set
    grid = ExperimentGrid(t_values=(60,), h_values=(1,), w_values=(2,), models=("Average",),
                          targets=("become-hot",))
    res = evaluation.run_grid(data, s, x, grid)
    for r in res.records:
        assert s.become_labeled[r["t"] + r["h"]]
    late = ExperimentGrid(t_values=(s.m_days - 3,), h_values=(1,), w_values=(2,), models=("Average",),
                          targets=("become-hot",))
    res = evaluation.run_grid(data, s, x, late)
    assert not res.records and res.skipped[0]["reason"] == "evaluation day unlabeled"


def test_sampled_random_mode_gives_unit_random_lift(clean_set):
    data, _, _, s, x = clean_set
    grid = ExperimentGrid(t_values=(40, 45), h_values=(2,), w_values=(2,), models=("Random", "Average"),
                          targets=("be-hot",), random_mode="sampled")
    res = evaluation.run_grid(data, s, x, grid)
    assert all(r["lift"] == 1.0 for r in res.records if r["model"] == "Random")


def test_summary_groups_across_t(clean_set):
    data, _, _, s, x = clean_set
    grid = ExperimentGrid(t_values=(40, 41, 42), h_values=(1,), w_values=(2,), models=("Average",),
                          targets=("be-hot",))
    res = evaluation.run_grid(data, s, x, grid)
    (row,) = res.summary("lift", by=("model", "h"))
    assert row["count"] == 3
    assert row["mean"] == pytest.approx(np.mean(res.values("lift")))


def synthetic_result(first, second):
    recs = []
    for t, v in enumerate(list(first) + list(second)):
        recs.append(dict(t=t, h=1, w=1, model="M", target="be-hot", psi=v))
    return evaluation.GridResult(records=recs)


def test_temporal_stability_identical_and_shifted(rng):
    same = rng.random(18)
    st_same = evaluation.temporal_stability(synthetic_result(same, same))
    assert st_same["rows"][0]["p"] == 1.0
    shifted = evaluation.temporal_stability(synthetic_result(rng.normal(0, 0.05, 18), rng.normal(0.3, 0.05, 18)))
    assert shifted["rows"][0]["p"] < 0.01
    assert shifted["frac_below_0.01"] == 1.0
