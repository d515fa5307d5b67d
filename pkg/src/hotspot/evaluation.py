"""Ranking metrics, the (t, h, w, model) experiment grid and its statistics."""

from __future__ import annotations

import logging
import math
import time
import zlib
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import baselines, features, trees
from .core import ScoreSet
from .features import InputTensor

log = logging.getLogger(__name__)

BASELINE_MODELS = ("Random", "Persist", "Average", "Trend")
CLASSIFIER_MODELS = ("Tree", "RF-R", "RF-F1", "RF-F2")
ALL_MODELS = BASELINE_MODELS + CLASSIFIER_MODELS
TARGETS = ("be-hot", "become-hot")

FEATURE_KIND = {"Tree": "raw", "RF-R": "raw", "RF-F1": "percentile", "RF-F2": "handcrafted"}


def average_precision(scores, labels) -> float:
    """Mean of precision@rank over the positive items, scores ranked high to low.

    Tied scores keep their input order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in shape")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    ranks = np.flatnonzero(ranked) + 1
    hits = np.arange(1, n_pos + 1)
    return math.fsum((hits / ranks).tolist()) / n_pos


def expected_random_ap(n_items: int, n_pos: int) -> float:
    """Expected average precision of a uniformly random ranking."""
    if not 0 < n_pos <= n_items:
        raise ValueError("need 0 < n_pos <= n_items")
    if n_items == 1:
        return 1.0
    harmonic = math.fsum(1.0 / k for k in range(1, n_items + 1))
    return (n_pos - 1) / (n_items - 1) + harmonic * (n_items - n_pos) / (n_items * (n_items - 1))


def lift(psi_model: float, psi_random: float) -> float:
    return psi_model / psi_random


def ratio(lift_i: float, lift_j: float) -> float:
    """Percentage by which model j's lift exceeds model i's."""
    return 100.0 * (lift_j / lift_i - 1.0)


def precision_recall_curve(scores, labels) -> list[tuple[float, float]]:
    """(recall, precision) at each distinct score threshold, highest first."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = labels.sum()
    if n_pos == 0:
        raise ValueError("precision-recall needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    return [(float(tp[k] / n_pos), float(tp[k] / (k + 1))) for k in last]


def _kolmogorov_sf(x: float) -> float:
    """P(K > x) for the Kolmogorov distribution."""
    if x <= 0:
        return 1.0
    if x < 1.0:
        # theta-function form converges fast for small x
        s = 0.0
        for k in range(1, 50):
            s += math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * x * x))
        return max(0.0, min(1.0, 1.0 - math.sqrt(2 * math.pi) / x * s))
    s, sign = 0.0, 1.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * x * x)
        s += sign * term
        if term < 1e-17:
            break
        sign = -sign
    return max(0.0, min(1.0, 2.0 * s))


def _ks_exact_sf(na: int, nb: int, d_num: int) -> float:
    """P(D >= d) under H0, with d = d_num / (na*nb), by lattice-path counting."""
    if d_num <= 0:
        return 1.0
    row = [0] * (nb + 1)
    for i in range(na + 1):
        for j in range(nb + 1):
            if abs(i * nb - j * na) >= d_num:
                row[j] = 0
            elif i == 0 and j == 0:
                row[j] = 1
            else:
                row[j] = (row[j] if i > 0 else 0) + (row[j - 1] if j > 0 else 0)
    inside = row[nb]
    total = math.comb(na + nb, na)
    return (total - inside) / total


EXACT_KS_LIMIT = 10_000


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sided two-sample Kolmogorov-Smirnov statistic and p-value.

    Small samples (``na * nb <= EXACT_KS_LIMIT``) get the exact null
    distribution; larger ones the asymptotic Kolmogorov law with effective size
    ``na * nb / (na + nb)``.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.union1d(a, b)
    ca = np.searchsorted(a, grid, side="right").astype(np.int64)
    cb = np.searchsorted(b, grid, side="right").astype(np.int64)
    d_num = int(np.max(np.abs(ca * nb - cb * na)))
    d = d_num / (na * nb)
    if na * nb <= EXACT_KS_LIMIT:
        p = _ks_exact_sf(na, nb, d_num)
    else:
        en = na * nb / (na + nb)
        p = _kolmogorov_sf(math.sqrt(en) * d)
    return d, p


def confidence_interval(values, z: float = 1.96) -> tuple[float, float, float]:
    """Normal-approximation CI of the mean (sample std, ddof=1).

    A single value yields a zero-width interval.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values")
    mean = float(v.mean())
    if v.size < 2:
        return mean, mean, mean
    half = z * float(v.std(ddof=1)) / math.sqrt(v.size)
    return mean, mean - half, mean + half


@dataclass
class ExperimentGrid:
    t_values: tuple[int, ...] = tuple(range(52, 88))
    h_values: tuple[int, ...] = (1, 2, 3, 4, 5, 7, 8, 10, 12, 14, 16, 19, 22, 26, 29)
    w_values: tuple[int, ...] = (1, 2, 3, 5, 7, 10, 14, 21)
    models: tuple[str, ...] = ALL_MODELS
    targets: tuple[str, ...] = TARGETS
    reference_model: str = "Average"
    random_mode: str = "analytic"
    seed: int = 0
    n_trees: int = 100
    tree_feature_fraction: float = 0.8
    tree_min_weight_fraction: float = 0.02
    forest_min_weight_fraction: float = 0.0002
    importance_cells: tuple[tuple[int, int], ...] = ((5, 7),)
    threads: int = 1

    def __post_init__(self):
        unknown = set(self.models) - set(ALL_MODELS)
        if unknown:
            raise ValueError(f"unknown models {sorted(unknown)}")
        if set(self.targets) - set(TARGETS):
            raise ValueError(f"unknown targets {set(self.targets) - set(TARGETS)}")
        if self.random_mode not in ("analytic", "sampled"):
            raise ValueError("random_mode must be 'analytic' or 'sampled'")

    def cells(self):
        for target in self.targets:
            for w in self.w_values:
                for h in self.h_values:
                    for t in self.t_values:
                        yield target, t, h, w


@dataclass
class GridResult:
    records: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    importances: dict = field(default_factory=dict)

    def select(self, **where) -> list[dict]:
        return [r for r in self.records if all(r.get(k) == v for k, v in where.items())]

    def values(self, field_name: str = "lift", **where) -> np.ndarray:
        return np.array([r[field_name] for r in self.select(**where) if r[field_name] is not None])

    def summary(self, field_name: str = "lift", by=("target", "model", "h"), **where):
        """Mean and 95% CI of ``field_name`` grouped by ``by`` (typically across t)."""
        groups = defaultdict(list)
        for r in self.select(**where):
            if r.get(field_name) is not None:
                groups[tuple(r[k] for k in by)].append(r[field_name])
        out = []
        for key in sorted(groups, key=lambda k: tuple(str(x) if isinstance(x, str) else x for x in k)):
            mean, lo, hi = confidence_interval(groups[key])
            out.append({**dict(zip(by, key)), "mean": mean, "ci_low": lo, "ci_high": hi,
                        "count": len(groups[key])})
        return out


def cell_seed(base: int, *key) -> np.random.SeedSequence:
    tag = zlib.crc32("|".join(map(str, key)).encode())
    return np.random.SeedSequence([int(base), tag])


def _target_matrix(scores: ScoreSet, target: str):
    if target == "be-hot":
        return scores.y_day, np.ones(scores.m_days, dtype=bool)
    labeled = scores.become_labeled
    if labeled is None:
        from .core import become_labeled_days

        labeled = become_labeled_days(scores.m_days)
    return scores.y_become, labeled


def run_grid(data, scores: ScoreSet, x: InputTensor, grid: ExperimentGrid | None = None,
             record_timing: bool = False) -> GridResult:
    """Train at ``t-h`` against labels at ``t``, forecast from ``t`` for ``t+h``.

    Cells that violate data bounds, have no positive evaluation label, or
    have a single-class training set are skipped and listed in ``skipped``.
    ``data`` is accepted for interface symmetry; everything needed lives in
    ``scores`` and ``x``.
    """
    grid = grid or ExperimentGrid()
    result = GridResult()
    m_days = scores.m_days
    importance_acc = defaultdict(list)

    for target in grid.targets:
        y_target, labeled = _target_matrix(scores, target)
        for w in grid.w_values:
            cache: dict = {}

            def feats(kind, day):
                key = (kind, day)
                if key not in cache:
                    cache[key] = features.extract(kind, x, day, w)
                return cache[key]

            for h in grid.h_values:
                for t in grid.t_values:
                    base = dict(t=t, h=h, w=w, target=target)
                    reason = None
                    if t - h - w + 1 < 0:
                        reason = "training window before data start"
                    elif t + h >= m_days:
                        reason = "horizon past data end"
                    elif not labeled[t + h]:
                        reason = "evaluation day unlabeled"
                    if reason:
                        for model in grid.models:
                            result.skipped.append({**base, "model": model, "reason": reason})
                        continue
                    y_eval = y_target[:, t + h]
                    n_pos = int(y_eval.sum())
                    if n_pos == 0:
                        for model in grid.models:
                            result.skipped.append({**base, "model": model, "reason": "no positive labels"})
                        continue
                    psi0 = expected_random_ap(y_eval.size, n_pos)
                    cell = {}
                    for model in grid.models:
                        ss = cell_seed(grid.seed, target, model, t, h, w)
                        seed_int = int(ss.generate_state(1)[0])
                        start = time.perf_counter()
                        try:
                            pred, fitted = _predict(model, scores, y_target, labeled, x, feats,
                                                    t, h, w, grid, ss)
                        except _Skip as e:
                            result.skipped.append({**base, "model": model, "reason": str(e)})
                            continue
                        psi = average_precision(pred, y_eval)
                        elapsed = (time.perf_counter() - start) * 1000.0
                        rec = {**base, "model": model, "psi": psi, "lift": psi / psi0,
                               "n_pos": n_pos, "n_eval": int(y_eval.size), "seed": seed_int,
                               "runtime_ms": round(elapsed, 3) if record_timing else None}
                        cell[model] = rec
                        if model == "RF-R" and (h, w) in grid.importance_cells and fitted is not None:
                            importance_acc[(target, h, w)].append(trees.feature_importance(fitted))
                    if grid.random_mode == "sampled" and "Random" in cell:
                        psi_r = cell["Random"]["psi"]
                        for rec in cell.values():
                            rec["lift"] = rec["psi"] / psi_r
                    ref = cell.get(grid.reference_model)
                    for rec in cell.values():
                        rec["delta_vs"] = grid.reference_model
                        rec["delta"] = ratio(ref["lift"], rec["lift"]) if ref else None
                        result.records.append(rec)
            log.info("target %s w=%d done (%d records)", target, w, len(result.records))

    n_channels = x.x.shape[2]
    for key, imps in importance_acc.items():
        result.importances[key] = np.mean(imps, axis=0).reshape(-1, n_channels)
    return result


class _Skip(Exception):
    pass


def _predict(model, scores, y_target, labeled, x, feats, t, h, w, grid, ss):
    n = y_target.shape[0]
    rng = np.random.default_rng(ss)
    if model == "Random":
        return baselines.predict_random(rng, n), None
    if model == "Persist":
        return baselines.predict_persist(y_target, slice(None), t), None
    if model == "Average":
        return baselines.predict_average(scores.s_day, slice(None), t, w), None
    if model == "Trend":
        if w < 2:
            raise _Skip("trend needs w >= 2")
        return baselines.predict_trend(scores.s_day, slice(None), t, w), None

    kind = FEATURE_KIND[model]
    if kind == "handcrafted" and w < 2:
        raise _Skip("handcrafted features need w >= 2")
    if not labeled[t]:
        raise _Skip("training day unlabeled")
    y_train = y_target[:, t]
    if y_train.all() or not y_train.any():
        raise _Skip("single-class training labels")
    X_train = feats(kind, t - h)
    X_test = feats(kind, t)
    seed_int = int(ss.generate_state(1)[0])
    if model == "Tree":
        cfg = trees.TreeConfig(grid.tree_feature_fraction, grid.tree_min_weight_fraction, True, seed_int)
        fitted = trees.fit_tree(X_train, y_train, cfg=cfg, rng=rng)
    else:
        tcfg = trees.TreeConfig(None, grid.forest_min_weight_fraction, True, seed_int)
        fcfg = trees.ForestConfig(grid.n_trees, True, tcfg, seed_int, grid.threads)
        fitted = trees.fit_forest(X_train, y_train, cfg=fcfg)
    return trees.predict_tree(fitted, X_test), fitted


def temporal_stability(result: GridResult, t_splits=None) -> dict:
    """KS test of psi between the earlier and later half of the forecast days,
    for every (target, model, h, w) combination."""
    groups = defaultdict(dict)
    for r in result.records:
        groups[(r["target"], r["model"], r["h"], r["w"])][r["t"]] = r["psi"]
    rows = []
    for key in sorted(groups):
        by_t = groups[key]
        ts = sorted(by_t)
        if t_splits is None:
            half = len(ts) // 2
            first, second = ts[:half], ts[half : 2 * half] if len(ts) % 2 == 0 else ts[half + 1 :]
        else:
            (a0, a1), (b0, b1) = t_splits
            first = [t for t in ts if a0 <= t <= a1]
            second = [t for t in ts if b0 <= t <= b1]
        if len(first) < 2 or len(second) < 2:
            continue
        d, p = ks_two_sample([by_t[t] for t in first], [by_t[t] for t in second])
        rows.append(dict(zip(("target", "model", "h", "w"), key), d=d, p=p,
                         n_first=len(first), n_second=len(second)))
    ps = np.array([r["p"] for r in rows])
    return {
        "rows": rows,
        "n": len(rows),
        "frac_below_0.01": float(np.mean(ps < 0.01)) if rows else float("nan"),
        "frac_below_0.05": float(np.mean(ps < 0.05)) if rows else float("nan"),
    }
