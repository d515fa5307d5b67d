"""Weighted CART classification trees and random forests (Gini criterion)."""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MODEL_MAGIC = b"HSTM"
MODEL_VERSION = 1


@dataclass
class TreeConfig:
    """``min_weight_fraction``: nodes lighter than this share of the root
    weight are not split. ``feature_fraction=None`` means sqrt(p) features."""

    feature_fraction: float | None = 0.8
    min_weight_fraction: float = 0.02
    balanced: bool = True
    seed: int = 0

    def n_split_features(self, p: int) -> int:
        frac = self.feature_fraction
        if frac is None:
            frac = min(1.0, np.sqrt(p) / p)
        if not 0 < frac <= 1:
            raise ValueError("feature_fraction must be in (0, 1]")
        if not 0 < self.min_weight_fraction < 1:
            raise ValueError("min_weight_fraction must be in (0, 1)")
        return max(1, int(frac * p + 1e-9))


@dataclass
class ForestConfig:
    n_trees: int = 100
    bootstrap: bool = True
    tree: TreeConfig = field(
        default_factory=lambda: TreeConfig(feature_fraction=None, min_weight_fraction=0.0002)
    )
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")


@dataclass
class Tree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, 2) class weight totals
    impurity_decrease: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def leaf_probability(self) -> np.ndarray:
        tot = self.value.sum(axis=1)
        return np.divide(self.value[:, 1], tot, out=np.zeros_like(tot), where=tot > 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])


@dataclass
class TrainedModel:
    kind: str
    trees: list[Tree]
    n_features: int

    @property
    def importances(self) -> np.ndarray:
        return feature_importance(self)


def balanced_weights(labels) -> np.ndarray:
    """Per-sample weights proportional to the inverse class frequency,
    scaled so that they sum to the number of samples."""
    y = np.asarray(labels).astype(bool)
    n = y.size
    n1 = int(y.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("balanced weights need both classes present")
    return np.where(y, n / (2.0 * n1), n / (2.0 * n0))


def _best_split(Xs: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Best (column, threshold, gain) over the columns of ``Xs``, or None.

    Gain is the drop in weighted Gini impurity, ``W*gini(parent) - sum W_c*gini(c)``.
    Ties resolve to the lowest column, then the lowest threshold.
    """
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    w1 = (w * y)[order]
    w0 = (w * (1.0 - y))[order]
    L1 = np.cumsum(w1, axis=0)[:-1]
    L0 = np.cumsum(w0, axis=0)[:-1]
    T1, T0 = w1[:, 0].sum(), w0[:, 0].sum()
    R1, R0 = T1 - L1, T0 - L0
    WL, WR = L1 + L0, R1 + R0
    valid = (xs[1:] > xs[:-1]) & (WL > 0) & (WR > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (L1 * L1 + L0 * L0) / WL + (R1 * R1 + R0 * R0) / WR
    q = np.where(valid, q, -np.inf)
    pos = np.argmax(q, axis=0)
    per_col = q[pos, np.arange(q.shape[1])]
    col = int(np.argmax(per_col))
    W = T1 + T0
    gain = float(per_col[col] - (T1 * T1 + T0 * T0) / W)
    if not np.isfinite(gain) or gain <= 1e-12 * W:
        return None
    s = pos[col]
    lo, hi = xs[s, col], xs[s + 1, col]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return col, float(thr), gain


def fit_tree(X, y, weights=None, cfg: TreeConfig | None = None, rng=None) -> TrainedModel:
    cfg = cfg or TreeConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty training set")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must have one entry per sample")
    if weights is None:
        weights = balanced_weights(y) if cfg.balanced and 0 < y.sum() < y.size else np.ones(y.size)
    w = np.asarray(weights, dtype=np.float64)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    tree = _grow(X, y, w, cfg, rng)
    return TrainedModel("Tree", [tree], X.shape[1])


def _grow(X, y, w, cfg: TreeConfig, rng) -> Tree:
    n, p = X.shape
    k = cfg.n_split_features(p)
    min_weight = cfg.min_weight_fraction * w.sum()
    feature, threshold, left, right, value, decrease = [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                       (value, (0.0, 0.0)), (decrease, 0.0)):
            lst.append(v)
        return len(feature) - 1

    stack = [(new_node(), np.arange(n))]
    while stack:
        nid, idx = stack.pop()
        wn, yn = w[idx], y[idx]
        c1 = float(np.sum(wn * yn))
        c0 = float(np.sum(wn)) - c1
        value[nid] = (c0, c1)
        if idx.size < 2 or c0 <= 0 or c1 <= 0 or c0 + c1 < min_weight:
            continue
        cols = np.arange(p) if k == p else np.sort(rng.choice(p, size=k, replace=False))
        found = _best_split(X[np.ix_(idx, cols)], yn, wn)
        if found is None:
            continue
        col, thr, gain = found
        f = int(cols[col])
        go_left = X[idx, f] <= thr
        lid, rid = new_node(), new_node()
        feature[nid], threshold[nid], left[nid], right[nid], decrease[nid] = f, thr, lid, rid, gain
        stack.append((rid, idx[~go_left]))
        stack.append((lid, idx[go_left]))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64).reshape(-1, 2),
        impurity_decrease=np.array(decrease, dtype=np.float64),
    )


def predict_tree(model: TrainedModel, X) -> np.ndarray | float:
    """Probability of class 1 (weighted leaf fraction), averaged over trees."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    probs = np.zeros(X2.shape[0])
    for tree in model.trees:
        probs += tree.leaf_probability()[tree.apply(X2)]
    probs /= len(model.trees)
    return float(probs[0]) if single else probs


predict_forest = predict_tree


def fit_forest(X, y, weights=None, cfg: ForestConfig | None = None) -> TrainedModel:
    """Bagged trees; tree ``b`` draws from its own child seed so results do not
    depend on the thread count."""
    cfg = cfg or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty training set")
    if weights is None:
        tc = cfg.tree
        weights = balanced_weights(y) if tc.balanced and 0 < y.sum() < y.size else np.ones(y.size)
    w = np.asarray(weights, dtype=np.float64)
    n = X.shape[0]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)

    def one(seed):
        rng = np.random.default_rng(seed)
        if cfg.bootstrap:
            counts = rng.multinomial(n, np.full(n, 1.0 / n))
            idx = np.flatnonzero(counts)
            return _grow(X[idx], y[idx], w[idx] * counts[idx], cfg.tree, rng)
        return _grow(X, y, w, cfg.tree, rng)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            trees = list(pool.map(one, seeds))
    else:
        trees = [one(s) for s in seeds]
    return TrainedModel("Forest", trees, X.shape[1])


def feature_importance(model: TrainedModel) -> np.ndarray:
    """Impurity decrease per feature summed over all trees, normalised to 1.

    A model without a single split has no importance to share and returns zeros.
    """
    imp = np.zeros(model.n_features)
    for tree in model.trees:
        inner = tree.feature >= 0
        np.add.at(imp, tree.feature[inner], tree.impurity_decrease[inner])
    total = imp.sum()
    return imp / total if total > 0 else imp


def save_model(model: TrainedModel, path):
    """Little-endian binary: magic ``HSTM``, uint16 version, uint16 kind length,
    UTF-8 kind, uint32 n_features, uint32 n_trees, then per tree uint32 n_nodes
    followed by int32 feature, float64 threshold, int32 left, int32 right,
    float64 value (n_nodes x 2) and float64 impurity decrease arrays."""
    kind = model.kind.encode()
    with open(Path(path), "wb") as f:
        f.write(MODEL_MAGIC + struct.pack("<HH", MODEL_VERSION, len(kind)) + kind)
        f.write(struct.pack("<II", model.n_features, len(model.trees)))
        for t in model.trees:
            f.write(struct.pack("<I", t.n_nodes))
            f.write(t.feature.astype("<i4").tobytes())
            f.write(t.threshold.astype("<f8").tobytes())
            f.write(t.left.astype("<i4").tobytes())
            f.write(t.right.astype("<i4").tobytes())
            f.write(np.ascontiguousarray(t.value, dtype="<f8").tobytes())
            f.write(t.impurity_decrease.astype("<f8").tobytes())


def load_model(path) -> TrainedModel:
    buf = Path(path).read_bytes()
    if buf[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file")
    version, klen = struct.unpack_from("<HH", buf, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model file version {version}")
    off = 8
    kind = buf[off : off + klen].decode()
    off += klen
    n_features, n_trees = struct.unpack_from("<II", buf, off)
    off += 8

    def take(dtype, count):
        nonlocal off
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off)
        off += arr.itemsize * count
        return arr

    trees = []
    for _ in range(n_trees):
        (n,) = struct.unpack_from("<I", buf, off)
        off += 4
        trees.append(
            Tree(
                feature=take("<i4", n).astype(np.int64),
                threshold=take("<f8", n).astype(np.float64),
                left=take("<i4", n).astype(np.int64),
                right=take("<i4", n).astype(np.int64),
                value=take("<f8", 2 * n).astype(np.float64).reshape(n, 2),
                impurity_decrease=take("<f8", n).astype(np.float64),
            )
        )
    return TrainedModel(kind, trees, n_features)
