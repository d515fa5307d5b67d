"""Sector filtering and denoising-autoencoder imputation of missing KPIs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import AutoencoderSpec, DenseNetwork, RMSprop, masked_mse
from .core import HOURS_PER_WEEK, KpiDataset

log = logging.getLogger(__name__)


def filter_sectors(data: KpiDataset) -> tuple[KpiDataset, list[int]]:
    """Drop sectors with more than half of the entries missing in any
    168-hour window (all window offsets are checked)."""
    n, m, l = data.kpi.shape
    if m % HOURS_PER_WEEK:
        raise ValueError("m_hours must be a multiple of 168")
    per_hour = data.missing_mask.sum(axis=2)
    csum = np.zeros((n, m + 1), dtype=np.int64)
    np.cumsum(per_hour, axis=1, out=csum[:, 1:])
    window = csum[:, HOURS_PER_WEEK:] - csum[:, :-HOURS_PER_WEEK]
    drop = (2 * window > HOURS_PER_WEEK * l).any(axis=1)
    discarded = [int(s) for s in data.sector_ids[drop]]
    if discarded:
        log.info("discarding %d of %d sectors for >50%% missing weeks", len(discarded), n)
    return data.select_sectors(~drop), discarded


@dataclass
class NormalizationState:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.constant is None:
            self.constant = np.zeros(self.mean.shape, dtype=bool)
        self.constant = np.asarray(self.constant, dtype=bool)

    @classmethod
    def fit(cls, kpi: np.ndarray, missing: np.ndarray) -> "NormalizationState":
        l = kpi.shape[-1]
        mean, std = np.zeros(l), np.ones(l)
        constant = np.zeros(l, dtype=bool)
        for k in range(l):
            vals = kpi[..., k][~missing[..., k]]
            if vals.size == 0:
                constant[k] = True
                continue
            mean[k] = vals.mean()
            s = vals.std()
            if s > 0:
                std[k] = s
            else:
                constant[k] = True
        if constant.any():
            log.warning("constant KPIs normalised with std=1: %s", np.flatnonzero(constant).tolist())
        return cls(mean, std, constant)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean


def carry_forward(values: np.ndarray, missing: np.ndarray, fill_empty: float | None = 0.0):
    """Replace missing entries along axis -2 (time) by the previous observed
    sample; leading gaps take the first observed sample. Columns with no
    observation are set to ``fill_empty`` or raise when it is None."""
    values = np.asarray(values, dtype=np.float64)
    missing = np.asarray(missing, dtype=bool)
    t = values.shape[-2]
    idx = np.arange(t).reshape((t, 1))
    fwd = np.where(missing, -1, idx)
    fwd = np.maximum.accumulate(fwd, axis=-2)
    bwd = np.where(missing, t, idx)
    bwd = np.flip(np.minimum.accumulate(np.flip(bwd, axis=-2), axis=-2), axis=-2)
    src = np.where(fwd >= 0, fwd, bwd)
    empty = src >= t
    if empty.any() and fill_empty is None:
        raise ValueError("a KPI column has no observed value in the slice")
    out = np.take_along_axis(values, np.minimum(src, t - 1), axis=-2)
    if empty.any():
        out = np.where(empty, fill_empty, out)
    return out


def corrupt_slice(
    slice_: np.ndarray,
    missing: np.ndarray,
    rng: np.random.Generator,
    fraction: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Carry-forward fill of a (hours, KPIs) slice plus training corruption.

    Exactly ``floor(fraction * observed)`` observed entries are drawn at random
    and treated as missing before the fill. Returns the corrupted slice and the
    loss mask (entries observed originally).
    """
    slice_ = np.asarray(slice_, dtype=np.float64)
    missing = np.asarray(missing, dtype=bool)
    if slice_.ndim != 2 or missing.shape != slice_.shape:
        raise ValueError("slice and mask must be matching (hours, KPIs) matrices")
    if missing.all(axis=0).any():
        raise ValueError("a KPI column is entirely missing")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    observed = np.flatnonzero(~missing.ravel())
    n_corrupt = int(np.floor(fraction * observed.size))
    hidden = missing.copy()
    if n_corrupt:
        pick = rng.choice(observed, size=n_corrupt, replace=False)
        hidden.ravel()[pick] = True
    return carry_forward(slice_, hidden, fill_empty=0.0), ~missing


def week_slices(x: np.ndarray) -> np.ndarray:
    """(n, m_hours, l) -> (n, m_weeks, 168, l) view aligned to week boundaries."""
    n, m, l = x.shape
    return x.reshape(n, m // HOURS_PER_WEEK, HOURS_PER_WEEK, l)


@dataclass
class TrainedImputer:
    network: DenseNetwork
    normalization: NormalizationState
    loss_trace: list[float]
    spec: AutoencoderSpec


def train_autoencoder(
    data: KpiDataset,
    spec: AutoencoderSpec | None = None,
    rng: np.random.Generator | None = None,
) -> TrainedImputer:
    """Fit the denoising autoencoder on random week slices of ``data``.

    Each epoch runs ``n * m_weeks // batch_size`` RMSprop steps (at least one).
    The loss is the masked MSE against the originally observed z-scores.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    n, m, l = data.kpi.shape
    spec = spec or AutoencoderSpec.for_kpis(l)
    if spec.input_width != HOURS_PER_WEEK * l:
        raise ValueError(f"spec input_width {spec.input_width} != 168 * {l}")
    dtype = np.dtype(spec.dtype)
    norm = NormalizationState.fit(data.kpi, data.missing_mask)
    z = week_slices(np.where(data.missing_mask, 0.0, norm.normalize(data.kpi)))
    miss = week_slices(data.missing_mask)
    m_weeks = z.shape[1]

    net = DenseNetwork.initialize(spec.widths, rng, spec.initial_slope, dtype=dtype)
    opt = RMSprop(spec.learning_rate, spec.rmsprop_smoothing, spec.rmsprop_eps)
    batches = max(1, (n * m_weeks) // spec.batch_size)
    trace: list[float] = []
    for epoch in range(spec.epochs):
        for b in range(batches):
            si = rng.integers(0, n, size=spec.batch_size)
            wj = rng.integers(0, m_weeks, size=spec.batch_size)
            target, missing = z[si, wj], miss[si, wj]
            frac = rng.uniform(0.0, spec.max_corruption, size=(spec.batch_size, 1, 1))
            hidden = missing | (rng.random(missing.shape) < frac)
            inp = carry_forward(target, hidden).reshape(spec.batch_size, -1).astype(dtype)
            out, cache = net.forward(inp, return_cache=True)
            loss, grad = masked_mse(out, target.reshape(spec.batch_size, -1).astype(dtype),
                                    ~missing.reshape(spec.batch_size, -1))
            if not np.isfinite(loss):
                raise FloatingPointError(f"loss diverged at epoch {epoch}, batch {b}")
            opt.step(net.parameters(), net.backward(cache, grad))
            trace.append(loss)
        log.debug("epoch %d loss %.5f", epoch, np.mean(trace[-batches:]))
    return TrainedImputer(net, norm, trace, spec)


def reconstruct(data: KpiDataset, model: TrainedImputer, chunk: int = 256) -> np.ndarray:
    """Autoencoder reconstruction (original units) of every week slice."""
    n, m, l = data.kpi.shape
    norm = model.normalization
    z = week_slices(np.where(data.missing_mask, 0.0, norm.normalize(data.kpi)))
    miss = week_slices(data.missing_mask)
    flat_z = z.reshape(-1, HOURS_PER_WEEK, l)
    flat_m = miss.reshape(-1, HOURS_PER_WEEK, l)
    out = np.empty(flat_z.shape)
    dtype = model.network.weights[0].dtype
    for a in range(0, flat_z.shape[0], chunk):
        inp = carry_forward(flat_z[a : a + chunk], flat_m[a : a + chunk])
        rec = model.network.forward(inp.reshape(inp.shape[0], -1).astype(dtype))
        out[a : a + chunk] = rec.reshape(-1, HOURS_PER_WEEK, l)
    return norm.denormalize(out.reshape(n, m, l))


def impute_missing(data: KpiDataset, model: TrainedImputer) -> KpiDataset:
    """Fill missing entries with reconstructions; observed entries are untouched."""
    if not data.missing_mask.any():
        return data.replace(kpi=data.kpi.copy())
    rec = reconstruct(data, model)
    kpi = np.where(data.missing_mask, rec, data.kpi)
    return data.replace(kpi=kpi, missing_mask=np.zeros_like(data.missing_mask))


def carry_forward_impute(data: KpiDataset) -> KpiDataset:
    """Baseline imputation by carry-forward within each week slice."""
    kpi = week_slices(np.where(data.missing_mask, 0.0, data.kpi))
    filled = carry_forward(kpi, week_slices(data.missing_mask), fill_empty=0.0)
    filled = filled.reshape(data.kpi.shape)
    kpi = np.where(data.missing_mask, filled, data.kpi)
    return data.replace(kpi=kpi, missing_mask=np.zeros_like(data.missing_mask))
