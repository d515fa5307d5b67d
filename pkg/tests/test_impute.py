import datetime as dt

import numpy as np
import pytest

from hotspot import autoencoder as ae
from hotspot import core, impute
from hotspot.autoencoder import AutoencoderSpec, DenseNetwork
from oracles import max_gradient_error


def dataset(kpi, missing=None):
    kpi = np.asarray(kpi, dtype=float)
    n, m, l = kpi.shape
    missing = np.zeros(kpi.shape, bool) if missing is None else missing
    kpi = np.where(missing, np.nan, kpi)
    start = dt.datetime(2015, 11, 30)
    return core.KpiDataset(kpi, missing, np.zeros((n, 2)), core.build_calendar(start, m), start)


def test_filter_sectors_boundaries():
    n, m, l = 3, 168 * 4, 2
    miss = np.zeros((n, m, l), bool)
    miss[0, 2 * 168 : 2 * 168 + int(0.6 * 168)] = True          # 60% of week 3
    for w in range(4):                                           # exactly half of every week
        miss[2, w * 168 : w * 168 + 84] = True
    out, dropped = impute.filter_sectors(dataset(np.ones((n, m, l)), miss))
    assert dropped == [0]
    assert out.sector_ids.tolist() == [1, 2]


def test_filter_requires_whole_weeks():
    data = dataset(np.ones((1, 168, 1)))
    object.__setattr__(data, "kpi", np.ones((1, 170, 1)))
    object.__setattr__(data, "missing_mask", np.zeros((1, 170, 1), bool))
    with pytest.raises(ValueError):
        impute.filter_sectors(data)


def test_carry_forward_by_hand():
    v = np.array([[1.0], [0.0], [0.0], [4.0]])
    m = np.array([[False], [True], [True], [False]])
    assert impute.carry_forward(v, m).ravel().tolist() == [1, 1, 1, 4]
    lead = np.array([[True], [False], [True], [False]])
    assert impute.carry_forward(np.array([[9.0], [2.0], [7.0], [3.0]]), lead).ravel().tolist() == [2, 2, 2, 3]
    assert impute.carry_forward(v, np.ones_like(m), fill_empty=0.0).ravel().tolist() == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        impute.carry_forward(v, np.ones_like(m), fill_empty=None)


def test_corrupt_slice_identity_and_counts(rng):
    s = rng.normal(size=(168, 3))
    miss = np.zeros(s.shape, bool)
    out, loss_mask = impute.corrupt_slice(s, miss, rng, 0.0)
    np.testing.assert_array_equal(out, s)
    assert loss_mask.all()
    miss[5:9, 1] = True
    out, loss_mask = impute.corrupt_slice(s, miss, rng, 0.5)
    observed = int((~miss).sum())
    changed = int(((out != s) & ~miss).sum())
    assert changed <= observed // 2
    np.testing.assert_array_equal(loss_mask, ~miss)
    with pytest.raises(ValueError):
        bad = miss.copy()
        bad[:, 0] = True
        impute.corrupt_slice(s, bad, rng, 0.2)


def test_corrupt_slice_substitutes_exactly_floor_half():
    # strictly increasing positive columns: any substituted entry changes value
    s = np.tile(np.arange(1.0, 169.0)[:, None], (1, 3)) * np.array([1.0, 2.0, 3.0])
    miss = np.zeros(s.shape, bool)
    miss[10:20, 0] = True
    observed = int((~miss).sum())
    for seed in range(5):
        out, _ = impute.corrupt_slice(s, miss, np.random.default_rng(seed), 0.5)
        assert int(((out != s) & ~miss).sum()) == observed // 2


def test_normalization_round_trip(rng):
    kpi = rng.normal(3, 2, size=(5, 168, 4))
    kpi[..., 2] = 7.0
    miss = rng.random(kpi.shape) < 0.1
    st = impute.NormalizationState.fit(kpi, miss)
    assert st.constant.tolist() == [False, False, True, False]
    assert np.all(st.std > 0)
    back = st.denormalize(st.normalize(kpi))
    np.testing.assert_allclose(back, kpi, atol=1e-10)


def test_widths_mirror():
    spec = AutoencoderSpec.for_kpis(21)
    assert spec.widths == [3528, 1764, 882, 441, 220, 441, 882, 1764, 3528]
    with pytest.raises(ValueError):
        AutoencoderSpec(input_width=4, n_encoder_layers=4).widths


def test_zero_network_outputs_zero(rng):
    net = DenseNetwork.initialize([8, 4, 8], rng)
    for w in net.weights:
        w[:] = 0
    assert not net.forward(rng.normal(size=8)).any()


def test_prelu_slope_one_is_linear(rng):
    net = DenseNetwork.initialize([6, 5, 4, 6], rng, initial_slope=1.0)
    x = rng.normal(size=(3, 6))
    lin = x
    for w, b in zip(net.weights, net.biases):
        lin = lin @ w + b
    np.testing.assert_allclose(net.forward(x), lin, atol=1e-12)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    net = DenseNetwork.initialize([8, 4, 2, 4, 8], rng, dtype="float64")
    net.slopes[:] = rng.uniform(0.1, 0.5, size=net.slopes.shape)
    x = rng.normal(size=(5, 8))
    mask = rng.random((5, 8)) < 0.8
    assert max_gradient_error(net, x, rng.normal(size=(5, 8)), mask) < 1e-4


def test_forward_aborts_on_non_finite(rng):
    net = DenseNetwork.initialize([4, 2, 4], rng)
    net.weights[0][:] = np.inf
    with pytest.raises(FloatingPointError):
        net.forward(np.ones(4))


def test_rmsprop_zero_gradient_and_zero_rate(rng):
    net = DenseNetwork.initialize([4, 2, 4], rng)
    before = [p.copy() for p in net.parameters()]
    ae.RMSprop(1e-3).step(net.parameters(), [np.zeros_like(p) for p in net.parameters()])
    ae.RMSprop(0.0).step(net.parameters(), [np.ones_like(p) for p in net.parameters()])
    for a, b in zip(before, net.parameters()):
        np.testing.assert_array_equal(a, b)


def test_network_file_round_trip(tmp_path, rng):
    net = DenseNetwork.initialize([12, 6, 3, 6, 12], rng, dtype="float64")
    ae.save_network(net, tmp_path / "n.bin", {"mean": np.arange(3.0)})
    back, extra = ae.load_network(tmp_path / "n.bin")
    assert back.widths == net.widths
    for a, b in zip(back.parameters(), net.parameters()):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(extra["mean"], np.arange(3.0))
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        ae.load_network(tmp_path / "bad.bin")


def small_training_set(rng, n=8, weeks=2, l=2, missing_rate=0.05):
    hours = np.arange(168 * weeks)
    base = np.sin(2 * np.pi * hours / 24)[None, :, None] * np.arange(1, l + 1)
    kpi = base + 0.05 * rng.normal(size=(n, hours.size, l))
    miss = rng.random(kpi.shape) < missing_rate
    return dataset(kpi, miss)


def test_training_trace_length_and_decrease(rng):
    data = small_training_set(rng)
    spec = AutoencoderSpec.for_kpis(2, n_encoder_layers=2, batch_size=4, epochs=30,
                                    learning_rate=1e-3, dtype="float64")
    model = impute.train_autoencoder(data, spec, rng)
    batches = max(1, 8 * 2 // 4)
    assert len(model.loss_trace) == 30 * batches
    assert np.mean(model.loss_trace[-batches:]) < np.mean(model.loss_trace[:batches])


def test_zero_learning_rate_leaves_parameters(rng):
    data = small_training_set(rng)
    spec = AutoencoderSpec.for_kpis(2, n_encoder_layers=1, batch_size=4, epochs=1, learning_rate=0.0)
    init = DenseNetwork.initialize(spec.widths, np.random.default_rng(11), spec.initial_slope, spec.dtype)
    model = impute.train_autoencoder(data, spec, np.random.default_rng(11))
    for a, b in zip(init.parameters(), model.network.parameters()):
        np.testing.assert_array_equal(a, b)


def test_impute_only_touches_missing_entries(rng):
    data = small_training_set(rng)
    spec = AutoencoderSpec.for_kpis(2, n_encoder_layers=1, batch_size=4, epochs=1)
    model = impute.train_autoencoder(data, spec, rng)
    out = impute.impute_missing(data, model)
    obs = ~data.missing_mask
    assert out.kpi[obs].tobytes() == data.kpi[obs].tobytes()
    assert not out.missing_mask.any()
    assert np.isfinite(out.kpi).all()

    complete = dataset(np.nan_to_num(data.kpi))
    same = impute.impute_missing(complete, model)
    assert same.kpi.tobytes() == complete.kpi.tobytes()

    one = np.zeros(complete.kpi.shape, bool)
    one[2, 50, 1] = True
    single = impute.impute_missing(dataset(complete.kpi, one), model)
    diff = single.kpi != complete.kpi
    assert diff.sum() <= 1 and not diff[~one].any()


def test_carry_forward_impute_baseline(rng):
    data = small_training_set(rng)
    out = impute.carry_forward_impute(data)
    assert not out.missing_mask.any()
    obs = ~data.missing_mask
    assert out.kpi[obs].tobytes() == data.kpi[obs].tobytes()
