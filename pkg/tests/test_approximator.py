import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbpricer import approximator as ann
from cbpricer.validation import gradient_check


def cfg(**kw):
    kw.setdefault("input_dim", 5)
    return ann.NetworkConfig(**kw)


@pytest.fixture(scope="module")
def unit_box():
    return np.random.default_rng(0).uniform(0.0, 1.0, (10_000, 5))


def test_default_architecture_shapes():
    net = ann.init(cfg())
    assert [w.shape for w in net.weights] == [(64, 5), (64, 64), (64, 64), (1, 64)]
    assert [b.shape for b in net.biases] == [(64,), (64,), (64,), (1,)]
    assert net.n_params == 64 * 5 + 64 + 2 * (64 * 64 + 64) + 64 + 1


def test_heston_input_width():
    assert ann.init(cfg(input_dim=6)).weights[0].shape == (64, 6)


@pytest.mark.parametrize("kw", [{"input_dim": 0}, {"hidden_width": 0}, {"batch_size": 0},
                                {"epochs": 0}, {"learning_rate": 0.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        cfg(**kw)


def test_init_is_deterministic_and_seed_dependent():
    a, b, c = ann.init(cfg(init_seed=3)), ann.init(cfg(init_seed=3)), ann.init(cfg(init_seed=4))
    assert np.array_equal(a.theta, b.theta)
    assert not np.array_equal(a.theta, c.theta)


def test_init_respects_he_uniform_bounds():
    net = ann.init(cfg())
    for w in net.weights:
        assert np.max(np.abs(w)) <= np.sqrt(6.0 / w.shape[1])
    assert all(np.all(b == 0) for b in net.biases)


def test_zero_network_outputs_output_bias():
    net = ann.init(cfg(), zero=True)
    net.biases[-1][0] = 3.25
    x = np.random.default_rng(1).normal(size=(20, 5))
    np.testing.assert_array_equal(ann.forward(net, x), 3.25)


def test_single_unit_chain_is_relu():
    net = ann.init(cfg(input_dim=1, hidden_layers=1, hidden_width=1, dtype="float64"), zero=True)
    net.weights[0][...] = 1.0
    net.weights[1][...] = 1.0
    for x in (-2.0, -0.1, 0.0, 0.5, 3.0):
        assert ann.forward(net, [x]) == max(x, 0.0)


def test_forward_single_vector_returns_float():
    net = ann.init(cfg())
    out = ann.forward(net, np.ones(5))
    assert isinstance(out, float)
    assert out == pytest.approx(ann.forward(net, np.ones((1, 5)))[0])


def test_dimension_mismatch_rejected():
    net = ann.init(cfg())
    with pytest.raises(ValueError):
        ann.forward(net, np.ones(4))


def test_forward_continuity():
    net = ann.init(cfg(dtype="float64"))
    x = np.random.default_rng(2).uniform(size=5)
    gaps = [abs(ann.forward(net, x) - ann.forward(net, x + d)) for d in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_backprop_matches_central_differences(seed):
    assert gradient_check(seed=seed, input_dim=5, width=4, eps=1e-5) < 1e-4


def test_single_adam_step_oracle():
    net = ann.init(cfg(dtype="float64", learning_rate=1e-3))
    before = net.theta.copy()
    g = np.random.default_rng(3).normal(size=net.n_params)
    ann.adam_step(net, g)
    # fresh moments: bias-corrected m = g and v = g^2
    expected = before - 1e-3 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(net.theta, expected, rtol=1e-12, atol=1e-15)
    assert net.adam_t == 1


def test_constant_targets_zero_initialised_network(unit_box):
    net = ann.init(cfg(), zero=True)
    ann.fit(net, unit_box, np.full(len(unit_box), 7.0))
    pred = ann.forward(net, unit_box)
    assert np.max(np.abs(pred - 7.0)) < 0.05


def test_constant_targets_he_initialised_network(unit_box):
    net = ann.init(cfg())
    net.y_shift = 7.0
    ann.fit(net, unit_box, np.full(len(unit_box), 7.0))
    err = ann.forward(net, unit_box) - 7.0
    assert abs(err.mean()) < 1e-6
    # eight epochs of Adam at 1e-3 leave some of the initial ripple
    assert np.mean(np.abs(err)) < 0.05
    assert np.max(np.abs(err)) < 0.25


def test_noiseless_linear_targets(unit_box):
    y = 1.0 + unit_box.mean(axis=1)
    net = ann.init(cfg())
    net.y_shift, net.y_scale = float(y.mean()), float(y.std())
    report = ann.fit(net, unit_box, y)
    assert report.final_loss < 1e-3
    assert report.n_updates == 8 * 20
    assert len(report.loss_curve) == 8


def test_linear_targets_relative_error(unit_box):
    y = 1.0 + 2.0 * unit_box[:, 0] - unit_box[:, 1] + 0.5 * unit_box[:, 2]
    net = ann.init(cfg())
    net.y_shift, net.y_scale = float(y.mean()), float(y.std())
    report = ann.fit(net, unit_box, y)
    assert report.final_loss < 1e-2 * y.var()


def test_training_is_bit_reproducible(unit_box):
    y = np.sin(unit_box.sum(axis=1))
    runs = []
    for _ in range(2):
        net = ann.init(cfg(init_seed=5, epochs=2))
        rep = ann.fit(net, unit_box[:2000], y[:2000], shuffle_seed=9)
        runs.append((net.theta.copy(), rep.loss_curve))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]


def test_small_sets_train_as_one_batch():
    x = np.random.default_rng(0).uniform(size=(100, 5))
    report = ann.fit(ann.init(cfg(epochs=3)), x, x[:, 0])
    assert report.n_updates == 3


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_targets_rejected(bad):
    x = np.zeros((10, 5))
    y = np.zeros(10)
    y[4] = bad
    with pytest.raises(ValueError):
        ann.fit(ann.init(cfg()), x, y)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        ann.fit(ann.init(cfg()), np.zeros((10, 5)), np.zeros(9))


def test_divergence_raises():
    x = np.random.default_rng(0).uniform(size=(64, 5))
    net = ann.init(cfg(learning_rate=1e30, epochs=5, dtype="float64"))
    with np.errstate(all="ignore"), pytest.raises(FloatingPointError):
        ann.fit(net, x, 1e300 * np.ones(64))


def test_snapshot_round_trip(tmp_path):
    net = ann.init(cfg(init_seed=8))
    net.y_shift, net.y_scale = 101.5, 12.25
    path = tmp_path / "net.csv"
    net.save_csv(path)
    back = ann.Network.load_csv(path, net.config)
    assert np.array_equal(back.theta, net.theta)
    assert (back.y_shift, back.y_scale) == (101.5, 12.25)


def test_copy_is_independent():
    net = ann.init(cfg())
    twin = net.copy()
    twin.theta[0] += 1.0
    assert twin.theta[0] != net.theta[0]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), x=st.lists(st.floats(-5, 5), min_size=5, max_size=5))
def test_forward_is_positively_homogeneous_without_biases(seed, x):
    # a bias-free ReLU network satisfies f(c x) = c f(x) for c > 0
    net = ann.init(cfg(init_seed=seed, dtype="float64"))
    x = np.asarray(x)
    assert ann.forward(net, 2.0 * x) == pytest.approx(2.0 * ann.forward(net, x), rel=1e-9, abs=1e-12)
