import math

import numpy as np
import pytest

from cbpricer.dynamics import (
    CEV_FLOOR,
    GridSpec,
    ModelSpec,
    draw_normals,
    simulate,
    simulate_cev,
    simulate_gbm,
    simulate_heston,
)

R = 0.016
S0 = 6.4
GBM = ModelSpec.gbm(0.30)
CEV = ModelSpec.cev(0.35, 0.90)
HESTON = ModelSpec.heston(0.09, 2.0, 0.09, 0.45, -0.5)


@pytest.fixture(scope="module")
def big_grid():
    return GridSpec(52, 6.0, 12_000, seed=11)


@pytest.fixture(scope="module")
def gbm_paths(big_grid):
    return simulate(S0, GBM, big_grid, R)


def test_grid_geometry():
    g = GridSpec(52, 6.0, 10)
    assert g.n_steps == 312
    assert g.h == pytest.approx(6.0 / 312)
    assert g.times[-1] == pytest.approx(6.0)


@pytest.mark.parametrize("kw", [
    {"kind": "gbm", "sigma": -0.1},
    {"kind": "gbm"},
    {"kind": "cev", "sigma": 0.3, "gamma": 0.0},
    {"kind": "heston", "v0": 0.09, "kappa": 2.0, "theta": 0.09, "eta": 0.45, "rho": 1.5},
    {"kind": "sabr", "sigma": 0.3},
])
def test_model_validation(kw):
    with pytest.raises(ValueError):
        ModelSpec(**kw)


@pytest.mark.parametrize("model", [GBM, CEV, HESTON])
def test_nonpositive_spot_rejected(model):
    with pytest.raises(ValueError):
        simulate(0.0, model, GridSpec(12, 1.0, 4), R)


def test_gbm_zero_vol_is_deterministic_drift():
    grid = GridSpec(52, 6.0, 5)
    paths = simulate_gbm(S0, ModelSpec.gbm(0.0), grid, R)
    np.testing.assert_allclose(paths.stock[:, -1], S0 * math.exp(R * 6.0), rtol=1e-12)


def test_gbm_discounted_terminal_mean(gbm_paths):
    disc = gbm_paths.stock[:, -1] * math.exp(-R * 6.0)
    se = disc.std(ddof=1) / math.sqrt(disc.size)
    assert abs(disc.mean() - S0) < 3 * se


def test_gbm_log_variance(gbm_paths):
    logret = np.log(gbm_paths.stock[:, -1] / S0)
    expected = 0.30 ** 2 * 6.0
    se = expected * math.sqrt(2.0 / (logret.size - 1))
    assert abs(logret.var(ddof=1) - expected) < 3 * se


def test_cev_with_unit_elasticity_is_euler_gbm():
    grid = GridSpec(52, 2.0, 50, seed=3)
    z = draw_normals(grid)[0]
    cev = simulate_cev(S0, ModelSpec.cev(0.3, 1.0), grid, R, normals=z)
    s = np.full(grid.n_paths, S0)
    for i in range(grid.n_steps):
        s = s * (1.0 + R * grid.h + 0.3 * math.sqrt(grid.h) * z[:, i])
        s = np.maximum(s, CEV_FLOOR)
    np.testing.assert_allclose(cev.stock[:, -1], s, rtol=1e-12)


def test_cev_zero_vol_is_compounded_euler_drift():
    grid = GridSpec(52, 6.0, 3)
    paths = simulate_cev(S0, ModelSpec.cev(0.0, 0.9), grid, R)
    np.testing.assert_allclose(paths.stock[:, -1], S0 * (1 + R * grid.h) ** grid.n_steps, rtol=1e-12)


def test_cev_discounted_terminal_mean(big_grid):
    paths = simulate(S0, CEV, big_grid, R)
    disc = paths.stock[:, -1] * math.exp(-R * 6.0)
    se = disc.std(ddof=1) / math.sqrt(disc.size)
    assert abs(disc.mean() - S0) < 3 * se
    assert np.all(paths.stock >= CEV_FLOOR)


def test_cev_floor_absorbs_crashes():
    grid = GridSpec(12, 1.0, 1)
    z = np.full((1, 12), -50.0)
    paths = simulate_cev(1.0, ModelSpec.cev(1.0, 0.5), grid, R, normals=z)
    assert paths.stock[0, -1] == pytest.approx(CEV_FLOOR, abs=1e-9)
    assert np.all(paths.stock > 0)


def test_degenerate_heston_matches_gbm():
    grid = GridSpec(52, 3.0, 40, seed=5)
    heston = simulate_heston(S0, ModelSpec.heston(0.09, 2.0, 0.09, 0.0, -0.5), grid, R)
    gbm = simulate_gbm(S0, ModelSpec.gbm(0.3), grid, R)
    np.testing.assert_allclose(heston.variance, 0.09, rtol=1e-12)
    np.testing.assert_allclose(heston.stock, gbm.stock, rtol=1e-11)


def test_heston_independent_factors_uncorrelated():
    n = 12_000
    grid = GridSpec(52, 1.0, n, seed=2)
    paths = simulate_heston(S0, ModelSpec.heston(0.09, 2.0, 0.09, 0.45, 0.0), grid, R)
    ds = np.log(paths.stock[:, 1] / S0)
    dv = paths.variance[:, 1] - 0.09
    corr = np.corrcoef(ds, dv)[0, 1]
    assert abs(corr) < 3 / math.sqrt(n)


def test_heston_variance_mean_reverts_to_cir_mean(big_grid):
    paths = simulate(S0, HESTON, big_grid, R)
    v_t = paths.variance[:, -1]
    expected = 0.09 + (0.09 - 0.09) * math.exp(-2.0 * 6.0)
    assert abs(v_t.mean() - expected) < 3 * v_t.std(ddof=1) / math.sqrt(v_t.size)
    assert np.all(paths.variance >= 0.0)


def test_heston_variance_nonnegative_under_violent_vol_of_vol():
    grid = GridSpec(52, 6.0, 2000, seed=9)
    paths = simulate_heston(S0, ModelSpec.heston(0.04, 0.5, 0.04, 1.5, -0.9), grid, R)
    assert np.all(paths.variance >= 0.0)
    assert np.all(paths.stock > 0.0)


@pytest.mark.parametrize("model", [GBM, CEV, HESTON], ids=["gbm", "cev", "heston"])
def test_discounted_mean_is_s0_at_every_date(model, big_grid):
    paths = simulate(S0, model, big_grid, R)
    disc = paths.stock[:, 1:] * np.exp(-R * big_grid.times[1:])
    z = (disc.mean(axis=0) - S0) / (disc.std(axis=0, ddof=1) / math.sqrt(big_grid.n_paths))
    assert np.max(np.abs(z)) < 4


@pytest.mark.parametrize("model", [GBM, CEV, HESTON], ids=["gbm", "cev", "heston"])
def test_same_seed_is_bit_identical(model):
    grid = GridSpec(52, 1.0, 64, seed=123)
    a, b = simulate(S0, model, grid, R), simulate(S0, model, grid, R)
    assert np.array_equal(a.stock, b.stock)
    if a.variance is not None:
        assert np.array_equal(a.variance, b.variance)


def test_paths_do_not_depend_on_batch_size():
    small = simulate(S0, HESTON, GridSpec(12, 1.0, 10, seed=4), R)
    large = simulate(S0, HESTON, GridSpec(12, 1.0, 25, seed=4), R)
    assert np.array_equal(small.stock, large.stock[:10])


def test_streams_are_distinct():
    a = simulate(S0, GBM, GridSpec(12, 1.0, 8, seed=4, stream=0), R)
    b = simulate(S0, GBM, GridSpec(12, 1.0, 8, seed=4, stream=1), R)
    assert not np.array_equal(a.stock, b.stock)


def test_antithetic_pairs_mirror():
    grid = GridSpec(12, 1.0, 6, seed=1, antithetic=True)
    z = draw_normals(grid)
    np.testing.assert_array_equal(z[0, 1::2], -z[0, 0::2])


def test_standard_error_shrinks_with_doubled_paths():
    grid = GridSpec(52, 6.0, 4000, seed=21)
    s = simulate(S0, GBM, grid, R).stock[:, -1]
    s2 = simulate(S0, GBM, GridSpec(52, 6.0, 8000, seed=21), R).stock[:, -1]
    ratio = (s.std(ddof=1) / math.sqrt(s.size)) / (s2.std(ddof=1) / math.sqrt(s2.size))
    assert 1.3 <= ratio <= 1.5


def test_csv_dump(tmp_path):
    paths = simulate(S0, HESTON, GridSpec(4, 1.0, 2), R)
    out = tmp_path / "paths.csv"
    paths.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "path_id,step,S,v,H"
    assert len(lines) == 1 + 2 * 5
    pid, step, s, v, h = lines[1].split(",")
    assert (pid, step, float(s), float(v), h) == ("0", "0", S0, 0.09, "")
