import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialgnn import smoothlab
from spatialgnn.errors import ValidationError
from spatialgnn.smoothlab import BumpField, Field, Grid
from spatialgnn.tensor import make_rng

GRID = Grid(size=32)


def two_bump_field(grid):
    return BumpField(
        centers=np.array([[[0.25, 0.5]], [[0.75, 0.5]]]),
        widths=np.full((2, 1), 0.2),
        amps=np.full((2, 1), 1.0),
    )


def test_grid_geometry():
    g = Grid(size=4)
    assert g.dx == g.dy == g.spacing == 0.25
    assert g.cell_area == 0.0625
    assert g.xs.tolist() == [0.125, 0.375, 0.625, 0.875]
    with pytest.raises(ValidationError):
        Grid(size=0)
    with pytest.raises(ValidationError):
        Grid(x0=1.0, x1=1.0)


def test_transect_between_bumps_is_monotone():
    g = Grid(size=64)
    p0 = two_bump_field(g).probabilities(g)[:, :, 0]
    row = p0[32]  # y just above 0.5
    between = (g.xs >= 0.25) & (g.xs <= 0.75)
    assert np.all(np.diff(row[between]) < 0)
    assert row[between][0] > 0.5 > row[between][-1]


def test_identical_bumps_give_uniform_field():
    g = Grid(size=16)
    bf = BumpField(
        centers=np.tile([[0.3, 0.6]], (3, 1, 1)),
        widths=np.full((3, 1), 0.2),
        amps=np.full((3, 1), 1.1),
    )
    assert np.allclose(bf.probabilities(g), 1 / 3, atol=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_lipschitz_probe(seed):
    g = Grid(size=64)
    h = smoothlab.make_smooth_field(g, 4, make_rng(seed)).h_star
    jump = max(np.abs(np.diff(h, axis=0)).max(), np.abs(np.diff(h, axis=1)).max())
    assert jump < 10 * g.spacing


def test_smooth_field_on_simplex():
    f = smoothlab.make_smooth_field(GRID, 4, make_rng(0))
    assert f.h_star.shape == (32, 32, 4)
    assert np.all(f.h_star >= 0)
    assert np.allclose(f.h_star.sum(axis=-1), 1.0, atol=1e-12)
    with pytest.raises(ValidationError):
        smoothlab.make_smooth_field(GRID, 1, make_rng(0))


def test_noiseless_perturb_is_identity():
    f = smoothlab.perturb(smoothlab.make_smooth_field(GRID, 3, make_rng(1)), 0.0, make_rng(2))
    assert np.array_equal(f.h, f.h_star)
    assert smoothlab.error_functional(f.h, f.h_star, GRID) == 0.0


def test_noisy_perturb_has_positive_error_and_is_deterministic():
    base = smoothlab.make_smooth_field(GRID, 3, make_rng(1))
    a = smoothlab.perturb(base, 0.3, make_rng(5))
    b = smoothlab.perturb(base, 0.3, make_rng(5))
    assert np.array_equal(a.h, b.h)
    assert smoothlab.error_functional(a.h, a.h_star, GRID) > 0
    assert np.all(a.h >= 0)
    assert np.allclose(a.h.sum(axis=-1), 1.0)
    with pytest.raises(ValidationError):
        smoothlab.perturb(base, -0.1, make_rng(0))


def noisy(seed=3, grid=GRID):
    rng = make_rng(seed)
    return smoothlab.perturb(smoothlab.make_smooth_field(grid, 4, rng), 0.3, rng)


def test_tiny_bandwidth_returns_input():
    f = noisy()
    out = smoothlab.kernel_smooth(f, 1e-6 * GRID.spacing)
    assert np.max(np.abs(out.h_w - f.h)) < 1e-9


def test_huge_bandwidth_returns_global_mean():
    f = noisy()
    out = smoothlab.kernel_smooth(f, 1e6)
    mean = f.h.reshape(-1, 4).mean(axis=0)
    assert np.max(np.abs(out.h_w - mean)) < 1e-9


def test_constant_field_is_preserved():
    h = np.broadcast_to(np.array([0.1, 0.2, 0.3, 0.4]), (32, 32, 4)).copy()
    f = Field(grid=GRID, h_star=h, h=h)
    for bw in (0.01, 0.1, 1.0):
        assert np.allclose(smoothlab.kernel_smooth(f, bw).h_w, h, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.005, 2.0))
def test_smoothing_stays_on_simplex(seed, bandwidth):
    out = smoothlab.kernel_smooth(noisy(seed, Grid(size=16)), bandwidth)
    assert np.all(out.h_w >= 0)
    assert np.allclose(out.h_w.sum(axis=-1), 1.0, atol=1e-12)


def test_smooth_rejects_bad_input():
    with pytest.raises(ValidationError):
        smoothlab.kernel_smooth(noisy(), 0.0)
    bare = smoothlab.make_smooth_field(GRID, 2, make_rng(0))
    with pytest.raises(ValidationError, match="perturb"):
        smoothlab.kernel_smooth(bare, 0.1)


def test_error_of_constant_offset():
    g = Grid(size=20)
    h = smoothlab.make_smooth_field(g, 3, make_rng(0)).h_star
    shifted = h.copy()
    shifted[..., 1] += 0.07
    assert smoothlab.error_functional(shifted, h, g) == pytest.approx(0.07**2, rel=1e-12)
    assert smoothlab.error_functional(h, h, g) == 0.0


def test_error_rejects_mismatched_fields():
    with pytest.raises(ValidationError):
        smoothlab.error_functional(np.zeros((4, 4, 2)), np.zeros((4, 4, 3)), Grid(size=4))
    with pytest.raises(ValidationError):
        smoothlab.error_functional(np.zeros((4, 4, 2)), np.zeros((4, 4, 2)), Grid(size=8))


@pytest.mark.parametrize("seed", range(5))
def test_error_converges_under_refinement(seed):
    rng = make_rng(seed)
    coarse, fine = Grid(size=64), Grid(size=128)
    a = smoothlab.random_bump_field(coarse, 4, rng)
    b = smoothlab.random_bump_field(coarse, 4, rng)
    e64 = smoothlab.error_functional(a.probabilities(coarse), b.probabilities(coarse), coarse)
    e128 = smoothlab.error_functional(a.probabilities(fine), b.probabilities(fine), fine)
    assert abs(e64 - e128) < 0.05 * e128


def test_experiment_wins_with_noise():
    bws = [k * GRID.spacing for k in (1, 2, 3)]
    pairs, summary = smoothlab.run_experiment(20, GRID, 0.3, bws, seed=4)
    assert len(pairs) == 60
    assert summary["win_rate"] >= 0.95
    assert all(p.e_h >= 0 and p.e_hw >= 0 for p in pairs)
    assert set(summary["best_bandwidth_per_trial"]) <= set(bws)


def test_experiment_noiseless_never_wins():
    pairs, summary = smoothlab.run_experiment(5, GRID, 0.0, [GRID.spacing, 2 * GRID.spacing], seed=1)
    assert summary["win_rate"] == 0.0
    assert all(p.e_h == 0.0 and p.e_hw >= 0.0 for p in pairs)


def test_experiment_single_trial_is_reproducible():
    a, sa = smoothlab.run_experiment(1, GRID, 0.3, [0.05], seed=8)
    b, sb = smoothlab.run_experiment(1, GRID, 0.3, [0.05], seed=8)
    assert a == b and sa == sb
    assert smoothlab.pairs_to_csv(a) == smoothlab.pairs_to_csv(b)


def test_experiment_validation():
    with pytest.raises(ValidationError):
        smoothlab.run_experiment(0, GRID, 0.3, [0.05])
    with pytest.raises(ValidationError):
        smoothlab.run_experiment(1, GRID, 0.3, [])


def test_variance_reduced_everywhere():
    var_h, var_hw = smoothlab.variance_check(GRID, 0.3, 2 * GRID.spacing, redraws=50, seed=0)
    assert var_h.shape == (32, 32)
    assert np.all(var_hw <= var_h)


def test_csv_and_json_exports():
    pairs, summary = smoothlab.run_experiment(2, Grid(size=8), 0.2, [0.1], seed=0)
    lines = smoothlab.pairs_to_csv(pairs).splitlines()
    assert lines[0] == "trial,noise_std,bandwidth,e_h,e_hw"
    assert len(lines) == 3
    assert '"win_rate"' in smoothlab.summary_to_json(summary)


def test_field_is_immutable_record():
    f = noisy()
    with pytest.raises(dataclasses.FrozenInstanceError):
        f.noise_std = 1.0
