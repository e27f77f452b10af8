import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pantolab.det_engine import PantographParams, UniformTime, solve_aux_y, solve_pantograph
from pantolab.errors import GridMismatch, StepTooLarge
from pantolab.forcing import Constant, Exponential, ShiftedPower, Zero
from pantolab.rng import normals_matrix, standard_normals
from pantolab.stoch_engine import (COUPLED, DECOMPOSED, DISTRIBUTION_EXACT, EULER_MARUYAMA,
                                   MultiplicativeParams, coarsen, geometric_grid, sample_brownian,
                                   solve_multiplicative, solve_sdde, solve_Y, solve_Y0)

P = PantographParams(0.5, -1.0, 0.5)


def test_same_seed_same_path():
    g = UniformTime(0.01, 5.0)
    a = sample_brownian(g, 7, (0, 1, 2))
    b = sample_brownian(g, 7, (0, 1, 2))
    assert np.array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments[:, 0], sample_brownian(g, 8, 0).increments[:, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 40), st.integers(0, 1000), st.integers(0, 300), st.integers(1, 50))
def test_normals_are_addressable(seed, stream, start, count):
    full = standard_normals(seed, stream, start + count)
    assert np.array_equal(standard_normals(seed, stream, count, start), full[start:])


def test_streams_independent_of_batch_composition():
    m = normals_matrix(3, [5, 9, 2], 100)
    assert np.array_equal(m[:, 1], standard_normals(3, 9, 100))


def test_normals_moments():
    z = standard_normals(1, 0, 200_000)
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)


def test_brownian_cumulative_and_coarsening():
    path = sample_brownian(UniformTime(0.01, 1.0), 11, (0, 1))
    assert np.allclose(path.B[-1], path.increments.sum(axis=0))
    c = coarsen(path, 4)
    assert np.allclose(c.B[-1], path.B[-1])
    assert np.allclose(np.diff(c.times), 0.04)


def test_zero_intensity_gives_zero_Y0():
    path = sample_brownian(UniformTime(0.01, 5.0), 1, (0, 1))
    for mode in (COUPLED, DISTRIBUTION_EXACT):
        assert np.all(solve_Y0(Zero(), path, mode).values == 0)


def test_stationary_ou_variance():
    path = sample_brownian(UniformTime(0.01, 10.0), 2024, tuple(range(10_000)))
    Y = solve_Y0(Constant(1.0), path, DISTRIBUTION_EXACT)
    # stationary variance sigma^2/2; 1 - e^{-20} of it is reached by t = 10
    assert 0.47 <= np.var(Y.values[-1]) <= 0.53


def test_exact_mode_variance_matches_closed_form():
    # Var Y0(t) = int_0^t e^{-2(t-s)} e^{-2s} ds = t e^{-2t} for sigma = e^{-t}
    path = sample_brownian(UniformTime(0.05, 2.0), 99, tuple(range(20_000)))
    Y = solve_Y0(Exponential(1.0, -1.0), path, DISTRIBUTION_EXACT)
    ref = 2.0 * math.exp(-4.0)
    assert np.var(Y.values[-1]) == pytest.approx(ref, rel=4 * math.sqrt(2 / 20_000))


def test_Y_reductions():
    path = sample_brownian(UniformTime(0.01, 5.0), 5, (0,))
    f = ShiftedPower(1.0, -1.0)
    y = solve_aux_y(f, path.times)
    assert np.array_equal(solve_Y(f, Zero(), path).values[:, 0], y.values[:, 0])
    Y0 = solve_Y0(Exponential(1.0, -1.0), path, COUPLED)
    assert np.array_equal(solve_Y(Zero(), Exponential(1.0, -1.0), path).values, Y0.values)


def test_Y_grid_mismatch():
    path = sample_brownian(UniformTime(0.01, 1.0), 5, (0,))
    with pytest.raises(GridMismatch):
        solve_Y(Zero(), Constant(1.0), path, solve_aux_y(Zero(), UniformTime(0.02, 1.0)))


def test_noiseless_sdde_matches_deterministic():
    grid = UniformTime(1e-3, 10.0)
    path = sample_brownian(grid, 1, (0,))
    f = ShiftedPower(1.0, -2.0)
    det = solve_pantograph(P, f, 1.0, grid)
    dec = solve_sdde(P, f, Zero(), path, 1.0, DECOMPOSED)
    em = solve_sdde(P, f, Zero(), path, 1.0, EULER_MARUYAMA)
    assert np.max(np.abs(dec.values[:, 0] - det.values[:, 0])) <= 1e-6
    em_err = np.max(np.abs(em.values[:, 0] - det.values[:, 0]))
    assert em_err <= 10 * grid.h


def test_zero_data_sdde_is_zero():
    path = sample_brownian(UniformTime(0.01, 5.0), 1, (0, 1))
    for method in (DECOMPOSED, EULER_MARUYAMA):
        assert np.all(solve_sdde(P, Zero(), Zero(), path, 0.0, method).values == 0)


def test_sdde_step_guard():
    path = sample_brownian(UniformTime(0.1, 1.0), 1, (0,))
    with pytest.raises(StepTooLarge):
        solve_sdde(PantographParams(0.5, -10.0, 0.5), Zero(), Zero(), path, 1.0)


def test_methods_converge_to_same_pathwise_solution():
    fine = sample_brownian(UniformTime(1e-4, 5.0), 21, (0, 1, 2))
    sigma = Constant(0.5)
    ref = solve_sdde(P, Zero(), sigma, fine, 1.0, DECOMPOSED)
    errs = {}
    for method in (DECOMPOSED, EULER_MARUYAMA):
        errs[method] = [np.max(np.abs(solve_sdde(P, Zero(), sigma, coarsen(fine, k), 1.0, method).values
                                      - ref.values[::k])) for k in (100, 25)]
    # both shrink under refinement on a shared Brownian path
    for e in errs.values():
        assert e[1] < e[0]
    assert errs[EULER_MARUYAMA][1] < 0.05


def test_gbm_when_delay_term_vanishes():
    mp = MultiplicativeParams(0.0, 0.3, 0.5, 0.4)
    path = sample_brownian(geometric_grid(0.5, t_end=50.0), 4, (0, 1, 2))
    sol = solve_multiplicative(mp, path, 2.0)
    ref = math.log(2.0) + mp.lam * path.times[:, None] + mp.sigma * path.B
    assert np.allclose(sol.log_abs_x, ref, atol=1e-12)


def test_multiplicative_Z_monotone_for_positive_data():
    mp = MultiplicativeParams(0.5, -1.0, 0.5, 0.5)
    path = sample_brownian(geometric_grid(0.5, t_end=200.0), 6, tuple(range(20)))
    sol = solve_multiplicative(mp, path, 1.0)
    assert np.all(np.diff(sol.log_z, axis=0) >= 0)


def test_geometric_grid_contains_delayed_nodes():
    t = geometric_grid(0.5, m=8, t0=0.1, t_end=10.0)
    assert t[0] == 0.0
    g = t[1:]
    qt = 0.5 * g[8:]
    assert np.allclose(qt, g[:-8], rtol=1e-12)
