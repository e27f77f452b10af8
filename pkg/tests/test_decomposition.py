import math

import numpy as np
import pytest
from scipy.integrate import quad

from pantolab.decomposition import (build_phi, check_representation, decompose,
                                    representation_residuals, solve_via_decomposition)
from pantolab.det_engine import PantographParams, UniformTime, solve_aux_y, solve_pantograph
from pantolab.errors import GridMismatch
from pantolab.forcing import Constant, SequenceRule, ShiftedPower, Sinusoid, SpikeTrain, Zero
from pantolab.history import LINEAR, DenseSolution
from pantolab.stoch_engine import DECOMPOSED, sample_brownian, solve_sdde, solve_Y

P = PantographParams(0.5, -1.0, 0.5)


def test_phi_of_zero_and_constant():
    t = np.linspace(0, 5, 51)
    assert np.all(build_phi(DenseSolution.from_arrays(t, np.zeros_like(t), interp=LINEAR), P).value(t) == 0)
    ones = DenseSolution.from_arrays(t, np.ones_like(t), interp=LINEAR)
    assert np.allclose(build_phi(ones, P).value(t), 0.5)


def test_phi_of_exponential():
    t = np.linspace(0, 5, 501)
    y = DenseSolution.from_arrays(t, np.exp(-t), -np.exp(-t))
    phi = build_phi(y, P)
    assert np.max(np.abs(phi.value(t) - 0.5 * np.exp(-t / 2))) < 1e-9


def test_representation_unperturbed_solution():
    x = solve_pantograph(P, Zero(), 1.0, UniformTime(1e-3, 10.0))
    y = DenseSolution.from_arrays(x.times, np.zeros_like(x.times), interp=LINEAR)
    assert check_representation(x, y, params=P) <= 1e-5


def test_representation_trivial_case():
    t = np.linspace(0, 3, 31)
    z = DenseSolution.from_arrays(t, np.zeros_like(t), interp=LINEAR)
    assert check_representation(z, z, params=P, xi=0.0) == 0.0


def test_representation_residual_is_second_order():
    f = Sinusoid(1.0, 1.0)
    res = [check_representation(solve_pantograph(P, f, 1.0, UniformTime(h, 10.0)), f=f, params=P)
           for h in (0.02, 0.01)]
    assert 3.0 <= res[0] / res[1] <= 5.0


def test_representation_matches_direct_quadrature():
    f = ShiftedPower(1.0, -1.0)
    x = solve_pantograph(P, f, 1.0, UniformTime(1e-3, 4.0))
    y = solve_aux_y(f, x.times)
    t_end = 4.0
    integral, _ = quad(lambda s: math.exp(-(t_end - s)) * (0.0 * x(s) + 0.5 * x(0.5 * s)), 0, t_end,
                       limit=200)
    y_ref = x(t_end) - math.exp(-t_end) - integral
    assert y(t_end) == pytest.approx(y_ref, abs=1e-8)
    assert abs(representation_residuals(x, y, P)[-1, 0]) < 1e-6


def test_representation_grid_mismatch():
    x = solve_pantograph(P, Zero(), 1.0, UniformTime(0.01, 1.0))
    y = solve_aux_y(Zero(), UniformTime(0.02, 1.0))
    with pytest.raises(GridMismatch):
        representation_residuals(x, y, P)


def test_decompose_record():
    rec = decompose(P, Sinusoid(1.0, 2.0), 1.0, UniformTime(1e-3, 10.0))
    assert rec.residuals["representation"] < 1e-6
    assert rec.residuals["roundtrip"] < 1e-10
    t = rec.x.times
    assert np.allclose(rec.x.values, rec.y.values + rec.z.values, atol=1e-15)


def test_decomposition_solver_matches_direct_on_smooth_forcing():
    grid = UniformTime(1e-3, 20.0)
    f = ShiftedPower(1.0, -1.0)
    direct = solve_pantograph(P, f, 1.0, grid)
    via = solve_via_decomposition(P, f, 1.0, grid)
    assert np.max(np.abs(direct.values - via.values)) < 1e-6


def test_decomposition_solver_refines_on_narrow_spikes():
    f = SpikeTrain(SequenceRule.make("linear", a=1.0), SequenceRule.make("inv_square"))
    coarse = solve_via_decomposition(P, f, 1.0, UniformTime(2e-3, 30.0))
    fine = solve_via_decomposition(P, f, 1.0, UniformTime(1e-3, 30.0))
    d = np.max(np.abs(coarse.values[:, 0] - fine.values[::2, 0]))
    assert d < 1e-4


def test_stochastic_representation_per_path():
    path = sample_brownian(UniformTime(1e-3, 20.0), 3, tuple(range(5)))
    sigma = Constant(0.3)
    f = ShiftedPower(1.0, -2.0)
    X = solve_sdde(P, f, sigma, path, 1.0, DECOMPOSED)
    Y = solve_Y(f, sigma, path)
    assert np.max(np.abs(representation_residuals(X, Y, P, xi=1.0))) <= 1e-4
