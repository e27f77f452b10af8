import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pantolab.errors import NonFinite, NonMonotoneTime, OutOfDomain
from pantolab.history import CUBIC_HERMITE, LINEAR, DenseSolution, hermite_basis


def test_single_node_domain_and_value():
    sol = DenseSolution(interp=LINEAR).append(0.0, 1.0)
    assert sol.domain == (0.0, 0.0)
    assert sol(0.0) == 1.0


def test_linear_midpoint():
    sol = DenseSolution(interp=LINEAR).append(0, 1).append(1, 2)
    assert sol(0.5) == 1.5


def test_hermite_reproduces_linear_function():
    sol = DenseSolution()
    for t in (0.0, 0.5, 1.0):
        sol.append(t, t, 1.0)
    assert sol(0.3) == pytest.approx(0.3, abs=1e-15)


def test_hermite_reproduces_cubic():
    t = np.array([0.0, 0.7, 1.3, 2.0])
    sol = DenseSolution.from_arrays(t, t ** 3 - t, 3 * t ** 2 - 1)
    s = np.linspace(0, 2, 41)
    assert np.max(np.abs(sol(s) - (s ** 3 - s))) < 1e-13


def test_hermite_sine_accuracy():
    h = 0.01
    t = np.arange(0, 2 + h / 2, h)
    sol = DenseSolution.from_arrays(t, np.sin(t), np.cos(t))
    s = t[:-1] + 0.37 * h
    # Hermite local error is bounded by h^4/384 max|f''''|
    assert np.max(np.abs(sol(s) - np.sin(s))) <= 1e-9


def test_node_returns_stored_value_exactly():
    t = np.linspace(0, 1, 11)
    v = np.exp(t)
    sol = DenseSolution.from_arrays(t, v, v)
    assert sol(t[3]) == v[3]
    assert sol(t[-1]) == v[-1]


def test_eval_before_start_raises():
    sol = DenseSolution(interp=LINEAR).append(1.0, 0.0).append(2.0, 1.0)
    with pytest.raises(OutOfDomain):
        sol(0.5)
    with pytest.raises(OutOfDomain):
        sol(2.5)


def test_append_contract_errors():
    sol = DenseSolution(interp=LINEAR).append(0.0, 1.0)
    with pytest.raises(NonMonotoneTime):
        sol.append(0.0, 2.0)
    with pytest.raises(NonFinite):
        sol.append(1.0, np.nan)
    with pytest.raises(ValueError):
        DenseSolution().append(0.0, 1.0)  # Hermite without derivative


def test_growth_keeps_earlier_nodes():
    sol = DenseSolution(interp=LINEAR, capacity=2)
    for k in range(100):
        sol.append(k, 2.0 * k)
    assert len(sol) == 100
    assert np.array_equal(sol.values[:, 0], 2.0 * np.arange(100))


def test_vector_state_shapes():
    t = np.linspace(0, 1, 5)
    sol = DenseSolution.from_arrays(t, np.stack([t, -t], axis=1), interp=LINEAR)
    assert sol.eval(0.25).shape == (2,)
    assert sol.eval([0.1, 0.2, 0.3]).shape == (3, 2)
    assert sol.component(1)(0.5) == -0.5


def test_hermite_derivative_of_cubic():
    t = np.linspace(0, 1, 6)
    sol = DenseSolution.from_arrays(t, t ** 3, 3 * t ** 2)
    s = np.array([0.13, 0.5, 0.91])
    assert np.allclose(sol.deriv(s)[:, 0], 3 * s ** 2, atol=1e-12)


def test_csv_roundtrip(tmp_path):
    t = np.linspace(0, 1, 7)
    sol = DenseSolution.from_arrays(t, np.sin(t), np.cos(t))
    sol.to_csv(tmp_path / "x.csv")
    back = DenseSolution.from_csv(tmp_path / "x.csv")
    assert back.interp == CUBIC_HERMITE
    assert np.array_equal(back.values, sol.values)
    assert np.array_equal(back.derivs, sol.derivs)


@given(st.floats(0, 1))
def test_hermite_basis_partition_of_unity(theta):
    h00, h10, h01, h11 = hermite_basis(theta)
    assert h00 + h01 == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20), st.floats(0, 1))
def test_linear_interpolant_within_node_range(vals, frac):
    t = np.arange(len(vals), dtype=float)
    sol = DenseSolution.from_arrays(t, vals, interp=LINEAR)
    x = sol(frac * t[-1])
    assert min(vals) - 1e-9 <= x <= max(vals) + 1e-9
