"""Additive decompositions x = y + z and their representation identities.

With y the solution of y' = -y + f (or its stochastic counterpart Y),
z = x - y solves the pantograph equation driven by
phi(t) = a y(qt) + (1 + b) y(t) instead of f.  The identity

    y(t) = x(t) - x(0) e^{-t} - int_0^t e^{-(t-s)} [(1+b) x(s) + a x(qs)] ds

links the two and is checked numerically on the solver grid.
"""

from dataclasses import dataclass, field

import numpy as np

from .det_engine import UniformTime, _as_spec, solve_aux_y, solve_pantograph, solve_uniform_proportional
from .errors import GridMismatch, OutOfDomain
from .forcing import Tabulated
from .history import CUBIC_HERMITE, LINEAR, DenseSolution
from .stoch_engine import _linear_at_positions, _uniform_linear_sampler


def build_phi(y, params):
    """Tabulated phi(t_k) = a y(q t_k) + (1+b) y(t_k) on the nodes of ``y``.

    Uses Hermite data when ``y`` carries derivatives, otherwise linear.
    """
    a, b, q = params.a, params.b, params.q
    t = y.times
    lo = t[0]
    if q * lo < lo:
        raise OutOfDomain("q t0 lies below the domain of y")
    vals = a * y.eval(q * t) + (1.0 + b) * y.values
    if y.derivs is not None:
        ders = a * q * y.deriv(q * t) + (1.0 + b) * y.derivs
        sol = DenseSolution.from_arrays(t, vals, ders, CUBIC_HERMITE)
    else:
        sol = DenseSolution.from_arrays(t, vals, interp=LINEAR)
    return Tabulated(sol)


def representation_residuals(x, y, params, xi=None):
    """Node-wise residual of the x <-> y representation identity (all components).

    The integral uses trapezoid weights on the grid of ``x``; x(q t) comes
    from the dense output of ``x``.
    """
    t = x.times
    if y.times.size != t.size or not np.array_equal(y.times, t):
        raise GridMismatch("x and y must share a grid")
    a, b, q = params.a, params.b, params.q
    X = x.values
    xi = X[0] if xi is None else np.broadcast_to(np.asarray(xi, dtype=float), X[0].shape)
    g = (1.0 + b) * X + a * x.eval(q * t)
    h = np.diff(t)[:, None]
    decay = np.exp(-h)
    J = np.zeros_like(X)
    for k in range(t.size - 1):
        J[k + 1] = decay[k] * J[k] + 0.5 * h[k] * (decay[k] * g[k] + g[k + 1])
    return y.values - X + np.asarray(xi)[None, :] * np.exp(-t)[:, None] + J


def check_representation(x, y=None, f=None, params=None, xi=None):
    """Max-norm residual of the representation identity.

    ``y`` defaults to the solution of y' = -y + f on the grid of ``x``.
    """
    if y is None:
        y = solve_aux_y(_as_spec(f), x.times)
    return float(np.max(np.abs(representation_residuals(x, y, params, xi))))


@dataclass(eq=False)
class DecompositionRecord:
    x: DenseSolution
    y: DenseSolution
    z: DenseSolution
    phi: Tabulated
    residuals: dict = field(default_factory=dict)


def decompose(params, f, x0, grid):
    """Solve for x, y and phi on a uniform grid and record z = x - y.

    Residuals: ``representation`` (identity above) and ``roundtrip`` (z versus
    an independent solve of the z-equation driven by phi).
    """
    if not isinstance(grid, UniformTime):
        raise GridMismatch("decomposition runs on a uniform grid")
    f = _as_spec(f)
    x = solve_pantograph(params, f, x0, grid)
    y = solve_aux_y(f, grid)
    z = DenseSolution.from_arrays(x.times, x.values - y.values, x.derivs - y.derivs, CUBIC_HERMITE)
    phi = build_phi(y, params)
    z2 = solve_pantograph(params, phi, x0, grid)
    res = {
        "representation": check_representation(x, y, params=params),
        "roundtrip": float(np.max(np.abs(z2.values - z.values))),
    }
    return DecompositionRecord(x, y, z, phi, res)


def solve_via_decomposition(params, f, x0, grid):
    """x = z + y on a uniform grid, for forcing too rough to sample pointwise.

    y' = -y + f uses exact step integrals of f (panels respect kinks, so spikes
    narrower than h are integrated correctly); z' = b z + a z(qt) + phi with the
    continuous phi = a y(qt) + (1+b) y taken piecewise-linear, by RK4.  Second
    order in h; returns x with linear dense output.
    """
    if not isinstance(grid, UniformTime):
        raise GridMismatch("decomposition runs on a uniform grid")
    a, b, q = params.a, params.b, params.q
    t = grid.times()
    h, n = grid.h, t.size - 1
    Y = solve_aux_y(_as_spec(f), t).values
    phi = a * _linear_at_positions(Y, q * np.arange(n + 1)) + (1.0 + b) * Y
    drift = lambda x, xd: b * x + a * xd
    step = lambda k, c: (b + a * q ** k) * c
    Z, _ = solve_uniform_proportional(drift, step, np.atleast_1d(float(x0)), _uniform_linear_sampler(h, phi), h, n, q)
    return DenseSolution.from_arrays(t, Z + Y, interp=LINEAR)
