"""Brownian paths and solvers for the stochastic pantograph equations.

Every solver works on a batch of P independent paths at once: a
``BrownianPath`` holds P columns of increments on a common grid, and the
returned DenseSolution has one component per path.  Path i of an ensemble
uses RNG stream i, so results do not depend on batching.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .det_engine import (PantographParams, UniformTime, _as_spec, solve_aux_y,
                         solve_uniform_proportional)
from .errors import DomainError, GridError, GridMismatch, NonFinite, StepTooLarge
from .forcing import integrate_steps, phi_functions
from .history import CUBIC_HERMITE, LINEAR, DenseSolution
from .rng import standard_normals

COUPLED = "coupled"
DISTRIBUTION_EXACT = "exact"
EULER_MARUYAMA = "euler_maruyama"
DECOMPOSED = "decomposed"


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Increments dB_k ~ N(0, t_{k+1} - t_k) for P streams on one grid."""

    times: np.ndarray
    increments: np.ndarray  # (n-1, P)
    seed: int
    streams: tuple

    @property
    def n_paths(self):
        return self.increments.shape[1]

    @property
    def B(self):
        out = np.zeros((self.times.size, self.n_paths))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def select(self, cols):
        cols = list(cols)
        return BrownianPath(self.times, self.increments[:, cols], self.seed,
                            tuple(self.streams[c] for c in cols))


def _grid_times(grid):
    if isinstance(grid, UniformTime):
        return grid.times()
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or not np.all(np.diff(t) > 0):
        raise GridError("grid times must be strictly increasing")
    return t


def sample_brownian(grid, seed, streams=(0,)):
    """Brownian increments on ``grid`` for each stream index in ``streams``.

    Increment k of stream s is sqrt(t_{k+1} - t_k) times normal number k of
    the keyed generator (seed, s).
    """
    if isinstance(streams, (int, np.integer)):
        streams = (int(streams),)
    t = _grid_times(grid)
    dt = np.diff(t)
    inc = np.empty((dt.size, len(streams)))
    for i, s in enumerate(streams):
        inc[:, i] = np.sqrt(dt) * standard_normals(seed, s, dt.size)
    return BrownianPath(t, inc, int(seed), tuple(int(s) for s in streams))


def _check_uniform(t):
    h = t[1] - t[0]
    if t[0] != 0.0 or np.max(np.abs(np.diff(t) - h)) > 1e-9 * h:
        raise GridMismatch("solver needs a uniform grid starting at 0")
    return h


def solve_Y0(sigma, path, mode=COUPLED):
    """dY0 = -Y0 dt + sigma(t) dB, Y0(0) = 0, one component per path.

    ``coupled``: Y0_{k+1} = e^{-h} Y0_k + e^{-h/2} sigma(t_k + h/2) dB_k.
    ``exact``: the stochastic integral over a step is replaced by a normal with
    the exact variance int e^{-2(t_{k+1}-s)} sigma(s)^2 ds (Gauss-Legendre),
    using dB_k / sqrt(h_k) as the standard normal.  Exact in law only.
    """
    sigma = _as_spec(sigma)
    t = path.times
    h = np.diff(t)
    if mode == COUPLED:
        amp = np.exp(-0.5 * h) * sigma.value(t[:-1] + 0.5 * h)
        inc = amp[:, None] * path.increments
    elif mode == DISTRIBUTION_EXACT:
        var = integrate_steps(sigma, t, rate=-2.0, power=2)
        inc = (np.sqrt(np.maximum(var, 0.0)) / np.sqrt(h))[:, None] * path.increments
    else:
        raise ValueError(f"unknown mode {mode!r}")
    Y = _ou_recursion(np.exp(-h), inc)
    return DenseSolution.from_arrays(t, Y, interp=LINEAR)


def _ou_recursion(decay, inc):
    Y = np.empty((decay.size + 1, inc.shape[1]))
    Y[0] = 0.0
    y = Y[0]
    for k in range(decay.size):
        y = decay[k] * y + inc[k]
        Y[k + 1] = y
    return Y


def solve_Y(f, sigma, path, y=None):
    """dY = (-Y + f) dt + sigma dB: deterministic part y plus coupled Y0."""
    if y is None:
        y = solve_aux_y(f, path.times)
    elif y.times.size != path.times.size or not np.array_equal(y.times, path.times):
        raise GridMismatch("y and the Brownian path use different grids")
    Y0 = solve_Y0(sigma, path, COUPLED)
    return DenseSolution.from_arrays(path.times, Y0.values + y.values[:, :1], interp=LINEAR)


def _linear_at_positions(V, p):
    """Linear interpolation of rows of V at fractional indices p (array)."""
    j = np.floor(p).astype(int)
    j = np.minimum(j, V.shape[0] - 2)
    th = (p - j)[:, None]
    return V[j] + th * (V[j + 1] - V[j])


def _uniform_linear_sampler(h, V):
    """Sampler returning the piecewise-linear interpolant of V (nodes k h)."""
    n = V.shape[0]

    def sample(t):
        p = np.clip(np.asarray(t, dtype=float) / h, 0.0, n - 1.0)
        return _linear_at_positions(V, p)
    return sample


def solve_sdde(params, f, sigma, path, x0, method=DECOMPOSED):
    """dX = (b X + a X(qt) + f) dt + sigma dB on the path's uniform grid.

    ``euler_maruyama``: explicit EM, X(q t_k) by linear interpolation.
    ``decomposed``: X = Z + Y with Y from :func:`solve_Y`,
    phi = a Y(qt) + (1+b) Y as piecewise-linear data, and Z' = b Z + a Z(qt) + phi
    solved by RK4.
    """
    f = _as_spec(f)
    sigma = _as_spec(sigma)
    t = path.times
    h = _check_uniform(t)
    a, b, q = params.a, params.b, params.q
    if h * abs(b) > 0.5:
        raise StepTooLarge(f"h*|b| = {h * abs(b)} exceeds 0.5")
    P = path.n_paths
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (P,)).copy()
    n = t.size - 1
    if method == EULER_MARUYAMA:
        X = np.empty((n + 1, P))
        X[0] = x0
        F = f.value(t)
        noise = sigma.value(t[:-1])[:, None] * path.increments
        for k in range(n):
            p = q * k
            j = int(p)
            th = p - j
            xd = X[j] if th == 0.0 else X[j] + th * (X[j + 1] - X[j])
            X[k + 1] = X[k] + h * (b * X[k] + a * xd + F[k]) + noise[k]
        return DenseSolution.from_arrays(t, X, interp=LINEAR)
    if method != DECOMPOSED:
        raise ValueError(f"unknown method {method!r}")
    Y = solve_Y(f, sigma, path).values
    Yq = _linear_at_positions(Y, q * np.arange(n + 1))
    phi = a * Yq + (1.0 + b) * Y
    drift = lambda x, xd: b * x + a * xd
    step = lambda k, c: (b + a * q ** k) * c
    Z, _ = solve_uniform_proportional(drift, step, x0 - Y[0], _uniform_linear_sampler(h, phi), h, n, q)
    return DenseSolution.from_arrays(t, Z + Y, interp=LINEAR)


# ---------------------------------------------------------------------------
# multiplicative noise


@dataclass(frozen=True)
class MultiplicativeParams:
    """dX = (b X + a X(qt)) dt + sigma X dB."""

    a: float
    b: float
    q: float
    sigma: float

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise DomainError("q must lie in (0, 1)")

    @property
    def lam(self):
        return self.b - 0.5 * self.sigma ** 2

    @property
    def lyapunov_exponent(self):
        """Almost-sure exponential growth rate of X when a > 0 and x0 > 0."""
        return max(self.lam, 0.0)


def geometric_grid(q, m=16, t0=1e-2, t_end=1e3):
    """Times 0, t0 q, t0 q r, ..., >= t_end with ratio r = q**(-1/m)."""
    if int(m) != m or m < 1:
        raise GridError("m must be a positive integer")
    ds = -math.log(q) / m
    n = int(math.ceil(math.log(t_end / t0) / ds - 1e-9))
    return np.concatenate([[0.0], t0 * np.exp(np.arange(-m, n + 1) * ds)])


def _check_geometric(t, q):
    g = t[1:]
    if t[0] != 0.0 or g.size < 3:
        raise GridError("geometric grid must start with 0 followed by geometric nodes")
    lr = np.diff(np.log(g))
    ds = lr[0]
    if np.max(np.abs(lr - ds)) > 1e-9 * ds:
        raise GridError("grid is not geometric")
    ratio = -math.log(q) / ds
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-6 * ratio:
        raise GridError("q is not an integer power of the grid ratio")
    if g.size <= m:
        raise GridError("grid too short for the delay")
    return m


def _log_phi1(d):
    """log((e^d - 1)/d), stable for all real d."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < 1e-8
    out[small] = 0.5 * d[small]
    pos = (d > 0) & ~small
    neg = (d < 0) & ~small
    out[pos] = d[pos] + np.log(-np.expm1(-d[pos])) - np.log(d[pos])
    out[neg] = np.log(-np.expm1(d[neg])) - np.log(-d[neg])
    return out


@dataclass(frozen=True, eq=False)
class MultiplicativeSolution:
    """X = rho Z on a geometric grid; logs are kept to avoid overflow."""

    times: np.ndarray
    log_rho: np.ndarray
    z: np.ndarray          # Z at nodes (may overflow to inf for long horizons; see log_z)
    log_z: np.ndarray      # nan where Z <= 0
    x: DenseSolution

    @property
    def log_abs_x(self):
        with np.errstate(divide="ignore"):
            return np.where(np.isfinite(self.log_z), self.log_rho + self.log_z,
                            self.log_rho + np.log(np.abs(self.z)))

    def log_abs_x_at(self, t):
        """log|X(t)| interpolated linearly between nodes (per path)."""
        lx = self.log_abs_x
        return np.array([np.interp(t, self.times, lx[:, i]) for i in range(lx.shape[1])])


def solve_multiplicative(mp, path, x0, grid=None):
    """X = rho Z with rho = exp(lam t + sigma B) and Z' = a rho(qt)/rho(t) Z(qt).

    The grid (taken from ``path``) is 0 followed by geometric nodes whose
    ratio r satisfies q = r**-m, so q t_k is a node.  On each step the
    exponent log a(t) is interpolated linearly between nodes and the delayed
    Z(qt) linearly on its (earlier) grid interval; the step integral is then
    evaluated in closed form.  For a > 0 and x0 > 0 the recursion runs on
    log Z, which is non-decreasing by construction; otherwise on Z directly.
    The segment [0, t0] is bootstrapped from Z = x0 by two Picard sweeps.
    """
    t = path.times
    m = _check_geometric(t, mp.q)
    a, q = mp.a, mp.q
    P = path.n_paths
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (P,)).copy()
    L = mp.lam * t[:, None] + mp.sigma * path.B   # log rho, (n, P)
    n = t.size
    g0 = 1  # index of t0 q (first geometric node)
    # delayed index: node i >= g0 + m has q t_i = t_{i-m}
    Z = np.empty((n, P))
    Z[0] = x0
    # bootstrap on nodes 1..g0+m (t in [q t0, t0]) by Picard sweeps with trapezoid weights
    nb = g0 + m + 1
    tb = t[:nb]
    Zb = np.repeat(x0[None, :], nb, axis=0)
    for _ in range(2):
        Lq = np.stack([np.interp(q * tb, t, L[:, i]) for i in range(P)], axis=1)
        Zq = np.stack([np.interp(q * tb, tb, Zb[:, i]) for i in range(P)], axis=1)
        integrand = a * np.exp(Lq - L[:nb]) * Zq
        cum = np.zeros_like(Zb)
        cum[1:] = np.cumsum(0.5 * np.diff(tb)[:, None] * (integrand[1:] + integrand[:-1]), axis=0)
        Zb = x0[None, :] + cum
    Z[:nb] = Zb
    H = np.diff(t)
    positive = a > 0 and np.all(x0 > 0)
    if a == 0:
        Z[:] = x0[None, :]
        log_z = np.log(np.abs(Z)) if np.all(x0 > 0) else np.full_like(Z, np.nan)
    elif positive:
        W = np.empty((n, P))
        W[:nb] = np.log(Zb)
        la = math.log(a)
        for k in range(nb - 1, n - 1):
            j = k - m
            l0 = la + L[j] - L[k] + W[j]
            l1 = la + L[j + 1] - L[k + 1] + W[j + 1]
            log_inc = l0 + math.log(H[k]) + _log_phi1(l1 - l0)
            W[k + 1] = np.logaddexp(W[k], log_inc)
        log_z = W
        with np.errstate(over="ignore"):
            Z = np.exp(W)
    else:
        for k in range(nb - 1, n - 1):
            j = k - m
            e0 = L[j] - L[k]
            e1 = L[j + 1] - L[k + 1]
            d = e1 - e0
            ph = phi_functions(d, 2)
            base = np.exp(e0)
            inc = a * H[k] * base * (Z[j] * ph[0] + (Z[j + 1] - Z[j]) * (ph[0] - ph[1]))
            Z[k + 1] = Z[k] + inc
        if not np.all(np.isfinite(Z)):
            raise NonFinite("Z overflowed; shorten the horizon")
        with np.errstate(divide="ignore", invalid="ignore"):
            log_z = np.where(Z > 0, np.log(np.where(Z > 0, Z, 1.0)), np.nan)
    with np.errstate(over="ignore", invalid="ignore"):
        X = np.where(np.isfinite(log_z), np.exp(L + np.nan_to_num(log_z)), np.exp(L) * Z)
    if np.all(np.isfinite(X)):
        xs = DenseSolution.from_arrays(t, X, interp=LINEAR)
    else:
        xs = None
    return MultiplicativeSolution(t, L, Z, log_z, xs)


def coarsen(path, factor):
    """The same Brownian path on every ``factor``-th node (increments summed)."""
    factor = int(factor)
    n = (path.times.size - 1) // factor
    inc = path.increments[: n * factor].reshape(n, factor, -1).sum(axis=1)
    return BrownianPath(path.times[: n * factor + 1: factor], inc, path.seed, path.streams)
