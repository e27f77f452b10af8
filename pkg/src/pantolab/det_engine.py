"""Deterministic solvers for the forced pantograph equation

    x'(t) = a x(q t) + b x(t) + f(t),

for equations with a general unbounded delay, and for the auxiliary ODE
y' = -y + f, together with a power-series reference solution.

Two grids are offered.  ``UniformTime`` runs classical RK4 with delayed stage
values from cubic Hermite dense output; the first few steps, whose delayed
arguments lie ahead of the computed front, come from the power series.
``LogTime`` uses a geometric grid t_k = t0 * r**k with q = r**-m, so the
delayed interval [q t_k, q t_{k+1}] is exactly an earlier grid interval; each
step integrates the linear part exactly (exponential integrator) against the
Hermite cubic of the delayed interval.  It stays stable at any horizon.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BootstrapError, DomainError, GridError, OrderTooLarge, StepTooLarge
from .forcing import Constant, Spec, Zero, integrate_steps, phi_functions, taylor_coeffs
from .history import CUBIC_HERMITE, DenseSolution

MAX_TAYLOR_ORDER = 60
MAX_UNIFORM_NODES = 10 ** 8


@dataclass(frozen=True)
class PantographParams:
    """Coefficients of x' = a x(qt) + b x + f."""

    a: float
    b: float
    q: float

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise DomainError("q must lie in (0, 1)")
        if self.a == 0:
            raise DomainError("a must be non-zero")

    @property
    def c(self):
        return math.log(self.q)

    @property
    def alpha(self):
        return abs(self.a / self.b)

    @property
    def kappa(self):
        from .diagnostics import kappa
        return kappa(self.a, self.b, self.q)

    def stable(self):
        return self.b < 0 and abs(self.b) > abs(self.a)


@dataclass(frozen=True)
class UniformTime:
    h: float
    t_end: float

    def __post_init__(self):
        if not (self.h > 0 and self.t_end > 0):
            raise GridError("uniform grid needs h > 0 and t_end > 0")
        if self.t_end / self.h > MAX_UNIFORM_NODES:
            raise GridError("uniform grid exceeds 1e8 nodes; use LogTime")

    @property
    def n_steps(self):
        return int(math.ceil(self.t_end / self.h - 1e-9))

    def times(self):
        return np.arange(self.n_steps + 1) * self.h


@dataclass(frozen=True)
class LogTime:
    """Geometric grid t_k = t0 * exp(k ds) with ds = |log q| / m.

    ``h_boot`` is the uniform step used to produce the history on [q t0, t0]
    when no history is supplied.  ``ds`` may be given instead of ``m``; it must
    divide |log q| into an integer number (>= 4) of steps.
    """

    t_end: float
    m: int = 16
    t0: float = 1.0
    h_boot: float = 1e-3
    ds: Optional[float] = None

    def resolve(self, q):
        """Return (m, ds) for delay ratio q, checking divisibility."""
        c = abs(math.log(q))
        if self.ds is not None:
            ratio = c / self.ds
            m = int(round(ratio))
            if abs(ratio - m) > 1e-9 * ratio or m < 4:
                raise GridError(f"ds={self.ds} does not divide |log q|={c} into >= 4 steps")
        else:
            m = self.m
            if int(m) != m or m < 4:
                raise GridError("m must be an integer >= 4")
            m = int(m)
        if not (self.t0 > 0 and self.t_end > self.t0):
            raise GridError("log grid needs 0 < t0 < t_end")
        return m, c / m

    def times(self, q):
        m, ds = self.resolve(q)
        n = int(math.ceil(math.log(self.t_end / self.t0) / ds - 1e-9))
        return self.t0 * np.exp(np.arange(-m, n + 1) * ds)


# ---------------------------------------------------------------------------
# power series reference


def taylor_oracle(params, f_coeffs, x0, N):
    """Power-series coefficients c_0..c_N of the solution at t = 0.

    (n+1) c_{n+1} = (b + a q**n) c_n + f_n,  c_0 = x0.
    """
    if N > MAX_TAYLOR_ORDER:
        raise OrderTooLarge(f"order {N} exceeds {MAX_TAYLOR_ORDER}")
    f = np.zeros(N + 1)
    fc = np.asarray(f_coeffs, dtype=float).reshape(-1)[: N + 1]
    f[: fc.size] = fc
    c = np.empty(N + 1)
    c[0] = x0
    a, b, q = params.a, params.b, params.q
    for n in range(N):
        c[n + 1] = ((b + a * q ** n) * c[n] + f[n]) / (n + 1)
    return c


def taylor_eval(coeffs, t):
    """Horner evaluation of a power series (coefficients along axis 0)."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros(np.broadcast_shapes(t.shape, coeffs.shape[1:]))
    for cn in coeffs[::-1]:
        out = out * t + cn
    return out


def taylor_deriv_eval(coeffs, t):
    coeffs = np.asarray(coeffs, dtype=float)
    n = np.arange(1, coeffs.shape[0]).reshape((-1,) + (1,) * (coeffs.ndim - 1))
    return taylor_eval(coeffs[1:] * n, t)


def _series_vector(step, f_coeffs, x0, N):
    """Vector power series: (n+1) c_{n+1} = step(n, c_n) + f_n."""
    c = np.zeros((N + 1,) + np.shape(x0))
    c[0] = x0
    for n in range(N):
        c[n + 1] = (step(n, c[n]) + f_coeffs[n]) / (n + 1)
    return c


def _bootstrap_nodes(step, f_coeffs, x0, h, nb, N=40):
    """Values and derivatives at t = 0, h, ..., nb*h from the power series."""
    c = _series_vector(step, f_coeffs, x0, N)
    r = nb * h
    scale = max(1.0, float(np.max(np.abs(c[0]))))
    tail = np.max(np.abs(c[N])) * r ** N + np.max(np.abs(c[N - 1])) * r ** (N - 1)
    if not np.isfinite(tail) or tail > 1e-14 * scale:
        raise BootstrapError("power series does not converge on the bootstrap interval; shrink h")
    t = (np.arange(nb + 1) * h).reshape((-1,) + (1,) * (c.ndim - 1))
    return taylor_eval(c, t), taylor_deriv_eval(c, t)


def _forcing_coeffs(forcing, f_sampler, N, radius, dim):
    """Power-series coefficients of the forcing at 0, shape (N+1, dim)."""
    if forcing is not None:
        cols = [taylor_coeffs(s, N, radius) for s in forcing]
        return np.stack(cols, axis=1)
    deg = 10
    k = np.arange(deg + 1)
    x = 0.5 * radius * (1 - np.cos(np.pi * (k + 0.5) / (deg + 1)))
    y = f_sampler(x)
    u = 2.0 * x / radius - 1.0
    cheb = np.polynomial.chebyshev.chebfit(u, y, deg)
    out = np.zeros((N + 1, dim))
    for j in range(dim):
        mono = np.polynomial.chebyshev.cheb2poly(cheb[:, j])
        # substitute u = 2x/r - 1
        p = np.polynomial.Polynomial(mono)(np.polynomial.Polynomial([-1.0, 2.0 / radius]))
        out[: p.coef.size, j] = p.coef
    return out


# ---------------------------------------------------------------------------
# uniform-grid RK4 with proportional delay


def _hermite_at(X, DX, h, p):
    j = int(p)
    th = p - j
    if th == 0.0:
        return X[j]
    om = 1.0 - th
    return ((1 + 2 * th) * om * om * X[j] + th * om * om * h * DX[j]
            + th * th * (3 - 2 * th) * X[j + 1] + th * th * (th - 1) * h * DX[j + 1])


def solve_uniform_proportional(drift, series_step, x0, sampler, h, n, q, forcing=None):
    """RK4 for x' = drift(x, x(qt)) + F(t) on t_k = k h, k = 0..n.

    ``drift(x, xd)`` acts on state vectors; ``series_step(n, c)`` is the
    matching power-series recursion; ``sampler(t)`` returns F at an array of
    times as shape (len(t), dim).  ``forcing`` (list of specs, one per
    component) enables closed-form series of F for the bootstrap.
    Returns node arrays (X, DX) of shape (n+1, dim).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dim = x0.size
    t = np.arange(n + 1) * h
    F = sampler(t)
    Fm = sampler(t[:-1] + 0.5 * h)
    X = np.empty((n + 1, dim))
    DX = np.empty((n + 1, dim))
    nb = min(int(math.ceil(q / (1 - q))) + 1, n)
    N = 40
    radius = max(nb, 1) * h
    fco = _forcing_coeffs(forcing, sampler, N, radius, dim)
    Xb, Db = _bootstrap_nodes(series_step, fco, x0, h, nb, N)
    X[: nb + 1] = Xb
    DX[: nb + 1] = Db
    half = 0.5 * h
    sixth = h / 6.0
    for k in range(nb, n):
        xk = X[k]
        k1 = DX[k]
        xd2 = _hermite_at(X, DX, h, q * (k + 0.5))
        xd3 = _hermite_at(X, DX, h, q * (k + 1))
        k2 = drift(xk + half * k1, xd2) + Fm[k]
        k3 = drift(xk + half * k2, xd2) + Fm[k]
        k4 = drift(xk + h * k3, xd3) + F[k + 1]
        xn = xk + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X[k + 1] = xn
        DX[k + 1] = drift(xn, xd3) + F[k + 1]
    return X, DX


def _spec_sampler(specs):
    def sample(t):
        return np.stack([s.value(t) for s in specs], axis=1)
    return sample


# ---------------------------------------------------------------------------
# log-time exponential integrator


def _hermite_monomials(v0, v1, d0, d1):
    """Coefficients of the Hermite cubic in theta in [0, 1] (d scaled by h)."""
    return v0, d0, -3 * v0 - 2 * d0 + 3 * v1 - d1, 2 * v0 + d0 - 2 * v1 + d1


def solve_log_proportional(a, b, times, m, X0, D0, f_int, f_nodes):
    """Exponential-integrator steps on the geometric grid ``times``.

    times[0..m] carry the history (values X0, derivatives D0); node k+1 is
    x_{k+1} = e^{bH} x_k + int_0^H e^{b(H-r)} [a x(q(t_k + r))] dr + f_int[k-m].
    Works for vector states with matrix a, b too, via callables; here a and b
    are scalars.
    """
    n = times.size
    dim = X0.shape[1]
    X = np.empty((n, dim))
    DX = np.empty((n, dim))
    X[: m + 1] = X0
    DX[: m + 1] = D0
    H = np.diff(times)
    z = b * H
    ph = phi_functions(z, 4)  # phi_1..phi_4
    ez = np.exp(z)
    for k in range(m, n - 1):
        j = k - m
        hd = H[j]
        p0, p1, p2, p3 = _hermite_monomials(X[j], X[j + 1], hd * DX[j], hd * DX[j + 1])
        delayed = H[k] * a * (p0 * ph[0, k] + p1 * ph[1, k] + 2.0 * p2 * ph[2, k] + 6.0 * p3 * ph[3, k])
        xn = ez[k] * X[k] + delayed + f_int[k - m]
        X[k + 1] = xn
        DX[k + 1] = b * xn + a * X[j + 1] + f_nodes[k + 1 - m]
    return X, DX


# ---------------------------------------------------------------------------
# public solvers


def _as_spec(f):
    if f is None:
        return Zero()
    if isinstance(f, (int, float)):
        return Constant(float(f))
    return f


def solve_pantograph(params, f, x0, grid, history=None):
    """Solve x' = a x(qt) + b x + f(t).

    With a ``UniformTime`` grid the solution starts from x(0) = x0.  With a
    ``LogTime`` grid the history on [q t0, t0] is either computed by a uniform
    bootstrap from x(0) = x0, or taken from ``history`` (a manufactured target
    with ``value``/``deriv`` or a DenseSolution) in which case x0 is ignored.
    Returns a DenseSolution with Hermite dense output.
    """
    f = _as_spec(f)
    a, b, q = params.a, params.b, params.q
    if isinstance(grid, UniformTime):
        drift = lambda x, xd: b * x + a * xd
        step = lambda n, c: (b + a * q ** n) * c
        X, DX = solve_uniform_proportional(drift, step, [x0], _spec_sampler([f]), grid.h,
                                           grid.n_steps, q, forcing=[f])
        return DenseSolution.from_arrays(grid.times(), X, DX, CUBIC_HERMITE)
    if isinstance(grid, LogTime):
        return _solve_logtime(params, f, x0, grid, history)
    raise GridError(f"unsupported grid {grid!r}")


def _solve_logtime(params, f, x0, grid, history):
    a, b, q = params.a, params.b, params.q
    m, ds = grid.resolve(q)
    times = grid.times(q)
    hist_t = times[: m + 1]
    boot = None
    if history is None:
        ub = UniformTime(grid.h_boot, grid.t0)
        if abs(ub.n_steps * ub.h - grid.t0) > 1e-9 * grid.t0:
            raise GridError("t0 must be a multiple of h_boot")
        boot = solve_pantograph(params, f, x0, ub)
        X0 = boot.eval(hist_t)
        X0[-1] = boot.values[-1]
        D0 = b * X0 + a * boot.eval(q * hist_t) + f.value(hist_t)[:, None]
    elif isinstance(history, DenseSolution):
        X0 = history.eval(hist_t)
        D0 = history.deriv(hist_t)
    else:
        X0 = np.asarray(history.value(hist_t), dtype=float)[:, None]
        D0 = np.asarray(history.deriv(hist_t), dtype=float)[:, None]
    fwd = times[m:]
    f_int = integrate_steps(f, fwd, rate=b)
    f_nodes = f.value(fwd)[:, None]
    X, DX = solve_log_proportional(a, b, times, m, X0, D0, f_int, f_nodes)
    if boot is None:
        return DenseSolution.from_arrays(times, X, DX, CUBIC_HERMITE)
    keep = boot.times < grid.t0 * (1 - 1e-12)
    t_all = np.concatenate([boot.times[keep], times[m:]])
    x_all = np.concatenate([boot.values[keep], X[m:]])
    d_all = np.concatenate([boot.derivs[keep], DX[m:]])
    return DenseSolution.from_arrays(t_all, x_all, d_all, CUBIC_HERMITE)


@dataclass(frozen=True)
class DelayFamily:
    """Delay tau(t): ``constant`` (tau0) or ``affine`` (slope*t + offset, 0 <= slope < 1)."""

    kind: str
    tau0: float = 1.0
    slope: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind == "constant":
            if not self.tau0 > 0:
                raise DomainError("constant delay must be positive")
        elif self.kind == "affine":
            if not (0 <= self.slope < 1 and self.offset > 0):
                raise DomainError("affine delay needs 0 <= slope < 1 and offset > 0")
        else:
            raise DomainError(f"unknown delay kind {self.kind!r}")

    def __call__(self, t):
        if self.kind == "constant":
            return np.full_like(np.asarray(t, dtype=float), self.tau0)
        return self.slope * np.asarray(t, dtype=float) + self.offset

    @property
    def tau_min(self):
        return self.tau0 if self.kind == "constant" else self.offset

    @property
    def tau_bar(self):
        """-inf_{t >= 0} (t - tau(t)); attained at t = 0 for these families."""
        return self.tau_min


@dataclass(frozen=True)
class GeneralDelaySpec:
    tau: DelayFamily
    psi: Spec


def solve_general_delay(b, a, spec, f, grid):
    """RK4 for x' = b x + a x(t - tau(t)) + f(t) with x = psi on [-tau_bar, 0]."""
    f = _as_spec(f)
    h = grid.h
    if h >= spec.tau.tau_min:
        raise StepTooLarge(f"h={h} must be below the minimal delay {spec.tau.tau_min}")
    n = grid.n_steps
    t = grid.times()
    F = f.value(t)
    Fm = f.value(t[:-1] + 0.5 * h)
    X = np.empty(n + 1)
    DX = np.empty(n + 1)
    psi = spec.psi

    def delayed(s):
        sd = s - float(spec.tau(s))
        if sd <= 0.0:
            return float(psi.value(sd))
        return float(_hermite_at(X, DX, h, sd / h))

    X[0] = float(psi.value(0.0))
    DX[0] = b * X[0] + a * delayed(0.0) + F[0]
    for k in range(n):
        tk = t[k]
        xk = X[k]
        k1 = DX[k]
        xd2 = delayed(tk + 0.5 * h)
        xd3 = delayed(tk + h)
        k2 = b * (xk + 0.5 * h * k1) + a * xd2 + Fm[k]
        k3 = b * (xk + 0.5 * h * k2) + a * xd2 + Fm[k]
        k4 = b * (xk + h * k3) + a * xd3 + F[k + 1]
        X[k + 1] = xk + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        DX[k + 1] = b * X[k + 1] + a * xd3 + F[k + 1]
    return DenseSolution.from_arrays(t, X, DX, CUBIC_HERMITE)


def solve_aux_y(f, grid):
    """y' = -y + f, y(0) = 0, by the exponential integrator
    y_{k+1} = e^{-h} y_k + int_0^h e^{-(h-u)} f(t_k + u) du.

    ``grid`` is a UniformTime grid or an explicit array of node times.
    """
    f = _as_spec(f)
    t = grid.times() if isinstance(grid, UniformTime) else np.asarray(grid, dtype=float)
    inc = integrate_steps(f, t, rate=-1.0)
    decay = np.exp(-np.diff(t))
    y = np.empty(t.size)
    y[0] = 0.0
    for k in range(t.size - 1):
        y[k + 1] = decay[k] * y[k] + inc[k]
    dy = -y + f.value(t)
    return DenseSolution.from_arrays(t, y, dy, CUBIC_HERMITE)
