"""d-dimensional pantograph systems dX = (B X + A X(qt) + f) dt + Sigma dW.

Matrix checks (Lyapunov equation, eigenvalue conditions) and a batched path
simulator.  Simulated states for P paths are stored as one DenseSolution with
P*d components, path-major: column p*d + i is component i of path p.
"""

import math
from dataclasses import dataclass

import numpy as np

from .det_engine import _as_spec, solve_aux_y, solve_uniform_proportional
from .diagnostics import classify_S
from .errors import DimensionMismatch, NotHurwitz, SingularB, SingularSystem, StepTooLarge
from .forcing import RowNorm, Zero
from .history import LINEAR, DenseSolution
from .stoch_engine import (DECOMPOSED, EULER_MARUYAMA, _check_uniform, _linear_at_positions,
                           _uniform_linear_sampler)

MAX_DIM = 8


@dataclass(frozen=True)
class LyapunovResult:
    Q: np.ndarray
    residual: float
    c1: float
    c2: float
    beta: float

    def to_dict(self):
        return {"Q": self.Q.tolist(), "residual": self.residual, "c1": self.c1,
                "c2": self.c2, "beta": self.beta}


def _square(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square")
    if M.shape[0] > MAX_DIM:
        raise DimensionMismatch(f"{name} exceeds the {MAX_DIM}x{MAX_DIM} cap")
    return M


def is_hurwitz(B):
    return bool(np.all(np.linalg.eigvals(_square(B, "B")).real < 0))


def lyapunov_solve(B, A=None):
    """Q with B^T Q + Q B = -I, from the Kronecker form of the equation.

    ``beta`` is the spectral norm of Q A (0 when A is omitted).
    """
    B = _square(B, "B")
    if not is_hurwitz(B):
        raise NotHurwitz("B has an eigenvalue with non-negative real part")
    d = B.shape[0]
    eye = np.eye(d)
    K = np.kron(eye, B.T) + np.kron(B.T, eye)
    try:
        vec = np.linalg.solve(K, -eye.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Lyapunov system is singular") from exc
    Q = vec.reshape((d, d), order="F")
    Q = 0.5 * (Q + Q.T)
    residual = float(np.linalg.norm(B.T @ Q + Q @ B + eye))
    ev = np.linalg.eigvalsh(Q)
    beta = 0.0 if A is None else float(np.linalg.norm(Q @ _square(A, "A"), 2))
    return LyapunovResult(Q, residual, float(ev[0]), float(ev[-1]), beta)


def check_iserles(B, A):
    """Hurwitz property of B and spectral radius of B^{-1} A."""
    B = _square(B, "B")
    A = _square(A, "A")
    if A.shape != B.shape:
        raise DimensionMismatch("A and B differ in shape")
    if np.linalg.cond(B) > 1e14:
        raise SingularB("B is singular")
    hurwitz = is_hurwitz(B)
    rho = float(np.max(np.abs(np.linalg.eigvals(np.linalg.solve(B, A)))))
    return {"hurwitz": hurwitz, "rho": rho, "pass": bool(hurwitz and rho < 1.0)}


def check_stabcond2(B, A):
    """Sufficient condition 4 ||Q A||^2 < c1 / c2 with Q from :func:`lyapunov_solve`."""
    res = lyapunov_solve(B, A)
    lhs = 4.0 * res.beta ** 2
    rhs = res.c1 / res.c2
    return {"lhs": lhs, "rhs": rhs, "pass": bool(lhs < rhs)}


def sigma_row(sigma, i, t):
    """Euclidean norm of row i (0-based) of the intensity matrix at time(s) t."""
    return RowNorm(tuple(sigma[i])).value(t)


def S_i(sigma, i, epsilons=(0.01, 0.1, 1.0, 10.0, 100.0), n_max=1000):
    """S(eps) classification of the row-reduced intensity of row i."""
    return classify_S(RowNorm(tuple(sigma[i])), epsilons, n_max)


@dataclass(frozen=True, eq=False)
class MatrixParams:
    """B, A (d x d), intensity matrix Sigma (d x r specs), forcing f (d specs), q."""

    B: np.ndarray
    A: np.ndarray
    sigma: tuple
    f: tuple
    q: float

    def __post_init__(self):
        B = _square(self.B, "B")
        A = _square(self.A, "A")
        d = B.shape[0]
        if A.shape != B.shape:
            raise DimensionMismatch("A and B differ in shape")
        if not np.any(A):
            raise DimensionMismatch("A must not be the zero matrix")
        sigma = tuple(tuple(_as_spec(s) for s in row) for row in self.sigma)
        if len(sigma) != d or len({len(r) for r in sigma}) != 1:
            raise DimensionMismatch("Sigma must have d rows of equal length")
        if not 1 <= len(sigma[0]) <= MAX_DIM:
            raise DimensionMismatch(f"Sigma needs 1..{MAX_DIM} columns")
        f = tuple(_as_spec(s) for s in self.f) if self.f is not None else (Zero(),) * d
        if len(f) != d:
            raise DimensionMismatch("f must have d entries")
        if not 0 < self.q < 1:
            raise DimensionMismatch("q must lie in (0, 1)")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "f", f)

    @property
    def d(self):
        return self.B.shape[0]

    @property
    def r(self):
        return len(self.sigma[0])


def _apply(M, X):
    """Rows of X (shape (..., d)) multiplied by M^T, summed in a fixed order so the
    result for one path does not depend on how many paths share the batch."""
    out = X[..., 0:1] * M[:, 0]
    for j in range(1, M.shape[1]):
        out = out + X[..., j:j + 1] * M[:, j]
    return out


def _noise(mp, t, inc, P, at):
    """Per-step row sums sum_j sigma_ij(at_k) dW_j, shape (n, P*d); ``at`` gives the
    evaluation times and the step prefactor."""
    d, r = mp.d, mp.r
    when, pref = at
    out = np.zeros((inc.shape[0], P, d))
    W = inc.reshape(inc.shape[0], P, r)
    for i in range(d):
        for j in range(r):
            out[:, :, i] += (pref * mp.sigma[i][j].value(when))[:, None] * W[:, :, j]
    return out.reshape(inc.shape[0], P * d)


def solve_multidim(mp, path, x0, method=DECOMPOSED):
    """Simulate P paths of the d-dimensional system on the path's uniform grid.

    ``path`` holds P*r Brownian columns, path-major (column p*r + j drives
    noise column j of path p).  Noise enters through direct row sums of the
    drivers, so paths stay coupled to their increments.

    ``euler_maruyama``: explicit EM with X(q t_k) by linear interpolation.
    ``decomposed``: Y_i' = -Y_i + f_i + sum_j sigma_ij dW_j (exact decay per
    step), phi = (I + B) Y + A Y(qt), Z' = B Z + A Z(qt) + phi by RK4, X = Z + Y.
    """
    t = path.times
    h = _check_uniform(t)
    d, r = mp.d, mp.r
    if path.increments.shape[1] % r:
        raise DimensionMismatch("number of Brownian columns is not a multiple of r")
    P = path.increments.shape[1] // r
    B, A, q = mp.B, mp.A, mp.q
    if h * float(np.max(np.abs(np.linalg.eigvals(B)))) > 0.5:
        raise StepTooLarge("h times the spectral radius of B exceeds 0.5")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != d:
        raise DimensionMismatch("x0 must have d entries")
    x0 = np.tile(x0, P)
    n = t.size - 1
    steps = np.diff(t)
    if method == EULER_MARUYAMA:
        F = np.tile(np.stack([f.value(t) for f in mp.f], axis=1), (1, P))
        noise = _noise(mp, t[:-1], path.increments, P, (t[:-1], 1.0))
        X = np.empty((n + 1, P * d))
        X[0] = x0
        for k in range(n):
            p = q * k
            j = int(p)
            th = p - j
            xd = X[j] if th == 0.0 else X[j] + th * (X[j + 1] - X[j])
            drift = (_apply(B, X[k].reshape(P, d)) + _apply(A, xd.reshape(P, d))).reshape(-1)
            X[k + 1] = X[k] + h * (drift + F[k]) + noise[k]
        return DenseSolution.from_arrays(t, X, interp=LINEAR)
    if method != DECOMPOSED:
        raise ValueError(f"unknown method {method!r}")
    mid = t[:-1] + 0.5 * steps
    inc = _noise(mp, mid, path.increments, P, (mid, np.exp(-0.5 * steps)))
    decay = np.exp(-steps)
    Y = np.empty((n + 1, P * d))
    Y[0] = 0.0
    y = Y[0]
    for k in range(n):
        y = decay[k] * y + inc[k]
        Y[k + 1] = y
    ydet = np.stack([solve_aux_y(f, t).values[:, 0] for f in mp.f], axis=1)
    Y = Y + np.tile(ydet, (1, P))
    Yq = _linear_at_positions(Y, q * np.arange(n + 1))
    IB = np.eye(d) + B
    phi = (_apply(IB, Y.reshape(n + 1, P, d)) + _apply(A, Yq.reshape(n + 1, P, d))).reshape(n + 1, P * d)

    def drift(x, xd):
        return (_apply(B, x.reshape(P, d)) + _apply(A, xd.reshape(P, d))).reshape(-1)

    def step(k, c):
        return _apply(B + q ** k * A, c.reshape(P, d)).reshape(-1)

    Z, _ = solve_uniform_proportional(drift, step, x0 - Y[0], _uniform_linear_sampler(h, phi), h, n, q)
    return DenseSolution.from_arrays(t, Z + Y, interp=LINEAR)


def path_norms(sol, d):
    """Euclidean norm of each path's state: a DenseSolution with one column per path."""
    V = sol.values
    P = V.shape[1] // d
    norms = np.sqrt(np.sum(V.reshape(V.shape[0], P, d) ** 2, axis=2))
    return DenseSolution.from_arrays(sol.times, norms, interp=LINEAR)


def energy(sol, Q):
    """Quadratic energy X^T Q X of each path (columns), on the nodes of ``sol``."""
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[0]
    V = sol.values
    X = V.reshape(V.shape[0], -1, d)
    return np.einsum("npi,ij,npj->np", X, Q, X)
