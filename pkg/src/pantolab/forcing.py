"""Forcing functions, noise intensities, weights and manufactured targets.

Every forcing family is an immutable object with a vectorized ``value``
method plus the metadata the quadrature routines need: a local resolution
scale (largest safe panel width), kinks or discontinuities of the
derivative (``breakpoints``) and, where one exists, a closed-form window
integral or power series at the origin.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError, OutOfDomain

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
GL_NODES = 0.5 * (_GL_X + 1.0)
GL_WEIGHTS = 0.5 * _GL_W
# monomial coefficients of the Lagrange basis on the GL nodes: p(x) = sum_m C[m, j] x^m g_j
_LAGRANGE = np.linalg.inv(np.vander(GL_NODES, 5, increasing=True))
_FACT = np.array([math.factorial(m) for m in range(5)], dtype=float)

MAX_PANELS = 5_000_000


def _arr(t):
    return np.asarray(t, dtype=float)


class Spec:
    """Base class of the closed function families."""

    kind = "abstract"

    def value(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.value(t)

    def resolution(self, t):
        """Largest panel width over which the function is smooth at ``t``."""
        return math.inf

    def breakpoints(self, lo, hi):
        """Points in (lo, hi) where the function or its derivative has a kink."""
        return np.empty(0)

    def taylor(self, order):
        """Power-series coefficients at 0 if known in closed form, else None."""
        return None

    def taylor_radius(self):
        """Radius around 0 on which :meth:`taylor` is valid."""
        return math.inf

    def window_integral(self, lo, hi):
        """Closed-form integral over [lo, hi] if available, else None."""
        return None

    def to_dict(self):
        raise NotImplementedError

    # arithmetic sugar
    def __add__(self, other):
        return Sum((self, other))

    def __rmul__(self, c):
        return Scale(float(c), self)


@dataclass(frozen=True)
class Zero(Spec):
    kind = "zero"

    def value(self, t):
        return np.zeros_like(_arr(t))

    def taylor(self, order):
        return np.zeros(order + 1)

    def window_integral(self, lo, hi):
        return 0.0

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Constant(Spec):
    c: float
    kind = "constant"

    def value(self, t):
        return np.full_like(_arr(t), self.c)

    def taylor(self, order):
        out = np.zeros(order + 1)
        out[0] = self.c
        return out

    def window_integral(self, lo, hi):
        return self.c * (hi - lo)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class Sinusoid(Spec):
    """amplitude * sin(omega * t + phase)."""

    amplitude: float
    omega: float
    phase: float = 0.0
    kind = "sinusoid"

    def value(self, t):
        return self.amplitude * np.sin(self.omega * _arr(t) + self.phase)

    def resolution(self, t):
        return math.inf if self.omega == 0 else 2 * math.pi / abs(self.omega) / 8

    def taylor(self, order):
        n = np.arange(order + 1)
        fact = np.array([math.factorial(k) for k in n], dtype=float)
        return self.amplitude * self.omega ** n * np.sin(self.phase + n * math.pi / 2) / fact

    def window_integral(self, lo, hi):
        if self.omega == 0:
            return self.amplitude * math.sin(self.phase) * (hi - lo)
        w, p = self.omega, self.phase
        return self.amplitude * (math.cos(w * lo + p) - math.cos(w * hi + p)) / w

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "omega": self.omega, "phase": self.phase}


@dataclass(frozen=True)
class PowerLaw(Spec):
    """C * t**beta for t >= 1 and C below 1."""

    C: float
    beta: float
    kind = "power_law"

    def value(self, t):
        t = _arr(t)
        return self.C * np.where(t >= 1.0, np.maximum(t, 1.0) ** self.beta, 1.0)

    def resolution(self, t):
        return 0.1 * max(t, 1.0)

    def breakpoints(self, lo, hi):
        return np.array([1.0]) if lo < 1.0 < hi else np.empty(0)

    def taylor(self, order):
        out = np.zeros(order + 1)
        out[0] = self.C
        return out

    def taylor_radius(self):
        return 1.0

    def window_integral(self, lo, hi):
        def prim(t):
            if t <= 1.0:
                return self.C * t
            if self.beta == -1.0:
                return self.C * (1.0 + math.log(t))
            return self.C * (1.0 + (t ** (self.beta + 1) - 1.0) / (self.beta + 1))
        return prim(hi) - prim(lo)

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "beta": self.beta}


@dataclass(frozen=True)
class ShiftedPower(Spec):
    """C * (shift + t)**beta, smooth on [0, inf) for shift > 0."""

    C: float
    beta: float
    shift: float = 1.0
    kind = "shifted_power"

    def __post_init__(self):
        if not self.shift > 0:
            raise DomainError("shifted_power needs shift > 0")

    def value(self, t):
        return self.C * (self.shift + _arr(t)) ** self.beta

    def resolution(self, t):
        return 0.1 * (self.shift + max(t, 0.0))

    def taylor(self, order):
        out = np.empty(order + 1)
        coef = 1.0
        for n in range(order + 1):
            out[n] = self.C * coef * self.shift ** (self.beta - n)
            coef *= (self.beta - n) / (n + 1)
        return out

    def taylor_radius(self):
        return self.shift

    def window_integral(self, lo, hi):
        s = self.shift
        if self.beta == -1.0:
            return self.C * math.log((s + hi) / (s + lo))
        p = self.beta + 1.0
        return self.C * ((s + hi) ** p - (s + lo) ** p) / p

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "beta": self.beta, "shift": self.shift}


@dataclass(frozen=True)
class PowerLogLaw(Spec):
    """C * t**beta * (log t)**m for t >= e, held at its value at e below."""

    C: float
    beta: float
    m: float
    kind = "power_log_law"

    def value(self, t):
        t = np.maximum(_arr(t), math.e)
        return self.C * t ** self.beta * np.log(t) ** self.m

    def resolution(self, t):
        return 0.1 * max(t, math.e)

    def breakpoints(self, lo, hi):
        return np.array([math.e]) if lo < math.e < hi else np.empty(0)

    def taylor(self, order):
        out = np.zeros(order + 1)
        out[0] = self.C * math.e ** self.beta
        return out

    def taylor_radius(self):
        return math.e

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "beta": self.beta, "m": self.m}


@dataclass(frozen=True)
class HighFreqOsc(Spec):
    """exp(beta t) * sin(exp(theta t)) with theta > beta > 0.

    The amplitude grows without bound but window averages vanish because the
    frequency grows faster than the amplitude.
    """

    beta: float
    theta: float
    kind = "high_freq_osc"

    def __post_init__(self):
        if not self.theta > self.beta > 0:
            raise DomainError("high_freq_osc needs theta > beta > 0")

    def value(self, t):
        t = _arr(t)
        return np.exp(self.beta * t) * np.sin(np.exp(self.theta * t))

    def resolution(self, t):
        local_period = 2 * math.pi / (self.theta * math.exp(self.theta * t))
        return min(local_period / 8, 0.5 / self.beta)

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta, "theta": self.theta}


@dataclass(frozen=True)
class SequenceRule:
    """Integer sequence rule for spike heights or widths.

    rules: ``constant`` (c), ``linear`` (a*n + b), ``power`` (c*(n+shift)**p),
    ``inv_square`` ((n+shift)**-2), and for widths only ``reciprocal_heights``
    (1/h_n) and ``reciprocal_n_heights`` (1/(n h_n)).
    """

    rule: str
    params: Tuple[Tuple[str, float], ...] = ()

    @classmethod
    def make(cls, rule, **params):
        return cls(rule, tuple(sorted((k, float(v)) for k, v in params.items())))

    def p(self, name, default=None):
        d = dict(self.params)
        if name in d:
            return d[name]
        if default is None:
            raise DomainError(f"sequence rule {self.rule!r} needs parameter {name!r}")
        return default

    def __call__(self, n, heights=None):
        n = np.asarray(n, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.rule == "constant":
                return np.full_like(n, self.p("c"))
            if self.rule == "linear":
                return self.p("a") * n + self.p("b", 0.0)
            if self.rule == "power":
                return self.p("c", 1.0) * (n + self.p("shift", 0.0)) ** self.p("p")
            if self.rule == "inv_square":
                return 1.0 / (n + self.p("shift", 0.0)) ** 2
            if self.rule == "reciprocal_heights":
                return 1.0 / heights
            if self.rule == "reciprocal_n_heights":
                return 1.0 / (n * heights)
        raise DomainError(f"unknown sequence rule {self.rule!r}")

    def to_dict(self):
        return {"rule": self.rule, **dict(self.params)}


@dataclass(frozen=True)
class SpikeTrain(Spec):
    """Triangular spikes of height h_n and base width w_n centred at n + 1/2.

    Indices where h_n is zero or undefined carry no spike.
    """

    heights: SequenceRule
    widths: SequenceRule
    kind = "spike_train"

    def hw(self, n):
        """Heights and widths for integer array ``n``; zero height where no spike."""
        n = np.asarray(n, dtype=float)
        h = self.heights(n)
        w = self.widths(n, heights=h)
        none = ~np.isfinite(h) | (h == 0) | ~np.isfinite(w)
        h = np.where(none, 0.0, h)
        w = np.where(none, 0.5, w)
        if np.any(h < 0) or np.any((w <= 0) | (w > 1)):
            raise DomainError("spike_train needs h_n >= 0 and 0 < w_n <= 1")
        return h, w

    def value(self, t):
        t = _arr(t)
        n = np.floor(t)
        h, w = self.hw(n)
        d = np.abs(t - (n + 0.5))
        return h * np.maximum(0.0, 1.0 - 2.0 * d / w)

    def breakpoints(self, lo, hi):
        n = np.arange(math.floor(lo), math.floor(hi) + 1, dtype=float)
        h, w = self.hw(n)
        n, w = n[h > 0], w[h > 0]
        c = n + 0.5
        pts = np.concatenate([c - w / 2, c, c + w / 2])
        pts = pts[(pts > lo) & (pts < hi)]
        return np.unique(pts)

    def spike_integral(self, n):
        h, w = self.hw(np.atleast_1d(n))
        return 0.5 * w * h

    def _primitive(self, t):
        """Integral of the spike train from 0 to t (vectorized)."""
        t = _arr(t)
        n = np.floor(t)
        top = int(np.max(n)) if n.size else 0
        areas = self.spike_integral(np.arange(max(top, 1), dtype=float))
        cums = np.concatenate([[0.0], np.cumsum(areas)])
        full = cums[n.astype(int)]
        h, w = self.hw(n)
        x = np.clip((t - (n + 0.5 - w / 2)) / w, 0.0, 1.0)  # fraction of the base covered
        part = 0.5 * w * h * np.where(x <= 0.5, 2 * x * x, 1.0 - 2 * (1.0 - x) ** 2)
        return full + part

    def window_integral(self, lo, hi):
        return float(self._primitive(hi) - self._primitive(lo))

    def taylor(self, order):
        return np.zeros(order + 1)

    def taylor_radius(self):
        h, w = self.hw([0.0])
        return 0.5 - w[0] / 2 if h[0] > 0 else 1.0

    def to_dict(self):
        return {"kind": self.kind, "heights": self.heights.to_dict(), "widths": self.widths.to_dict()}


@dataclass(frozen=True)
class Exponential(Spec):
    """C * exp(rate * t)."""

    C: float
    rate: float
    kind = "exponential"

    def value(self, t):
        return self.C * np.exp(self.rate * _arr(t))

    def resolution(self, t):
        return math.inf if self.rate == 0 else 0.5 / abs(self.rate)

    def taylor(self, order):
        n = np.arange(order + 1)
        fact = np.array([math.factorial(k) for k in n], dtype=float)
        return self.C * self.rate ** n / fact

    def window_integral(self, lo, hi):
        if self.rate == 0:
            return self.C * (hi - lo)
        return self.C * (math.exp(self.rate * hi) - math.exp(self.rate * lo)) / self.rate

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "rate": self.rate}


@dataclass(frozen=True, eq=False)
class Tabulated(Spec):
    """Interpolated samples held in a DenseSolution (one component)."""

    sol: object
    component: int = 0
    kind = "tabulated"

    def value(self, t):
        t = _arr(t)
        out = self.sol.eval(t.reshape(-1))[:, self.component]
        return out.reshape(t.shape)

    def breakpoints(self, lo, hi):
        ts = self.sol.times
        return ts[(ts > lo) & (ts < hi)]

    def to_dict(self):
        return {"kind": self.kind, "times": self.sol.times.tolist(),
                "values": self.sol.values[:, self.component].tolist()}


@dataclass(frozen=True)
class Sum(Spec):
    terms: tuple
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def value(self, t):
        out = np.zeros_like(_arr(t))
        for s in self.terms:
            out = out + s.value(t)
        return out

    def resolution(self, t):
        return min((s.resolution(t) for s in self.terms), default=math.inf)

    def breakpoints(self, lo, hi):
        pts = [s.breakpoints(lo, hi) for s in self.terms]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)

    def taylor(self, order):
        parts = [s.taylor(order) for s in self.terms]
        return None if any(p is None for p in parts) else np.sum(parts, axis=0)

    def taylor_radius(self):
        return min((s.taylor_radius() for s in self.terms), default=math.inf)

    def window_integral(self, lo, hi):
        parts = [s.window_integral(lo, hi) for s in self.terms]
        return None if any(p is None for p in parts) else float(sum(parts))

    def to_dict(self):
        return {"kind": self.kind, "terms": [s.to_dict() for s in self.terms]}


@dataclass(frozen=True)
class Scale(Spec):
    c: float
    spec: Spec
    kind = "scale"

    def value(self, t):
        return self.c * self.spec.value(t)

    def resolution(self, t):
        return self.spec.resolution(t)

    def breakpoints(self, lo, hi):
        return self.spec.breakpoints(lo, hi)

    def taylor(self, order):
        s = self.spec.taylor(order)
        return None if s is None else self.c * s

    def taylor_radius(self):
        return self.spec.taylor_radius()

    def window_integral(self, lo, hi):
        s = self.spec.window_integral(lo, hi)
        return None if s is None else self.c * s

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "spec": self.spec.to_dict()}


@dataclass(frozen=True)
class Shift(Spec):
    """spec(t + delta); delta >= 0 keeps the argument in [0, inf)."""

    delta: float
    spec: Spec
    kind = "shift"

    def value(self, t):
        return self.spec.value(_arr(t) + self.delta)

    def resolution(self, t):
        return self.spec.resolution(t + self.delta)

    def breakpoints(self, lo, hi):
        return self.spec.breakpoints(lo + self.delta, hi + self.delta) - self.delta

    def window_integral(self, lo, hi):
        return self.spec.window_integral(lo + self.delta, hi + self.delta)

    def to_dict(self):
        return {"kind": self.kind, "delta": self.delta, "spec": self.spec.to_dict()}


@dataclass(frozen=True)
class RowNorm(Spec):
    """Euclidean norm of a row of intensities: sqrt(sum_j s_j(t)**2)."""

    specs: tuple
    kind = "row_norm"

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))

    def value(self, t):
        acc = np.zeros_like(_arr(t))
        for s in self.specs:
            acc = acc + s.value(t) ** 2
        return np.sqrt(acc)

    def resolution(self, t):
        return min((s.resolution(t) for s in self.specs), default=math.inf)

    def breakpoints(self, lo, hi):
        pts = [s.breakpoints(lo, hi) for s in self.specs]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)

    def to_dict(self):
        return {"kind": self.kind, "specs": [s.to_dict() for s in self.specs]}


# ---------------------------------------------------------------------------
# manufactured targets


@dataclass(frozen=True)
class PsiFamily:
    """Integrand families psi with closed-form antiderivative.

    ``inv``: 1/t.  ``inv_log_sq``: 1/(u log(u)**2) with u = e + t (shifted so
    it is finite on (0, inf)).  ``power``: t**rho with rho > -1.
    """

    name: str
    rho: float = 0.0

    def __post_init__(self):
        if self.name not in ("inv", "inv_log_sq", "power"):
            raise DomainError(f"unknown psi family {self.name!r}")
        if self.name == "power" and not self.rho > -1:
            raise DomainError("power psi needs rho > -1")

    def psi(self, t):
        t = _arr(t)
        if self.name == "inv":
            return 1.0 / t
        if self.name == "inv_log_sq":
            u = math.e + t
            return 1.0 / (u * np.log(u) ** 2)
        return t ** self.rho

    def antiderivative(self, t):
        t = _arr(t)
        if self.name == "inv":
            return np.log(t)
        if self.name == "inv_log_sq":
            return -1.0 / np.log(math.e + t)
        return t ** (self.rho + 1) / (self.rho + 1)

    def integral(self, lo, t):
        return self.antiderivative(t) - self.antiderivative(lo)

    def to_dict(self):
        return {"name": self.name, "rho": self.rho}


class ZSpec:
    """Closed-form target trajectory z with derivative, defined for t > 0."""

    def value(self, t):
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.value(t)

    def _check(self, t):
        t = _arr(t)
        if np.any(t <= 0):
            raise DomainError("manufactured target is defined for t > 0 only")
        return t


@dataclass(frozen=True)
class ZeroZ(ZSpec):
    def value(self, t):
        return np.zeros_like(_arr(t))

    def deriv(self, t):
        return np.zeros_like(_arr(t))

    def to_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class PurePower(ZSpec):
    """D * t**kappa."""

    D: float
    kappa: float

    def value(self, t):
        return self.D * self._check(t) ** self.kappa

    def deriv(self, t):
        return self.D * self.kappa * self._check(t) ** (self.kappa - 1)

    def to_dict(self):
        return {"kind": "pure_power", "D": self.D, "kappa": self.kappa}


@dataclass(frozen=True)
class PowerTimesPsiIntegral(ZSpec):
    """D * t**kappa * Psi(t) with Psi(t) = integral of psi from 1/q to t."""

    D: float
    kappa: float
    psi: PsiFamily
    q: float = 0.5

    def Psi(self, t):
        return self.psi.integral(1.0 / self.q, t)

    def value(self, t):
        t = self._check(t)
        return self.D * t ** self.kappa * self.Psi(t)

    def deriv(self, t):
        t = self._check(t)
        return self.D * (self.kappa * t ** (self.kappa - 1) * self.Psi(t) + t ** self.kappa * self.psi.psi(t))

    def to_dict(self):
        return {"kind": "power_times_psi_integral", "D": self.D, "kappa": self.kappa,
                "psi": self.psi.to_dict(), "q": self.q}


@dataclass(frozen=True)
class PowerLogPeriodic(ZSpec):
    """t**kappa * (C + sin(omega log t)) + D t**kappa * integral of psi from q to t,
    with omega = 2 pi / log(1/q)."""

    C: float
    D: float
    kappa: float
    q: float
    psi: PsiFamily

    @property
    def omega(self):
        return 2 * math.pi / math.log(1.0 / self.q)

    def value(self, t):
        t = self._check(t)
        tk = t ** self.kappa
        return tk * (self.C + np.sin(self.omega * np.log(t))) + self.D * tk * self.psi.integral(self.q, t)

    def deriv(self, t):
        t = self._check(t)
        k, w = self.kappa, self.omega
        tk1 = t ** (k - 1)
        osc = k * (self.C + np.sin(w * np.log(t))) + w * np.cos(w * np.log(t))
        integ = self.D * (k * tk1 * self.psi.integral(self.q, t) + t ** k * self.psi.psi(t))
        return tk1 * osc + integ

    def to_dict(self):
        return {"kind": "power_log_periodic", "C": self.C, "D": self.D, "kappa": self.kappa,
                "q": self.q, "psi": self.psi.to_dict()}


@dataclass(frozen=True, eq=False)
class Manufactured(Spec):
    """phi(t) = z'(t) - b z(t) - a z(qt): forcing whose solution is exactly z."""

    z: ZSpec
    a: float
    b: float
    q: float
    kind = "manufactured"

    def value(self, t):
        t = _arr(t)
        return self.z.deriv(t) - self.b * self.z.value(t) - self.a * self.z.value(self.q * t)

    def resolution(self, t):
        return 0.05 * max(t, 1e-12)

    def to_dict(self):
        return {"kind": self.kind, "z": self.z.to_dict(), "a": self.a, "b": self.b, "q": self.q}


def manufactured_phi(z, a, b, q, t_range=None):
    """Forcing phi = z' - b z - a z(q t) whose induced solution is z.

    ``t_range`` (lo, hi) optionally checks that z is defined at q*lo.
    """
    if a == 0:
        raise DomainError("manufactured forcing needs a != 0")
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    if isinstance(z, ZeroZ):
        return Zero()
    if t_range is not None and not q * t_range[0] > 0:
        raise DomainError("target undefined at q*t for the requested range")
    return Manufactured(z, float(a), float(b), float(q))


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class RegularlyVarying:
    """t**eta times (log t)**log_power (the log factor is held at 1 below t = e)."""

    eta: float
    log_power: float = 0.0

    def __call__(self, t):
        t = _arr(t)
        slow = np.log(np.maximum(t, math.e)) ** self.log_power if self.log_power else 1.0
        return t ** self.eta * slow

    def to_dict(self):
        return {"kind": "regularly_varying", "eta": self.eta, "log_power": self.log_power}


_MONOTONE = {
    "exp": lambda t, p: np.exp(p.get("rate", 1.0) * t),
    "power_shift": lambda t, p: (1.0 + t) ** p.get("p", 1.0),
    "exp_sqrt": lambda t, p: np.exp(p.get("c", 1.0) * np.sqrt(t)),
}

_SUBEXP = {
    "exp_sqrt": lambda t: np.exp(np.sqrt(t)),
    "log": lambda t: np.log(math.e + t),
    "power": lambda t: 1.0 + t,
}


@dataclass(frozen=True)
class MonotoneC1:
    family: str
    params: Tuple[Tuple[str, float], ...] = ()

    def __call__(self, t):
        return _MONOTONE[self.family](_arr(t), dict(self.params))

    def to_dict(self):
        return {"kind": "monotone_c1", "family": self.family, **dict(self.params)}


@dataclass(frozen=True)
class Subexponential:
    family: str

    def __call__(self, t):
        return _SUBEXP[self.family](_arr(t))

    def to_dict(self):
        return {"kind": "subexponential", "family": self.family}


def eval_weight(gamma, t):
    """Positive weight value gamma(t) for t > 0."""
    if np.any(_arr(t) <= 0):
        raise DomainError("weights are evaluated on t > 0")
    return gamma(t)


# ---------------------------------------------------------------------------
# evaluation and quadrature


def eval_f(spec, t):
    """Evaluate a forcing/noise spec at t >= 0."""
    if np.any(_arr(t) < 0):
        raise DomainError("forcing is defined on t >= 0")
    out = spec.value(t)
    return float(out) if np.ndim(out) == 0 else out


def spike_window_integral(spec, n):
    """Area of spike n: w_n h_n / 2."""
    if n < 0:
        raise DomainError("spike index must be non-negative")
    return float(spec.spike_integral(n)[0])


def panel_edges(spec, lo, hi, extra=None):
    """Sorted panel edges covering [lo, hi] that respect the spec's kinks and
    resolution scale (for oscillatory families each panel spans at most an
    eighth of the local period)."""
    pts = [np.array([lo, hi], dtype=float), spec.breakpoints(lo, hi)]
    if extra is not None:
        pts.append(np.asarray(extra, dtype=float))
    walk = []
    u = lo
    while True:
        w = spec.resolution(u)
        if not math.isfinite(w) or u + w >= hi:
            break
        u += w
        walk.append(u)
        if len(walk) > MAX_PANELS:
            raise DomainError("quadrature needs too many panels; shorten the horizon")
    pts.append(np.array(walk))
    edges = np.unique(np.concatenate(pts))
    return edges[(edges >= lo) & (edges <= hi)]


def phi_functions(z, kmax=5):
    """phi_k(z) = int_0^1 exp((1-s) z) s**(k-1)/(k-1)! ds for k = 1..kmax.

    Returns an array of shape (kmax,) + z.shape.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty((kmax,) + z.shape)
    small = np.abs(z) < 2.0
    if np.any(small):
        zs = z[small]
        for k in range(1, kmax + 1):
            term = np.full_like(zs, 1.0 / math.factorial(k))
            acc = term.copy()
            for i in range(1, 40):
                term = term * zs / (i + k)
                acc = acc + term
            out[k - 1][small] = acc
    if np.any(~small):
        zb = z[~small]
        with np.errstate(over="ignore"):
            prev = np.exp(zb)
        for k in range(1, kmax + 1):
            prev = (prev - 1.0 / math.factorial(k - 1)) / zb
            out[k - 1][~small] = prev
    return out


def _panel_sums(spec, a, w, end, rate, power):
    """Weighted integrals over panels [a, a+w] with kernel exp(rate (end - u))."""
    u = a[:, None] + w[:, None] * GL_NODES[None, :]
    g = spec.value(u)
    if power != 1:
        g = g ** power
    if rate == 0.0:
        return w * (g @ GL_WEIGHTS)
    z = rate * w
    out = np.empty(a.size)
    direct = np.abs(z) <= 0.5
    if np.any(direct):
        ker = np.exp(rate * (end[direct, None] - u[direct]))
        out[direct] = w[direct] * ((ker * g[direct]) @ GL_WEIGHTS)
    fit = ~direct
    if np.any(fit):
        # interpolate g by a quartic and integrate it against the exponential exactly
        ph = phi_functions(z[fit])  # (5, m)
        wts = (_LAGRANGE * _FACT[:, None]).T @ ph  # (5 nodes, m)
        with np.errstate(over="ignore"):
            pref = np.exp(rate * (end[fit] - a[fit] - w[fit]))
        out[fit] = w[fit] * pref * np.einsum("ij,ji->i", g[fit], wts)
    return out


def integrate(spec, lo, hi, power=1, rate=0.0):
    """Integral over [lo, hi] of exp(rate (hi - u)) * spec(u)**power.

    Composite 5-point Gauss-Legendre on panels from :func:`panel_edges`;
    when the exponential kernel varies strongly across a panel the panel is
    handled by quartic interpolation integrated exactly against the kernel.
    """
    if hi < lo:
        return -integrate(spec, hi, lo, power, rate)
    if hi == lo:
        return 0.0
    e = panel_edges(spec, lo, hi)
    a, w = e[:-1], np.diff(e)
    return float(np.sum(_panel_sums(spec, a, w, np.full(a.size, hi), rate, power)))


def integrate_steps(spec, times, rate=0.0, power=1):
    """Per-step integrals  int_{t_k}^{t_{k+1}} exp(rate (t_{k+1} - u)) spec(u)**power du.

    Returns an array of length len(times) - 1.
    """
    times = np.asarray(times, dtype=float)
    e = panel_edges(spec, times[0], times[-1], extra=times)
    a, w = e[:-1], np.diff(e)
    step = np.clip(np.searchsorted(times, a, side="right") - 1, 0, times.size - 2)
    vals = _panel_sums(spec, a, w, times[step + 1], rate, power)
    return np.bincount(step, weights=vals, minlength=times.size - 1)


def taylor_coeffs(spec, order, radius):
    """Power-series coefficients of ``spec`` at 0, valid on [0, radius].

    Closed forms are used where the family provides them; otherwise a
    Chebyshev fit of degree min(order, 10) on [0, radius] is converted to the
    monomial basis (adequate for the short bootstrap interval).
    """
    exact = spec.taylor(order) if radius <= spec.taylor_radius() else None
    if exact is not None:
        return np.asarray(exact, dtype=float)
    deg = min(order, 10)
    k = np.arange(deg + 1)
    x = 0.5 * radius * (1 - np.cos(np.pi * (k + 0.5) / (deg + 1)))
    poly = np.polynomial.Polynomial.fit(x, spec.value(x), deg, domain=[0.0, radius]).convert()
    out = np.zeros(order + 1)
    out[: poly.coef.size] = poly.coef
    return out


# ---------------------------------------------------------------------------
# JSON


def _rule_from_dict(d, path):
    if not isinstance(d, dict) or "rule" not in d:
        from .errors import ConfigError
        raise ConfigError(path, "sequence rule needs a 'rule' field")
    params = {k: v for k, v in d.items() if k != "rule"}
    return SequenceRule.make(d["rule"], **params)


def psi_from_dict(d):
    if isinstance(d, str):
        return PsiFamily(d)
    return PsiFamily(d["name"], float(d.get("rho", 0.0)))


def zspec_from_dict(d):
    kind = d.get("kind")
    if kind == "zero":
        return ZeroZ()
    if kind == "pure_power":
        return PurePower(float(d["D"]), float(d["kappa"]))
    if kind == "power_times_psi_integral":
        return PowerTimesPsiIntegral(float(d["D"]), float(d["kappa"]), psi_from_dict(d["psi"]),
                                     float(d.get("q", 0.5)))
    if kind == "power_log_periodic":
        return PowerLogPeriodic(float(d["C"]), float(d["D"]), float(d["kappa"]), float(d["q"]),
                                psi_from_dict(d["psi"]))
    raise DomainError(f"unknown target kind {kind!r}")


def spec_from_dict(d, path="spec"):
    """Parse the JSON form of a forcing/noise spec.  Errors name the field path."""
    from .errors import ConfigError
    from .history import DenseSolution

    if isinstance(d, (int, float)):
        return Constant(float(d))
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(path, "expected an object with a 'kind' field")
    kind = d["kind"]

    def num(name, default=None):
        if name not in d:
            if default is None:
                raise ConfigError(f"{path}.{name}", "missing")
            return default
        try:
            return float(d[name])
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.{name}", "not a number") from None

    try:
        if kind == "zero":
            return Zero()
        if kind == "constant":
            return Constant(num("c"))
        if kind == "sinusoid":
            return Sinusoid(num("amplitude"), num("omega"), num("phase", 0.0))
        if kind == "power_law":
            return PowerLaw(num("C"), num("beta"))
        if kind == "shifted_power":
            return ShiftedPower(num("C"), num("beta"), num("shift", 1.0))
        if kind == "power_log_law":
            return PowerLogLaw(num("C"), num("beta"), num("m"))
        if kind == "high_freq_osc":
            return HighFreqOsc(num("beta"), num("theta"))
        if kind == "spike_train":
            return SpikeTrain(_rule_from_dict(d.get("heights"), f"{path}.heights"),
                              _rule_from_dict(d.get("widths"), f"{path}.widths"))
        if kind == "exponential":
            return Exponential(num("C"), num("rate"))
        if kind == "manufactured":
            return manufactured_phi(zspec_from_dict(d["z"]), num("a"), num("b"), num("q"))
        if kind == "tabulated":
            if "csv" in d:
                sol = DenseSolution.from_csv(d["csv"])
            else:
                sol = DenseSolution.from_arrays(d["times"], d["values"])
            return Tabulated(sol, int(d.get("component", 0)))
        if kind == "sum":
            return Sum(tuple(spec_from_dict(s, f"{path}.terms[{i}]") for i, s in enumerate(d["terms"])))
        if kind == "scale":
            return Scale(num("c"), spec_from_dict(d["spec"], f"{path}.spec"))
        if kind == "shift":
            return Shift(num("delta"), spec_from_dict(d["spec"], f"{path}.spec"))
        if kind == "row_norm":
            return RowNorm(tuple(spec_from_dict(s, f"{path}.specs[{i}]") for i, s in enumerate(d["specs"])))
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}", "missing") from None
    raise ConfigError(f"{path}.kind", f"unknown kind {kind!r}")


def weight_from_dict(d, path="weight"):
    from .errors import ConfigError

    kind = d.get("kind")
    if kind == "regularly_varying":
        return RegularlyVarying(float(d["eta"]), float(d.get("log_power", 0.0)))
    if kind == "monotone_c1":
        params = tuple(sorted((k, float(v)) for k, v in d.items() if k not in ("kind", "family")))
        return MonotoneC1(d["family"], params)
    if kind == "subexponential":
        return Subexponential(d["family"])
    raise ConfigError(f"{path}.kind", f"unknown weight kind {kind!r}")
