"""Trajectory storage with dense output.

A ``DenseSolution`` keeps node times, values and (optionally) node derivatives
and evaluates the trajectory anywhere between the first and last node, either
by cubic Hermite interpolation or piecewise-linearly.  Delay solvers use it to
look up past states such as x(qt).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonFinite, NonMonotoneTime, OutOfDomain

CUBIC_HERMITE = "hermite"
LINEAR = "linear"


@dataclass(frozen=True)
class SampledPath:
    """Read-only view of the stored nodes."""

    times: np.ndarray
    values: np.ndarray
    derivs: Optional[np.ndarray] = None


def hermite_basis(theta):
    """Cubic Hermite basis on [0, 1]: (h00, h10, h01, h11)."""
    th2 = theta * theta
    om = 1.0 - theta
    om2 = om * om
    return (1.0 + 2.0 * theta) * om2, theta * om2, th2 * (3.0 - 2.0 * theta), th2 * (theta - 1.0)


class DenseSolution:
    """Append-only trajectory of a d-dimensional state with dense output.

    Parameters
    ----------
    dim : int, optional
        State dimension.  Inferred from the first appended node if omitted.
    interp : {"hermite", "linear"}
        Interpolant.  Hermite needs a derivative at every node.
    """

    def __init__(self, dim=None, interp=CUBIC_HERMITE, capacity=64):
        if interp not in (CUBIC_HERMITE, LINEAR):
            raise ValueError(f"unknown interpolant {interp!r}")
        self.interp = interp
        self.dim = dim
        self._n = 0
        self._cap = max(int(capacity), 2)
        self._t = np.empty(self._cap)
        self._v = None
        self._d = None

    # construction -----------------------------------------------------
    @classmethod
    def from_arrays(cls, times, values, derivs=None, interp=None):
        """Build a solution from complete node arrays (validated, copied)."""
        t = np.array(times, dtype=float).reshape(-1)
        v = np.array(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != t.size:
            raise ValueError("values and times differ in length")
        if interp is None:
            interp = CUBIC_HERMITE if derivs is not None else LINEAR
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise NonMonotoneTime("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise NonFinite("non-finite node time or value")
        d = None
        if derivs is not None:
            d = np.array(derivs, dtype=float)
            if d.ndim == 1:
                d = d[:, None]
            if d.shape != v.shape:
                raise ValueError("derivs and values differ in shape")
            if not np.all(np.isfinite(d)):
                raise NonFinite("non-finite node derivative")
        elif interp == CUBIC_HERMITE:
            raise ValueError("Hermite interpolation needs node derivatives")
        sol = cls(dim=v.shape[1], interp=interp, capacity=max(t.size, 2))
        sol._t[: t.size] = t
        sol._v = np.empty((sol._cap, v.shape[1]))
        sol._v[: t.size] = v
        if d is not None:
            sol._d = np.empty((sol._cap, v.shape[1]))
            sol._d[: t.size] = d
        sol._n = t.size
        return sol

    def append(self, t, v, dv=None):
        """Store one node; returns ``self`` so calls can be chained."""
        t = float(t)
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if self._n and not t > self._t[self._n - 1]:
            raise NonMonotoneTime(f"t={t!r} not after last time {self._t[self._n - 1]!r}")
        if not (np.isfinite(t) and np.all(np.isfinite(v))):
            raise NonFinite(f"non-finite node at t={t!r}")
        if dv is not None:
            dv = np.atleast_1d(np.asarray(dv, dtype=float))
            if not np.all(np.isfinite(dv)):
                raise NonFinite(f"non-finite derivative at t={t!r}")
        if self._v is None:
            if self.dim is None:
                self.dim = v.size
            self._v = np.empty((self._cap, self.dim))
            if self.interp == CUBIC_HERMITE or dv is not None:
                self._d = np.empty((self._cap, self.dim))
        if v.size != self.dim:
            raise ValueError(f"expected {self.dim} components, got {v.size}")
        if self._d is not None and dv is None:
            if self.interp == CUBIC_HERMITE:
                raise ValueError("Hermite interpolation needs node derivatives")
            self._d = None
        if self._n == self._cap:
            self._grow()
        i = self._n
        self._t[i] = t
        self._v[i] = v
        if self._d is not None:
            self._d[i] = dv
        self._n += 1
        return self

    def _grow(self):
        cap = 2 * self._cap
        t = np.empty(cap)
        t[: self._n] = self._t[: self._n]
        self._t = t
        v = np.empty((cap, self.dim))
        v[: self._n] = self._v[: self._n]
        self._v = v
        if self._d is not None:
            d = np.empty((cap, self.dim))
            d[: self._n] = self._d[: self._n]
            self._d = d
        self._cap = cap

    # access -----------------------------------------------------------
    def __len__(self):
        return self._n

    @property
    def times(self):
        return self._t[: self._n]

    @property
    def values(self):
        if self._v is None:
            return np.empty((0, self.dim or 0))
        return self._v[: self._n]

    @property
    def derivs(self):
        return None if self._d is None else self._d[: self._n]

    @property
    def path(self):
        return SampledPath(self.times.copy(), self.values.copy(),
                           None if self._d is None else self.derivs.copy())

    @property
    def domain(self):
        if not self._n:
            raise OutOfDomain("empty solution")
        return float(self._t[0]), float(self._t[self._n - 1])

    # evaluation -------------------------------------------------------
    def eval(self, t):
        """Interpolated state at time(s) ``t``.

        A scalar ``t`` gives shape (dim,); an array of m times gives (m, dim).
        Node times return the stored value exactly.
        """
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        n = self._n
        if n == 0:
            raise OutOfDomain("empty solution")
        times = self._t[:n]
        if np.any(tt < times[0]) or np.any(tt > times[-1]) or np.any(np.isnan(tt)):
            raise OutOfDomain(f"t outside [{times[0]!r}, {times[-1]!r}]")
        vals = self._v[:n]
        if n == 1:
            out = np.repeat(vals[:1], tt.size, axis=0)
            return out[0] if scalar else out
        idx = np.searchsorted(times, tt, side="right") - 1
        np.clip(idx, 0, n - 2, out=idx)
        t0 = times[idx]
        h = times[idx + 1] - t0
        theta = ((tt - t0) / h)[:, None]
        v0 = vals[idx]
        v1 = vals[idx + 1]
        if self.interp == CUBIC_HERMITE:
            d = self._d[:n]
            h00, h10, h01, h11 = hermite_basis(theta)
            hh = h[:, None]
            out = h00 * v0 + h10 * hh * d[idx] + h01 * v1 + h11 * hh * d[idx + 1]
        else:
            out = v0 + theta * (v1 - v0)
        hit = tt == t0
        if np.any(hit):
            out[hit] = v0[hit]
        top = tt == times[-1]
        if np.any(top):
            out[top] = vals[-1]
        return out[0] if scalar else out

    def deriv(self, t):
        """Derivative of the interpolant (node derivatives are returned as stored)."""
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        n = self._n
        times = self._t[:n]
        if n < 2 or np.any(tt < times[0]) or np.any(tt > times[-1]):
            raise OutOfDomain("t outside stored range")
        idx = np.clip(np.searchsorted(times, tt, side="right") - 1, 0, n - 2)
        t0 = times[idx]
        h = (times[idx + 1] - t0)[:, None]
        theta = ((tt - t0) / h[:, 0])[:, None]
        v0, v1 = self._v[idx], self._v[idx + 1]
        if self.interp == CUBIC_HERMITE:
            d0, d1 = self._d[idx], self._d[idx + 1]
            g00 = 6 * theta * (theta - 1) / h
            g10 = (1 - theta) * (1 - 3 * theta)
            g11 = theta * (3 * theta - 2)
            out = g00 * (v0 - v1) + g10 * d0 + g11 * d1
        else:
            out = (v1 - v0) / h
        return out[0] if scalar else out

    def __call__(self, t, component=0):
        """Evaluate one component; convenient for scalar problems."""
        out = self.eval(t)
        return out[component] if np.ndim(t) == 0 else out[:, component]

    def component(self, i):
        """A new one-dimensional solution holding component ``i``."""
        d = None if self._d is None else self.derivs[:, i]
        return DenseSolution.from_arrays(self.times, self.values[:, i], d, self.interp)

    # serialization ----------------------------------------------------
    def to_csv(self, path):
        """Write nodes as CSV with header ``t,v0[,v1..][,d0..]``."""
        cols = [self.times[:, None], self.values]
        header = ["t"] + [f"v{i}" for i in range(self.dim)]
        if self._d is not None:
            cols.append(self.derivs)
            header += [f"d{i}" for i in range(self.dim)]
        np.savetxt(path, np.hstack(cols), fmt="%.17g", delimiter=",",
                   header=",".join(header), comments="")

    @classmethod
    def from_csv(cls, path, interp=None):
        """Read a CSV written by :meth:`to_csv`."""
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if header[0] != "t":
            raise ValueError("CSV header must start with 't'")
        vcols = [i for i, h in enumerate(header) if h.startswith("v")]
        dcols = [i for i, h in enumerate(header) if h.startswith("d")]
        derivs = data[:, dcols] if dcols else None
        return cls.from_arrays(data[:, 0], data[:, vcols], derivs, interp)
