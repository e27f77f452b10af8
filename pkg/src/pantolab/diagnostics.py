"""Asymptotic functionals and classifiers evaluated on finite runs.

Everything here approximates a limit (lim, limsup, series finiteness) by a
finite computation, so each result carries the windows and thresholds it used.
Windows are spaced in log t throughout, since the behaviour of interest is
power laws and log-periodic oscillation.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (AllBelowFloor, InsufficientDomain, UndefinedKappa, WindowTooShort,
                     DomainError)
from .forcing import eval_weight, integrate, integrate_steps

LOG_LOG_SLOPE = "LogLogSlope"
RUN_MAX_ENVELOPE = "RunMaxEnvelope"
RATIO_VS_WEIGHT = "RatioVsWeight"

BIG_O = "BigO"
LITTLE_O = "LittleO"
EXACT_ORDER = "ExactOrder"
NOT_BIG_O = "NotBigO"

CONVERGENT = "Convergent"
DIVERGENT = "Divergent"
INCONCLUSIVE = "Inconclusive"
ALL_FINITE = "AllFinite"
ALL_INFINITE = "AllInfinite"
FINITE_ABOVE_THRESHOLD = "FiniteAboveThreshold"

CONVERGES_TO_ZERO = "ConvergesToZero"
CONVERGES_TO = "ConvergesTo"
BOUNDED_NONCONVERGENT = "BoundedNonconvergent"
UNBOUNDED = "Unbounded"

DEFAULTS = {
    "ztol": 0.05,
    "mtol": 1e-2,
    "growth": 2.0,
    "slope_tol": 0.05,
    "exact_floor": 0.1,
    "envelope_slack": 1.05,
    "blocks_per_decade": 3,
    "theta_points": 33,
}


def _clean(x):
    """JSON-safe copy: numpy scalars/arrays to python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


# ---------------------------------------------------------------------------
# scalar functionals


def kappa(a, b, q):
    """Decay exponent -log|b/a| / log(1/q)."""
    if b == 0:
        raise UndefinedKappa("kappa needs b != 0")
    if a == 0:
        raise UndefinedKappa("kappa needs a != 0")
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    return -math.log(abs(b / a)) / math.log(1.0 / q)


def f_theta(f, t, theta):
    """Window integral of f over [(t - theta)^+, t]."""
    if t < 0 or not 0 <= theta <= 1:
        raise DomainError("f_theta needs t >= 0 and theta in [0, 1]")
    lo = max(t - theta, 0.0)
    exact = f.window_integral(lo, t)
    return float(exact) if exact is not None else integrate(f, lo, t)


def sup_f_theta(f, t, thetas=None):
    """max over a theta grid in [0, 1] (default 33 points) of |f_theta(t)|."""
    if thetas is None:
        thetas = np.linspace(0.0, 1.0, DEFAULTS["theta_points"])
    return max(abs(f_theta(f, t, th)) for th in thetas)


def sigma2_1(sigma, t):
    """Integral of sigma^2 over [(t - 1)^+, t]."""
    if t < 0:
        raise DomainError("sigma2_1 needs t >= 0")
    return integrate(sigma, max(t - 1.0, 0.0), t, power=2)


def window_sigma2(sigma, n_max):
    """Unit-window integrals of sigma^2 over [n-1, n] for n = 1..n_max."""
    return integrate_steps(sigma, np.arange(n_max + 1, dtype=float), power=2)


# ---------------------------------------------------------------------------
# S(eps) series


@dataclass
class SClassification:
    epsilons: list
    n_max: int
    partial_sums: dict  # eps -> partial sums at N = 1..n_max (sampled)
    verdicts: dict  # eps -> Convergent / Divergent / Inconclusive
    growth_exponents: dict  # eps -> fitted delta of S_N ~ N^delta on the last decade
    overall: str
    threshold: Optional[float] = None
    log_condition: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["partial_sums"] = {repr(k): v for k, v in self.partial_sums.items()}
        d["verdicts"] = {repr(k): v for k, v in self.verdicts.items()}
        d["growth_exponents"] = {repr(k): v for k, v in self.growth_exponents.items()}
        return _clean(d)


def _series_verdict(terms, ratio_tol=0.99, delta_min=0.01):
    n_max = terms.size
    lo = max(n_max // 10, 1)
    tail = terms[lo - 1:]
    S = np.cumsum(terms)
    if np.all(tail < 1e-300):
        return CONVERGENT, 0.0
    pos = tail[tail >= 1e-300]
    n = np.arange(lo, n_max + 1, dtype=float)
    delta = float(np.polyfit(np.log(n), np.log(S[lo - 1:]), 1)[0]) if S[lo - 1] > 0 else 0.0
    if pos.size >= 2 and np.all(pos[1:] / pos[:-1] < ratio_tol):
        return CONVERGENT, delta
    if delta > delta_min:
        return DIVERGENT, delta
    return INCONCLUSIVE, delta


def classify_S(sigma, epsilons=(0.01, 0.1, 1.0, 10.0, 100.0), n_max=1000):
    """Finiteness pattern of S(eps) = sum_n sqrt(s_n) exp(-eps s_n), s_n = sigma2_1(n).

    Per eps: Convergent if the terms of the last decade (N/10..N) fall
    geometrically (all successive ratios < 0.99) or underflow below 1e-300;
    Divergent if the partial sums grow like N^delta with delta > 0.01 on that
    decade; Inconclusive otherwise.  Also reports sigma2_1(n) log n on the last
    decade, which tends to zero exactly when the solution converges for
    monotone sigma2_1.
    """
    if n_max < 1000:
        raise DomainError("classify_S needs n_max >= 1000")
    eps = sorted(float(e) for e in epsilons)
    s = np.maximum(window_sigma2(sigma, n_max), 0.0)
    sums, verdicts, deltas = {}, {}, {}
    sample = np.unique(np.geomspace(1, n_max, 25).astype(int))
    for e in eps:
        terms = np.sqrt(s) * np.exp(-e * s)
        v, d = _series_verdict(terms)
        verdicts[e], deltas[e] = v, d
        sums[e] = {int(k): float(x) for k, x in zip(sample, np.cumsum(terms)[sample - 1])}
    vs = [verdicts[e] for e in eps]
    threshold = None
    if all(v == CONVERGENT for v in vs):
        overall = ALL_FINITE
    elif all(v == DIVERGENT for v in vs):
        overall = ALL_INFINITE
    elif INCONCLUSIVE not in vs and vs[0] == DIVERGENT and vs[-1] == CONVERGENT \
            and vs == sorted(vs, key=lambda v: v == CONVERGENT):
        overall = FINITE_ABOVE_THRESHOLD
        threshold = next(e for e in eps if verdicts[e] == CONVERGENT)
    else:
        overall = INCONCLUSIVE
    n = np.arange(max(n_max // 10, 2), n_max + 1)
    cond = s[n - 1] * np.log(n)
    log_condition = {"first": float(cond[0]), "last": float(cond[-1]),
                     "decreasing": bool(cond[-1] < cond[0])}
    return SClassification(eps, int(n_max), sums, verdicts, deltas, overall, threshold, log_condition)


# ---------------------------------------------------------------------------
# rate estimation


@dataclass
class RateEstimate:
    exponent: float
    method: str
    window: tuple
    residual: float
    verdict: Optional[str] = None
    thresholds: dict = field(default_factory=dict)
    blocks: list = field(default_factory=list)  # (t_at_sup, sup) per block
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return _clean(asdict(self))


def _window(sol, window):
    lo, hi = sol.domain
    if window is None:
        window = (max(lo, 1e-300) if lo > 0 else min(1.0, hi / 10.0), hi)
    t1, t2 = float(window[0]), float(window[1])
    if t1 < lo or t2 > hi or t1 <= 0:
        raise WindowTooShort(f"window [{t1}, {t2}] is not inside the domain [{lo}, {hi}]")
    if t2 < 10.0 * t1 * (1 - 1e-12):
        raise WindowTooShort("window must span at least one decade in t")
    return t1, t2


def _samples(sol, lo, hi, component, per_block=256):
    """Node times inside [lo, hi] plus a log-spaced sample, with |values|."""
    t = sol.times
    inner = t[(t >= lo) & (t <= hi)]
    tt = np.union1d(inner, np.geomspace(lo, hi, per_block))
    return tt, sol.eval(tt)[:, component]


def block_sups(sol, window=None, per_decade=None, component=0, transform=None):
    """Sup of |x| (or |transform(t, x)|) over log-spaced blocks of the window.

    Returns arrays (t_at_sup, sup) with one entry per block.
    """
    t1, t2 = _window(sol, window)
    per_decade = per_decade or DEFAULTS["blocks_per_decade"]
    nb = max(int(round(per_decade * math.log10(t2 / t1))), 1)
    edges = np.geomspace(t1, t2, nb + 1)
    ts, sups = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        tt, xx = _samples(sol, lo, hi, component)
        y = np.abs(xx if transform is None else transform(tt, xx))
        i = int(np.argmax(y))
        ts.append(tt[i])
        sups.append(y[i])
    return np.array(ts), np.array(sups)


def _fit(x, y):
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = math.sqrt(float(res[0]) / x.size) if res.size else 0.0
    return float(coef[0]), resid


def estimate_exponent(sol, window=None, method=RUN_MAX_ENVELOPE, component=0,
                      weight=None, floor=1e-300, slope_tol=None, per_decade=None):
    """Power-law exponent of |x(t)| over a window of at least one decade.

    LogLogSlope: least squares of log|x| on log t over nodes with |x| > floor.
    RunMaxEnvelope: least squares of log(block sup |x|) on log(time of the sup),
    with blocks a third of a decade wide; insensitive to sign changes and
    log-periodic oscillation as long as each block holds one period.
    RatioVsWeight: block sups of |x|/weight(t); the exponent is their trend
    slope in log-log scale.  Verdict LittleO if slope < -tol, BigO if
    |slope| <= tol (ExactOrder if additionally every block sup is >= 10% of
    the largest), NotBigO if slope > tol.
    """
    t1, t2 = _window(sol, window)
    tol = DEFAULTS["slope_tol"] if slope_tol is None else slope_tol
    thresholds = {"floor": floor}
    if method == LOG_LOG_SLOPE:
        t = sol.times
        x = np.abs(sol.values[:, component])
        keep = (t >= t1) & (t <= t2) & (x > floor)
        if not np.any((t >= t1) & (t <= t2) & (x > floor)):
            raise AllBelowFloor("no node above the floor in the window")
        if keep.sum() < 2:
            raise WindowTooShort("fewer than two usable nodes in the window")
        slope, resid = _fit(np.log(t[keep]), np.log(x[keep]))
        return RateEstimate(slope, method, (t1, t2), resid, None, thresholds)
    transform = None
    if method == RATIO_VS_WEIGHT:
        if weight is None:
            raise DomainError("RatioVsWeight needs a weight")
        transform = lambda t, x: x / eval_weight(weight, t)
    elif method != RUN_MAX_ENVELOPE:
        raise DomainError(f"unknown method {method!r}")
    ts, sups = block_sups(sol, (t1, t2), per_decade, component, transform)
    if np.all(sups <= floor):
        raise AllBelowFloor("every block sup is below the floor")
    keep = sups > floor
    if keep.sum() < 2:
        raise WindowTooShort("fewer than two usable blocks")
    slope, resid = _fit(np.log(ts[keep]), np.log(sups[keep]))
    blocks = [(float(a), float(b)) for a, b in zip(ts, sups)]
    verdict = None
    extra = {}
    if method == RATIO_VS_WEIGHT:
        thresholds.update(slope_tol=tol, exact_floor=DEFAULTS["exact_floor"])
        extra["sup_ratio"] = float(sups.max())
        if slope < -tol:
            verdict = LITTLE_O
        elif slope > tol:
            verdict = NOT_BIG_O
        elif sups.min() >= DEFAULTS["exact_floor"] * sups.max():
            verdict = EXACT_ORDER
        else:
            verdict = BIG_O
    return RateEstimate(slope, method, (t1, t2), resid, verdict, thresholds, blocks, extra)


# ---------------------------------------------------------------------------
# Perron ratios


@dataclass(frozen=True)
class KappaLogT:
    kappa: float
    name = "kappa_log_t"

    def __call__(self, t):
        return self.kappa * np.log(t)


@dataclass(frozen=True)
class EtaLogT:
    eta: float
    name = "eta_log_t"

    def __call__(self, t):
        return self.eta * np.log(t)


@dataclass(frozen=True)
class Custom:
    func: Callable
    name: str = "custom"

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))


def perron_ratio(sol, theta, window=None, component=0, per_decade=None):
    """Block values of log(sup|x|) / theta(t), theta evaluated where the sup occurs.

    The ratio is taken literally, signs included: x = t^-2 with theta = -log t
    gives 2.  ``exponent`` is the largest block ratio (a finite stand-in for
    the limsup); ``extra['trend']`` is the slope of the block ratios against log t.
    """
    ts, sups = block_sups(sol, window, per_decade, component)
    if np.all(sups <= 0):
        raise AllBelowFloor("solution vanishes on the window")
    th = theta(ts)
    keep = (sups > 0) & (th != 0)
    if not np.any(keep):
        raise AllBelowFloor("no block with a usable sup and nonzero theta")
    ratios = np.log(sups[keep]) / th[keep]
    trend = float(np.polyfit(np.log(ts[keep]), ratios, 1)[0]) if keep.sum() >= 2 else 0.0
    resid = float(np.std(ratios))
    return RateEstimate(float(np.max(ratios)), "PerronRatio", _window(sol, window), resid,
                        None, {"theta": theta.name}, [(float(a), float(b)) for a, b in zip(ts, sups)],
                        {"trend": trend, "ratios": ratios.tolist(), "last": float(ratios[-1])})


# ---------------------------------------------------------------------------
# K_n sequences


def _log_intervals(params, s0, n_max, hi):
    step = -math.log(params.q)  # = -c > 0
    n_fit = int(math.floor((math.log(hi) - s0) / step + 1e-9)) - 1
    if n_max is None:
        n_max = n_fit
    if n_max < 1 or n_max > n_fit:
        raise InsufficientDomain("solution does not cover the requested log-time intervals")
    return step, n_max


def default_s0(sol):
    """s0 = log of the first node time, or 0 when the solution starts at or below t = 1."""
    lo = sol.domain[0]
    return 0.0 if lo <= 1.0 else math.log(lo)


def K_n_sequence(z, params, s0=None, n_max=None, samples=64, component=0):
    """K_n = sup over s in [s0 + n|c|, s0 + (n+1)|c|] of e^{-kappa s}|z(e^s)|, n = 0..n_max."""
    if s0 is None:
        s0 = default_s0(z)
    lo, hi = z.domain
    if math.exp(s0) < lo:
        raise InsufficientDomain("solution does not reach back to exp(s0)")
    step, n_max = _log_intervals(params, s0, n_max, hi)
    k = params.kappa
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        s = np.linspace(s0 + n * step, s0 + (n + 1) * step, samples)
        t = np.clip(np.exp(s), lo, hi)
        out[n] = np.max(np.exp(-k * s) * np.abs(z.eval(t)[:, component]))
    return out


def eps_sequence(phi, params, s0, n_max, samples=64):
    """eps_n = sup over I_n of |phi(e^s)|, n = 0..n_max, by dense sampling."""
    step = -math.log(params.q)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        s = np.linspace(s0 + n * step, s0 + (n + 1) * step, samples)
        out[n] = np.max(np.abs(phi.value(np.exp(s))))
    return out


@dataclass
class EnvelopeCheck:
    k_star: float
    bound: list
    max_violation: float
    max_violation_all: float
    verdict: str
    fit_range: tuple

    def to_dict(self):
        return _clean(asdict(self))


def envelope_check(K, eps, alpha, slack=None):
    """Compare K_n with K* sum_{j=1}^n eps_j / alpha^j.

    K* is fitted in log space (mean of log K_n - log bound_n) over the tail half
    of n >= 1; the verdict compares max K_n / (K* bound_n) over the same range
    with the slack (Satisfied if <= 1.05).  The violation over all n >= 1 is
    reported separately.
    """
    slack = DEFAULTS["envelope_slack"] if slack is None else slack
    K = np.asarray(K, dtype=float)
    eps = np.asarray(eps, dtype=float)
    n = min(K.size, eps.size) - 1
    if n < 2:
        raise InsufficientDomain("envelope check needs K_n for n = 0..2 at least")
    j = np.arange(1, n + 1)
    bound = np.cumsum(eps[1:n + 1] / alpha ** j)
    Kn = K[1:n + 1]
    use = (bound > 0) & (Kn > 0)
    tail = use & (j >= max(1, (n + 1) // 2))
    if not np.any(tail):
        return EnvelopeCheck(0.0, bound.tolist(), math.inf, math.inf, "Violated", (1, n))
    k_star = float(np.exp(np.mean(np.log(Kn[tail] / bound[tail]))))
    viol = Kn[tail] / (k_star * bound[tail])
    all_viol = np.where(bound > 0, Kn / np.where(bound > 0, k_star * bound, 1.0), np.where(Kn > 0, math.inf, 0.0))
    worst = float(viol.max())
    return EnvelopeCheck(k_star, bound.tolist(), worst, float(all_viol.max()),
                         "Satisfied" if worst <= slack else "Violated",
                         (int(j[tail][0]), int(n)))


# ---------------------------------------------------------------------------
# limit classification


@dataclass
class LimitClass:
    verdict: str
    limit: Optional[float]
    windows: list
    sups: list
    means: list
    deviations: list
    initial_sup: float
    thresholds: dict

    def to_dict(self):
        return _clean(asdict(self))


def _window_stats(sol, lo, hi, component, per_window=257):
    t = sol.times
    i0, i1 = np.searchsorted(t, [lo, hi], side="right")
    u = np.linspace(math.log1p(lo), math.log1p(hi), per_window)
    extra = np.clip(np.expm1(u), lo, hi)
    tt = np.concatenate([t[i0:i1], extra])
    xx = np.concatenate([sol.values[i0:i1, component], sol.eval(extra)[:, component]])
    order = np.argsort(tt, kind="stable")
    tt, x = tt[order], xx[order]
    mean = float(np.sum(0.5 * (x[1:] + x[:-1]) * np.diff(tt)) / (hi - lo))
    return float(np.max(np.abs(x))), mean, float(np.max(np.abs(x - mean)))


def classify_limit(sol, tail_fraction=1 / 3, component=0, ztol=None, mtol=None, growth=None,
                   n_windows=3):
    """Classify the long-run behaviour of one component from its tail.

    The tail is the last ``tail_fraction`` of the domain measured in
    u = log(1 + t); it is cut into ``n_windows`` windows of equal u-length, and
    each window gets sup|x|, its time average m and sup|x - m|.

    ConvergesToZero: sups strictly decrease and the last is below ztol times
    the sup over the whole run.  Unbounded: last sup >= growth * first sup.
    ConvergesTo(L): means agree within mtol (relative to |L|), deviations do
    not increase and the last is below mtol |L|; L is the last mean.
    Otherwise BoundedNonconvergent.
    """
    ztol = DEFAULTS["ztol"] if ztol is None else ztol
    mtol = DEFAULTS["mtol"] if mtol is None else mtol
    growth = DEFAULTS["growth"] if growth is None else growth
    if not 0 < tail_fraction <= 1:
        raise DomainError("tail_fraction must lie in (0, 1]")
    lo, hi = sol.domain
    u0, u1 = math.log1p(lo), math.log1p(hi)
    us = np.linspace(u1 - tail_fraction * (u1 - u0), u1, n_windows + 1)
    edges = np.expm1(us)
    edges[0] = max(edges[0], lo)
    edges[-1] = hi
    t = sol.times
    counts = [np.count_nonzero((t >= a) & (t <= b)) for a, b in zip(edges[:-1], edges[1:])]
    if min(counts) < 2 or not np.all(np.diff(edges) > 0):
        raise WindowTooShort("each tail window needs at least two nodes")
    stats = [_window_stats(sol, a, b, component) for a, b in zip(edges[:-1], edges[1:])]
    sups = np.array([s[0] for s in stats])
    means = np.array([s[1] for s in stats])
    devs = np.array([s[2] for s in stats])
    initial = float(np.max(np.abs(sol.values[:, component])))
    thresholds = {"ztol": ztol, "mtol": mtol, "growth": growth, "tail_fraction": tail_fraction}
    windows = [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]
    L = None
    if initial == 0.0 or (np.all(np.diff(sups) < 0) and sups[-1] <= ztol * initial):
        verdict = CONVERGES_TO_ZERO
    elif sups[-1] >= growth * sups[0]:
        verdict = UNBOUNDED
    else:
        ref = abs(means[-1])
        agree = np.max(np.abs(means - means[-1])) <= mtol * ref
        shrink = np.all(np.diff(devs) <= 0) and devs[-1] <= mtol * ref
        if ref > 0 and agree and shrink:
            verdict, L = CONVERGES_TO, float(means[-1])
        else:
            verdict = BOUNDED_NONCONVERGENT
    return LimitClass(verdict, L, windows, sups.tolist(), means.tolist(), devs.tolist(),
                      initial, thresholds)


def tally(classes):
    """Count verdicts of a list of LimitClass results."""
    out = {}
    for c in classes:
        out[c.verdict] = out.get(c.verdict, 0) + 1
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# report


def diagnostics_report(kappa_value=None, rate_estimates=(), s_classification=None,
                       limit_class=None, k_n_table=None, thresholds=None):
    """Diagnostics JSON object with a fixed set of keys."""
    th = dict(DEFAULTS)
    if thresholds:
        th.update(thresholds)
    return _clean({
        "kappa": kappa_value,
        "rate_estimates": [r.to_dict() for r in rate_estimates],
        "s_classification": None if s_classification is None else s_classification.to_dict(),
        "limit_class": None if limit_class is None else limit_class.to_dict(),
        "k_n_table": None if k_n_table is None else np.asarray(k_n_table).tolist(),
        "thresholds_used": th,
    })
