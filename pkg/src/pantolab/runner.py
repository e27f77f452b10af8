"""Config-driven runs: single simulations, ensembles, diagnostics on CSV data,
manufactured forcing tables.

A scenario is one JSON object::

    {"kind": "DetPantograph", "params": {"a": 0.5, "b": -1, "q": 0.5},
     "forcing": {"kind": "zero"}, "x0": 1.0,
     "grid": {"kind": "log", "t_end": 1e4},
     "diagnostics": {"estimate_exponent": {"window": [100, 10000]}}}

Parsing errors raise ConfigError naming the dotted path of the bad field.
"""

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .det_engine import (DelayFamily, GeneralDelaySpec, LogTime, PantographParams, UniformTime,
                         solve_aux_y, solve_general_delay, solve_pantograph)
from .decomposition import check_representation, solve_via_decomposition
from .diagnostics import (RUN_MAX_ENVELOPE, classify_limit, classify_S, diagnostics_report,
                          estimate_exponent, perron_ratio, tally, EtaLogT, KappaLogT, _clean)
from .errors import ConfigError, DomainError, GridError, PantolabError
from .forcing import Zero, spec_from_dict, weight_from_dict, zspec_from_dict, manufactured_phi
from .history import DenseSolution
from .multidim import MatrixParams, check_iserles, check_stabcond2, lyapunov_solve, path_norms, solve_multidim
from .stoch_engine import (DECOMPOSED, EULER_MARUYAMA, MultiplicativeParams, geometric_grid,
                           sample_brownian, solve_multiplicative, solve_sdde)

KINDS = ("DetPantograph", "StochPantograph", "GeneralDelay", "Multidim", "Multiplicative", "AuxOnly")
STOCHASTIC = ("StochPantograph", "Multidim", "Multiplicative")
SEED_ENV = "PANTOLAB_SEED"
DIRECT = "direct"
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class ScenarioConfig:
    kind: str
    params: Any
    forcing: Any
    noise: Any
    x0: Any
    grid: Any
    seed: Optional[int]
    paths: int
    method: str
    history: Any
    diagnostics: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)


def _num(d, key, path, default=None, positive=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", "not a number")
    v = float(v)
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(f"{path}.{key}", "must be a positive finite number" if positive else "not finite")
    return v


def _grid(d, path, kind):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    g = d.get("kind", "uniform")
    try:
        if g == "uniform":
            return UniformTime(_num(d, "h", path, positive=True), _num(d, "t_end", path, positive=True))
        if g == "log":
            return LogTime(_num(d, "t_end", path, positive=True), int(_num(d, "m", path, 16)),
                           _num(d, "t0", path, 1.0, True), _num(d, "h_boot", path, 1e-3, True))
        if g == "geometric":
            return ("geometric", int(_num(d, "m", path, 16)), _num(d, "t0", path, 1e-2, True),
                    _num(d, "t_end", path, positive=True))
    except GridError as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown grid kind {g!r}")


def _params(kind, d, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    try:
        if kind in ("DetPantograph", "StochPantograph", "AuxOnly"):
            q = _num(d, "q", path, 0.5)
            if not 0 < q < 1:
                raise ConfigError(f"{path}.q", "must lie in (0, 1)")
            a = _num(d, "a", path, 0.5 if kind == "AuxOnly" else None)
            if a == 0:
                raise ConfigError(f"{path}.a", "must be non-zero")
            return PantographParams(a, _num(d, "b", path, -1.0 if kind == "AuxOnly" else None), q)
        if kind == "Multiplicative":
            q = _num(d, "q", path)
            if not 0 < q < 1:
                raise ConfigError(f"{path}.q", "must lie in (0, 1)")
            return MultiplicativeParams(_num(d, "a", path), _num(d, "b", path), q, _num(d, "sigma", path))
        if kind == "GeneralDelay":
            tau = d.get("delay")
            if not isinstance(tau, dict):
                raise ConfigError(f"{path}.delay", "missing")
            fam = DelayFamily(tau.get("kind", "constant"), _num(tau, "tau0", f"{path}.delay", 1.0),
                              _num(tau, "slope", f"{path}.delay", 0.0), _num(tau, "offset", f"{path}.delay", 0.0))
            return {"a": _num(d, "a", path), "b": _num(d, "b", path), "tau": fam}
        if kind == "Multidim":
            q = _num(d, "q", path)
            if not 0 < q < 1:
                raise ConfigError(f"{path}.q", "must lie in (0, 1)")
            for key in ("B", "A"):
                if key not in d:
                    raise ConfigError(f"{path}.{key}", "missing")
            return {"B": np.array(d["B"], dtype=float), "A": np.array(d["A"], dtype=float), "q": q}
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError("kind", f"unknown kind {kind!r}")


def resolve_seed(config_seed=None, override=None):
    """Seed priority: explicit override, then the config, then $PANTOLAB_SEED."""
    for src, v in (("--seed", override), ("seed", config_seed), (SEED_ENV, os.environ.get(SEED_ENV))):
        if v is None or v == "":
            continue
        try:
            s = int(v)
        except (TypeError, ValueError):
            raise ConfigError(src, "seed must be an integer") from None
        if s < 0:
            raise ConfigError(src, "seed must be non-negative")
        return s
    return None


def parse_config(d, seed=None):
    """Validate a scenario dict and build a ScenarioConfig (``seed`` overrides the file)."""
    if not isinstance(d, dict):
        raise ConfigError("", "config must be a JSON object")
    kind = d.get("kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
    params = _params(kind, d.get("params", {}), "params")
    f = d.get("forcing", {"kind": "zero"})
    if kind == "Multidim":
        if not isinstance(f, list):
            f = [f] * params["B"].shape[0]
        forcing = tuple(spec_from_dict(s, f"forcing[{i}]") for i, s in enumerate(f))
        noise_d = d.get("noise")
        if not isinstance(noise_d, list) or not all(isinstance(r, list) for r in noise_d):
            raise ConfigError("noise", "expected a matrix (list of rows) of specs")
        noise = tuple(tuple(spec_from_dict(s, f"noise[{i}][{j}]") for j, s in enumerate(row))
                      for i, row in enumerate(noise_d))
        try:
            params = MatrixParams(params["B"], params["A"], noise, forcing, params["q"])
        except PantolabError as exc:
            raise ConfigError("params", str(exc)) from None
    else:
        forcing = spec_from_dict(f, "forcing") if kind != "Multiplicative" else None
        noise = spec_from_dict(d["noise"], "noise") if kind == "StochPantograph" and "noise" in d else (
            Zero() if kind == "StochPantograph" else None)
    x0 = d.get("x0", 1.0)
    if kind == "Multidim":
        if not isinstance(x0, list) or len(x0) != params.d:
            raise ConfigError("x0", "expected a list with one entry per dimension")
        x0 = [float(v) for v in x0]
    elif not isinstance(x0, (int, float)) or isinstance(x0, bool):
        raise ConfigError("x0", "not a number")
    else:
        x0 = float(x0)
    default_grid = {"kind": "geometric", "t_end": 1e3} if kind == "Multiplicative" else None
    if "grid" not in d and default_grid is None:
        raise ConfigError("grid", "missing")
    grid = _grid(d.get("grid", default_grid), "grid", kind)
    if kind == "Multiplicative" and not isinstance(grid, tuple):
        raise ConfigError("grid.kind", "multiplicative runs need a geometric grid")
    if kind in ("StochPantograph", "Multidim", "GeneralDelay") and not isinstance(grid, UniformTime):
        raise ConfigError("grid.kind", f"{kind} runs need a uniform grid")
    history = None
    if "history" in d:
        try:
            history = zspec_from_dict(d["history"])
        except (DomainError, KeyError, TypeError) as exc:
            raise ConfigError("history", str(exc)) from None
    if kind == "GeneralDelay":
        history = spec_from_dict(d.get("history", {"kind": "constant", "c": 1.0}), "history")
    method = d.get("method", DECOMPOSED if kind in ("StochPantograph", "Multidim") else DIRECT)
    allowed = (DECOMPOSED, EULER_MARUYAMA) if kind in ("StochPantograph", "Multidim") else (
        (DIRECT, DECOMPOSED) if kind == "DetPantograph" else (DIRECT,))
    if method not in allowed:
        raise ConfigError("method", f"must be one of {', '.join(allowed)} for {kind}")
    if method == DECOMPOSED and kind == "DetPantograph" and not isinstance(grid, UniformTime):
        raise ConfigError("method", "the decomposed deterministic solver needs a uniform grid")
    paths = d.get("paths", 1)
    if not isinstance(paths, int) or isinstance(paths, bool) or paths < 1:
        raise ConfigError("paths", "must be a positive integer")
    s = resolve_seed(d.get("seed"), seed)
    if kind in STOCHASTIC and s is None:
        raise ConfigError("seed", f"required for {kind} (config, --seed or ${SEED_ENV})")
    diag = d.get("diagnostics", {})
    if not isinstance(diag, dict):
        raise ConfigError("diagnostics", "expected an object")
    out = d.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("output", "expected an object")
    raw = dict(d)
    if s is not None:
        raw["seed"] = s
    return ScenarioConfig(kind, params, forcing, noise, x0, grid, s, paths, method, history, diag, out, raw)


def load_config(path, seed=None):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    return parse_config(d, seed)


@dataclass
class RunReport:
    config: dict
    diagnostics: dict
    csv_paths: list
    wall_clock: float
    provenance: dict
    summary: dict = field(default_factory=dict)

    def to_dict(self):
        return _clean({"config": self.config, "diagnostics": self.diagnostics, "csv_paths": self.csv_paths,
                       "wall_clock": self.wall_clock, "provenance": self.provenance, "summary": self.summary})

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))


def _geometric(cfg):
    _, m, t0, t_end = cfg.grid
    return geometric_grid(cfg.params.q, m, t0, t_end)


def _times(cfg):
    return _geometric(cfg) if isinstance(cfg.grid, tuple) else cfg.grid.times()


def _simulate_paths(cfg, streams):
    """Trajectories for the given RNG streams: (DenseSolution, columns per path, observable)."""
    k = cfg.kind
    if k == "StochPantograph":
        path = sample_brownian(cfg.grid, cfg.seed, streams)
        return solve_sdde(cfg.params, cfg.forcing, cfg.noise, path, cfg.x0, cfg.method), 1, "x"
    if k == "Multidim":
        r = cfg.params.r
        cols = [s * r + j for s in streams for j in range(r)]
        path = sample_brownian(cfg.grid, cfg.seed, cols)
        return solve_multidim(cfg.params, path, cfg.x0, cfg.method), cfg.params.d, "norm"
    if k == "Multiplicative":
        path = sample_brownian(_geometric(cfg), cfg.seed, streams)
        sol = solve_multiplicative(cfg.params, path, cfg.x0)
        if sol.x is not None:
            return sol.x, 1, "x"
        # X overflows double range: report log|X| instead
        return DenseSolution.from_arrays(sol.times, sol.log_abs_x), 1, "log_abs_x"
    raise ConfigError("kind", f"{k} has no random paths")


def _deterministic(cfg):
    k = cfg.kind
    if k == "DetPantograph":
        if cfg.method == DECOMPOSED:
            return solve_via_decomposition(cfg.params, cfg.forcing, cfg.x0, cfg.grid)
        x0 = None if cfg.history is not None else cfg.x0
        return solve_pantograph(cfg.params, cfg.forcing, x0, cfg.grid, history=cfg.history)
    if k == "AuxOnly":
        return solve_aux_y(cfg.forcing, cfg.grid if isinstance(cfg.grid, UniformTime) else cfg.grid.times(cfg.params.q))
    if k == "GeneralDelay":
        p = cfg.params
        return solve_general_delay(p["b"], p["a"], GeneralDelaySpec(p["tau"], cfg.history), cfg.forcing, cfg.grid)
    raise ConfigError("kind", f"{k} is stochastic")


def _diagnose(sol, cfg_diag, component=0, kappa_value=None):
    """Requested diagnostics of one trajectory component, as a report dict."""
    rates, limit, s_class = [], None, None
    errors = {}
    for key, opts in cfg_diag.items():
        opts = opts or {}
        try:
            if key == "estimate_exponent":
                w = opts.get("window")
                weight = weight_from_dict(opts["weight"]) if "weight" in opts else None
                rates.append(estimate_exponent(sol, tuple(w) if w else None, opts.get("method", RUN_MAX_ENVELOPE),
                                               component, weight=weight))
            elif key == "perron_ratio":
                theta = KappaLogT(kappa_value) if opts.get("theta", "kappa_log_t") == "kappa_log_t" \
                    else EtaLogT(float(opts["eta"]))
                w = opts.get("window")
                rates.append(perron_ratio(sol, theta, tuple(w) if w else None, component))
            elif key == "classify_limit":
                limit = classify_limit(sol, opts.get("tail_fraction", 1 / 3), component)
            elif key == "classify_S":
                s_class = classify_S(spec_from_dict(opts["sigma"], "diagnostics.classify_S.sigma"),
                                     tuple(opts.get("epsilons", (0.01, 0.1, 1.0, 10.0, 100.0))),
                                     int(opts.get("n_max", 1000)))
            else:
                raise ConfigError(f"diagnostics.{key}", "unknown diagnostic")
        except ConfigError:
            raise
        except PantolabError as exc:
            errors[key] = f"{type(exc).__name__}: {exc}"
    rep = diagnostics_report(kappa_value, rates, s_class, limit)
    if errors:
        rep["errors"] = errors
    return rep


def _kappa(cfg):
    try:
        return cfg.params.kappa if isinstance(cfg.params, PantographParams) else None
    except PantolabError:
        return None


def _out_dir(cfg, out):
    d = Path(out or cfg.output.get("dir", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _provenance(cfg):
    return {"version": __version__, "seed": cfg.seed}


def run_simulate(cfg, out=None, stream=0):
    """One trajectory (one RNG stream for stochastic kinds): CSV plus diagnostics."""
    t0 = time.perf_counter()
    if cfg.kind in STOCHASTIC:
        sol, _, _ = _simulate_paths(cfg, [stream])
    else:
        sol = _deterministic(cfg)
    d = _out_dir(cfg, out)
    name = cfg.output.get("name", cfg.kind.lower())
    csv = d / f"{name}.csv"
    sol.to_csv(csv)
    diag = _diagnose(sol, cfg.diagnostics, 0, _kappa(cfg))
    summary = {"t_end": float(sol.times[-1]), "x_end": sol.values[-1].tolist(), "nodes": len(sol)}
    if cfg.kind == "DetPantograph" and cfg.diagnostics.get("representation"):
        diag["representation_residual"] = check_representation(sol, f=cfg.forcing, params=cfg.params)
    rep = RunReport(cfg.raw, diag, [str(csv)], time.perf_counter() - t0, _provenance(cfg), summary)
    rep.write(d / f"{name}_report.json")
    return rep


def _chunks(n, k):
    k = max(1, min(k, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [list(range(a, b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_ensemble(cfg, out=None, threads=1):
    """N paths on stream indices 0..N-1, optionally on several threads.

    Each path depends only on its own stream, so results do not depend on the
    thread count.  Writes a quantile CSV and a report with per-path verdicts.
    """
    if cfg.kind not in STOCHASTIC:
        raise ConfigError("kind", "ensembles need a stochastic kind")
    t0 = time.perf_counter()
    chunks = _chunks(cfg.paths, threads)
    with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
        parts = list(ex.map(lambda c: _simulate_paths(cfg, c), chunks))
    width, observable = parts[0][1], parts[0][2]
    times = parts[0][0].times
    values = np.concatenate([p[0].values for p in parts], axis=1)
    P = cfg.paths
    if width > 1:
        sol = path_norms(DenseSolution.from_arrays(times, values), width)
    else:
        sol = DenseSolution.from_arrays(times, values)
    tail = cfg.diagnostics.get("classify_limit", {}) or {}
    classes = [classify_limit(sol, tail.get("tail_fraction", 1 / 3), i) for i in range(P)]
    qs = np.quantile(sol.values, QUANTILES, axis=1).T
    d = _out_dir(cfg, out)
    name = cfg.output.get("name", cfg.kind.lower())
    csv = d / f"{name}_quantiles.csv"
    header = "t," + ",".join(f"q{int(100 * q):02d}" for q in QUANTILES)
    np.savetxt(csv, np.column_stack([times, qs]), fmt="%.17g", delimiter=",", header=header, comments="")
    summary = {"paths": P, "tally": tally(classes), "verdicts": [c.verdict for c in classes],
               "quantiles_at_end": dict(zip([f"q{int(100 * q):02d}" for q in QUANTILES], qs[-1].tolist())),
               "observable": observable}
    if cfg.kind == "Multiplicative":
        mp = cfg.params
        path = sample_brownian(_geometric(cfg), cfg.seed, range(P))
        ms = solve_multiplicative(mp, path, cfg.x0)
        rates = ms.log_abs_x[-1] / ms.times[-1]
        summary["lyapunov_rates"] = {"median": float(np.median(rates)), "min": float(rates.min()),
                                     "max": float(rates.max()), "theory": mp.lyapunov_exponent}
    if cfg.kind == "Multidim":
        B, A = cfg.params.B, cfg.params.A
        summary["iserles"] = check_iserles(B, A)
        try:
            summary["stabcond2"] = check_stabcond2(B, A)
            summary["lyapunov"] = lyapunov_solve(B, A).to_dict()
        except PantolabError as exc:
            summary["stabcond2"] = f"{type(exc).__name__}: {exc}"
    rep = RunReport(cfg.raw, {}, [str(csv)], time.perf_counter() - t0, _provenance(cfg), summary)
    rep.write(d / f"{name}_ensemble.json")
    return rep


def run_diagnose(csv_path, requests, out=None, kappa_value=None, component=0):
    """Diagnostics on a trajectory CSV written by a simulation."""
    sol = DenseSolution.from_csv(csv_path)
    rep = _diagnose(sol, requests, component, kappa_value)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "diagnostics.json").write_text(json.dumps(rep, sort_keys=True, indent=1))
    return rep


def run_construct(d, out=None):
    """Table of a manufactured forcing phi and its target z on a time grid.

    ``d``: {"z": target spec, "params": {a, b, q}, "t": [lo, hi], "points": n}.
    Writes CSV columns t, phi, z.
    """
    if "z" not in d:
        raise ConfigError("z", "missing")
    try:
        z = zspec_from_dict(d["z"])
    except (DomainError, KeyError, TypeError) as exc:
        raise ConfigError("z", str(exc)) from None
    p = _params("DetPantograph", d.get("params", {}), "params")
    lo, hi = d.get("t", [1.0, 100.0])
    if not 0 < lo < hi:
        raise ConfigError("t", "need 0 < lo < hi")
    n = int(d.get("points", 200))
    t = np.geomspace(lo, hi, n)
    phi = manufactured_phi(z, p.a, p.b, p.q)
    table = np.column_stack([t, phi.value(t), z.value(t)])
    od = Path(out or d.get("output", {}).get("dir", "."))
    od.mkdir(parents=True, exist_ok=True)
    csv = od / d.get("output", {}).get("name", "manufactured.csv")
    np.savetxt(csv, table, fmt="%.17g", delimiter=",", header="t,phi,z", comments="")
    return {"csv": str(csv), "rows": n}
