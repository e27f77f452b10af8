"""Noise: the S(eps) series, ensembles of paths, and multiplicative growth rates."""

import numpy as np

from pantolab.det_engine import PantographParams, UniformTime
from pantolab.diagnostics import classify_limit, classify_S, tally
from pantolab.forcing import Constant, Exponential, ShiftedPower
from pantolab.stoch_engine import (DECOMPOSED, MultiplicativeParams, geometric_grid, sample_brownian,
                                   solve_multiplicative, solve_sdde)

for name, sigma in (("constant", Constant(1.0)), ("e^-t", Exponential(1.0, -1.0)),
                    ("(1+t)^-1/2", ShiftedPower(1.0, -0.5))):
    print(f"S(eps) for sigma = {name:11s}: {classify_S(sigma).overall}")

p = PantographParams(0.5, -1.0, 0.5)
path = sample_brownian(UniformTime(1e-2, 100.0), seed=42, streams=range(100))
for name, sigma in (("e^-t", Exponential(1.0, -1.0)), ("constant", Constant(1.0))):
    X = solve_sdde(p, 0.0, sigma, path, 1.0, DECOMPOSED)
    print(f"100 paths, sigma = {name:8s}:", tally([classify_limit(X.component(i)) for i in range(100)]))

path = sample_brownian(geometric_grid(0.5, t_end=1e3), seed=42, streams=range(100))
for b in (1.0, -1.0):
    mp = MultiplicativeParams(0.5, b, 0.5, 0.5)
    sol = solve_multiplicative(mp, path, 1.0)
    t = 200.0 if b > 0 else 1e3
    rates = sol.log_abs_x_at(t) / t
    print(f"multiplicative b={b:+.0f}: median (1/t) log|X(t)| at t={t:g} = {np.median(rates):+.3f} "
          f"(predicted {mp.lyapunov_exponent:+.3f})")
