"""Simulation and asymptotic diagnostics for forced pantograph equations.

Deterministic, additive-noise, multiplicative-noise and d-dimensional
variants of x'(t) = a x(qt) + b x(t) + f(t), with solvers, exact reference
solutions, and classifiers for decay rates and long-run behaviour.
"""

__version__ = "0.1.0"
