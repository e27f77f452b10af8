import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from pantolab.errors import ConfigError, DomainError
from pantolab.forcing import (Constant, Exponential, HighFreqOsc, PowerLaw, PowerTimesPsiIntegral,
                              PsiFamily, PurePower, RegularlyVarying, RowNorm, Scale, SequenceRule,
                              ShiftedPower, Sinusoid, SpikeTrain, Sum, Zero, ZeroZ, eval_f, eval_weight,
                              integrate, integrate_steps, manufactured_phi, phi_functions,
                              spec_from_dict, spike_window_integral, taylor_coeffs)


def spikes(heights, widths):
    return SpikeTrain(SequenceRule.make(*heights[:1], **heights[1]),
                      SequenceRule.make(*widths[:1], **widths[1]))


SPIKE_CONVERGENT = spikes(("linear", {"a": 1}), ("inv_square", {}))
SPIKE_UNIT = spikes(("linear", {"a": 1}), ("reciprocal_heights", {}))


def test_constant_value():
    assert eval_f(Constant(3), 7) == 3


def test_spike_apex():
    f = spikes(("linear", {"a": 1, "b": 1}), ("inv_square", {"shift": 1}))
    for n in (0, 3, 10):
        assert eval_f(f, n + 0.5) == pytest.approx(n + 1, rel=1e-15)


def test_high_freq_osc_at_zero():
    assert eval_f(HighFreqOsc(0.3, 0.9), 0.0) == pytest.approx(math.sin(1.0), abs=1e-15)


def test_high_freq_osc_needs_theta_above_beta():
    with pytest.raises(DomainError):
        HighFreqOsc(0.9, 0.3)


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        eval_f(Constant(1), -1.0)


@pytest.mark.parametrize("n", [1, 2, 5, 40])
def test_spike_area_convergent_family(n):
    assert spike_window_integral(SPIKE_CONVERGENT, n) == pytest.approx(1 / (2 * n), rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 7, 100])
def test_spike_area_unit_family(n):
    assert spike_window_integral(SPIKE_UNIT, n) == pytest.approx(0.5, rel=1e-14)


def test_spike_zero_height_has_zero_area():
    f = spikes(("constant", {"c": 0}), ("constant", {"c": 0.5}))
    assert spike_window_integral(f, 3) == 0.0


def test_spike_area_matches_quad():
    f = SPIKE_CONVERGENT
    for n in (2, 5):
        lo, hi = n + 0.5 - 0.5 / n ** 2, n + 0.5 + 0.5 / n ** 2
        ref, _ = quad(f.value, lo, hi, points=[n + 0.5])
        assert spike_window_integral(f, n) == pytest.approx(ref, rel=1e-10)


def test_manufactured_pure_power_cancels_delay_terms():
    phi = manufactured_phi(PurePower(1.0, -1.0), 0.5, -1.0, 0.5)
    t = np.geomspace(0.1, 100, 25)
    assert np.allclose(phi.value(t), -t ** -2.0, rtol=1e-14, atol=0)


def test_manufactured_zero_target():
    assert isinstance(manufactured_phi(ZeroZ(), 0.5, -1.0, 0.5), Zero)


def test_manufactured_against_symbolic_derivation():
    ts = sp.symbols("t", positive=True)
    a, b, q, D, kap = sp.Rational(1, 2), -1, sp.Rational(1, 2), 2, sp.Rational(-3, 2)
    Psi = sp.log(ts) - sp.log(1 / q)
    z = D * ts ** kap * Psi
    phi_sym = sp.diff(z, ts) - b * z - a * z.subs(ts, q * ts)
    phi_fn = sp.lambdify(ts, phi_sym, "numpy")
    phi = manufactured_phi(PowerTimesPsiIntegral(2.0, -1.5, PsiFamily("inv"), 0.5), 0.5, -1.0, 0.5)
    t = np.geomspace(0.5, 1e3, 30)
    assert np.allclose(phi.value(t), phi_fn(t), rtol=1e-12, atol=1e-15)


def test_psi_shift_identity_gives_log_term():
    # Psi(t) - Psi(qt) = log(1/q) for psi = 1/t
    z = PowerTimesPsiIntegral(1.0, -1.0, PsiFamily("inv"), 0.5)
    t = np.geomspace(1, 100, 7)
    assert np.allclose(z.Psi(t) - z.Psi(0.5 * t), math.log(2.0), atol=1e-14)


def test_psi_antiderivatives_against_quad():
    for fam in (PsiFamily("inv"), PsiFamily("inv_log_sq"), PsiFamily("power", rho=-0.5)):
        ref, _ = quad(lambda s: float(fam.psi(s)), 2.0, 9.0)
        assert float(fam.integral(2.0, 9.0)) == pytest.approx(ref, rel=1e-10)


def test_regularly_varying_examples():
    assert eval_weight(RegularlyVarying(0.0), 5.0) == 1.0
    assert eval_weight(RegularlyVarying(2.0), 3.0) == pytest.approx(9.0)
    kappa, m = -1.0, 2.0
    assert eval_weight(RegularlyVarying(kappa, m), math.e ** 2) == pytest.approx(math.exp(2 * kappa) * 2 ** m)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_regular_variation_index(lam):
    g = RegularlyVarying(0.7, 1.0)
    t = 1e100
    assert g(lam * t) / g(t) == pytest.approx(lam ** 0.7, rel=0.01)


def test_weight_positive_domain():
    with pytest.raises(DomainError):
        eval_weight(RegularlyVarying(1.0), 0.0)


@pytest.mark.parametrize("spec", [
    Sinusoid(1.3, 2.0, 0.4), PowerLaw(2.0, -0.5), ShiftedPower(1.0, -0.5), Exponential(1.0, -1.0),
    HighFreqOsc(0.3, 0.9), SPIKE_CONVERGENT,
])
def test_integrate_matches_quad(spec):
    lo, hi = 0.3, 5.2
    for rate in (0.0, -1.0, -2.0):
        ref, _ = quad(lambda u: math.exp(rate * (hi - u)) * float(spec.value(u)), lo, hi,
                      limit=500, points=list(spec.breakpoints(lo, hi))[:50] or None)
        assert integrate(spec, lo, hi, rate=rate) == pytest.approx(ref, rel=1e-8, abs=1e-12)


def test_integrate_steps_sums_to_whole():
    f = Sinusoid(1.0, 3.0)
    t = np.linspace(0, 4, 9)
    assert np.sum(integrate_steps(f, t)) == pytest.approx(integrate(f, 0, 4), rel=1e-13)


def test_window_integrals_match_quadrature():
    for spec in (Constant(2.5), Exponential(1.5, -0.7), Sinusoid(1.0, 2 * math.pi, 0.3), SPIKE_UNIT):
        assert spec.window_integral(1.2, 3.7) == pytest.approx(integrate(spec, 1.2, 3.7), rel=1e-10)


def test_phi_functions_small_and_large_branches():
    z = np.array([-5.0, -1.0, 1e-3, 1.5, 3.0])
    out = phi_functions(z, 3)
    for i, zz in enumerate(z):
        for k in (1, 2, 3):
            ref, _ = quad(lambda s: math.exp((1 - s) * zz) * s ** (k - 1) / math.factorial(k - 1), 0, 1)
            assert out[k - 1, i] == pytest.approx(ref, rel=1e-12)


def test_taylor_coeffs_exponential():
    c = taylor_coeffs(Exponential(2.0, -1.0), 5, 0.1)
    assert np.allclose(c, [2.0 * (-1) ** k / math.factorial(k) for k in range(6)])


def test_row_norm_pythagoras():
    assert eval_f(RowNorm((Constant(3), Constant(4))), 2.0) == pytest.approx(5.0)


def test_json_roundtrip_all_families():
    specs = [Zero(), Constant(2.0), Sinusoid(1.0, 2.0, 0.5), PowerLaw(1.0, 1.0), ShiftedPower(1.0, -0.5, 1.0),
             HighFreqOsc(0.3, 0.9), SPIKE_CONVERGENT, Exponential(1.0, -1.0),
             Sum((Constant(1.0), Exponential(1.0, -1.0))), Scale(2.0, Constant(1.0))]
    t = np.linspace(0, 6, 31)
    for s in specs:
        back = spec_from_dict(s.to_dict())
        assert np.array_equal(back.value(t), s.value(t))


def test_json_errors_name_the_field():
    with pytest.raises(ConfigError) as err:
        spec_from_dict({"kind": "constant"}, "forcing")
    assert err.value.field == "forcing.c"
    with pytest.raises(ConfigError) as err:
        spec_from_dict({"kind": "high_freq_osc", "beta": 1, "theta": 0.5}, "forcing")
    assert err.value.field == "forcing"


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 20), st.floats(-3, 3), st.floats(0, 3), st.floats(0.01, 3))
def test_integral_is_linear_in_the_spec(c, rate, lo, width):
    f = Exponential(1.0, rate)
    scaled = integrate(Scale(c, f), lo, lo + width)
    assert scaled == pytest.approx(c * integrate(f, lo, lo + width), rel=1e-12, abs=1e-300)
