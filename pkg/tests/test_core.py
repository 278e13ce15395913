import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import lorentz_norm
from photonreadout.core import (GHZ, MHZ, US, ParameterError, PulseParams, RegimeThresholds,
                                SystemParams, derive_couplings, heaviside, make_dimensionless,
                                pulse_envelope, pulse_spectrum, resolve_carrier, validate_regime)


def test_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        SystemParams(-1.0, 1.0, 0.1, 0.1)
    with pytest.raises(ParameterError):
        SystemParams(1.0, 2.0, -0.1, 0.1)
    with pytest.raises(ParameterError):
        SystemParams(1.0, 2.0, 0.1, 0.1, eta=1.5)
    with pytest.raises(ParameterError):
        SystemParams(1.0, 1.0, 0.1, 0.1)
    with pytest.raises(ParameterError):
        PulseParams(0.0)
    with pytest.raises(ParameterError):
        PulseParams(1.0, t0=-1.0)


def test_zero_coupling_allowed():
    d = derive_couplings(SystemParams(5 * GHZ, 4 * GHZ, 0.0, 1 * MHZ))
    assert d.chi == 0 and d.t_purcell == np.inf


def test_derived_values_first_fast_row():
    d = derive_couplings(SystemParams(5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ))
    assert d.lam == pytest.approx(53.6e-3 / 0.91, rel=1e-12)
    assert d.Lam == pytest.approx(53.6e-3 / 9.09, rel=1e-12)
    assert d.chi / MHZ == pytest.approx(3.473, abs=1e-3)
    assert d.kappa_q == pytest.approx(4.08 * MHZ * 5 / 4.09)
    assert d.omega_eff_up - d.omega_eff_down == pytest.approx(2 * d.chi)


def test_purcell_time_choice():
    p = SystemParams(5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ)
    a = derive_couplings(p).t_purcell
    b = derive_couplings(p, purcell_uses_kappa_q=True).t_purcell
    assert a / b == pytest.approx(5 / 4.09)


def test_dimensionless_group_resonant_probe():
    p = SystemParams(5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ)
    dg = make_dimensionless(p, PulseParams(US / 6))
    assert dg.D_up == 0.0
    assert dg.D_down == pytest.approx(-2 * dg.X)
    assert dg.K == pytest.approx(4.08 * MHZ * US / 6)
    assert dg.tau_of(US) == pytest.approx(6.0)


def test_heaviside_half_at_zero():
    assert list(heaviside(np.array([-1.0, 0.0, 2.0]))) == [0.0, 0.5, 1.0]


@pytest.mark.parametrize("t_ph", [1e-7, 1e-3, 2.0])
def test_pulse_spectrum_normalized(t_ph):
    # analytic norm of the Lorentzian: 1 exactly
    assert lorentz_norm(t_ph) == pytest.approx(1.0, abs=1e-9)


def test_pulse_envelope_normalized():
    pulse = PulseParams(0.3, t0=0.5, omega_ph=2.0)
    val, _ = integrate.quad(lambda t: abs(pulse_envelope(pulse, t)) ** 2, 0.5, np.inf,
                            epsabs=1e-13, epsrel=1e-13)
    assert val == pytest.approx(1.0, abs=1e-9)
    assert pulse_envelope(pulse, 0.2) == 0


@pytest.mark.parametrize("t", [0.7, 1.3, 2.9])
def test_envelope_is_i_times_transform_of_spectrum(t):
    """Numerical Fourier transform of xi against the closed-form envelope."""
    pulse = PulseParams(0.4, t0=0.5, omega_ph=3.0)
    f = lambda w: pulse_spectrum(pulse, w) * np.exp(-1j * w * t)
    # the tail ~ 1/w is integrated with the oscillatory QAWF weight
    c = 3.0
    re = integrate.quad(lambda w: f(w).real, c - 200, c + 200, limit=2000, points=[c])[0]
    im = integrate.quad(lambda w: f(w).imag, c - 200, c + 200, limit=2000, points=[c])[0]
    s = t - pulse.t0
    for x0, sg in ((c + 200, 1), (-(c - 200), -1)):
        g = lambda u: pulse_spectrum(pulse, sg * (u + x0)) * np.exp(-1j * sg * x0 * t)
        for part, fn in ((1, np.real), (1j, np.imag)):
            cos = integrate.quad(lambda u: fn(g(u)), 0, np.inf, weight="cos", wvar=t)[0]
            sin = integrate.quad(lambda u: fn(g(u)), 0, np.inf, weight="sin", wvar=t)[0]
            val = cos - 1j * sg * sin
            re, im = (re + (part * val).real, im + (part * val).imag)
    num = 1j * (re + 1j * im) / np.sqrt(2 * np.pi)
    assert s > 0
    assert num == pytest.approx(complex(pulse_envelope(pulse, t)), abs=2e-6)


def test_resolve_carrier_defaults_to_up_resonance():
    p = SystemParams(5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ)
    assert resolve_carrier(p, PulseParams(1e-6)).omega_ph == derive_couplings(p).omega_eff_up
    assert resolve_carrier(p, PulseParams(1e-6, 0, 7.0)).omega_ph == 7.0


def test_regime_flags():
    ok = validate_regime(SystemParams(5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ), PulseParams(US))
    assert ok.ok
    bad = validate_regime(SystemParams(5 * GHZ, 4.09 * GHZ, 320 * MHZ, 4.08 * MHZ), PulseParams(US))
    assert bad.flags["dispersive"] and not bad.ok
    loose = validate_regime(SystemParams(5 * GHZ, 4.09 * GHZ, 320 * MHZ, 4.08 * MHZ), PulseParams(US),
                            RegimeThresholds(dispersive=1.0))
    assert not loose.flags["dispersive"]


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 20.0), st.floats(0.1, 0.95), st.floats(0.001, 0.2))
def test_chi_formula_property(wq, ratio, lam):
    p = SystemParams(wq * GHZ, ratio * wq * GHZ, lam * (1 - ratio) * wq * GHZ, MHZ)
    d = derive_couplings(p)
    assert d.lam == pytest.approx(lam, rel=1e-9)
    assert d.chi == pytest.approx(p.g ** 2 * 2 * p.omega_q / (p.omega_q ** 2 - p.omega_r ** 2), rel=1e-9)
