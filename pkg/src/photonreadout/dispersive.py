"""Closed-form dispersive readout model.

Dimensionless variables: K = kappa t_ph, X = chi t_ph, D = detuning * t_ph,
tau = (t - t0) / t_ph.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .core import heaviside

SERIES_EPS = 1e-6


class QuadratureError(RuntimeError):
    def __init__(self, msg, achieved):
        self.achieved = achieved
        super().__init__(f"{msg} (achieved error estimate {achieved:.3g})")


@dataclass(frozen=True)
class PopulationCurve:
    tau: np.ndarray
    population: np.ndarray


@dataclass(frozen=True)
class ClickProbability:
    value: float
    branch: str
    counting: str = "infinite"


def _check_K(K):
    if np.any(np.asarray(K) <= 0):
        raise ValueError("K must be positive")


def cavity_population(tau, K, D=0.0):
    """Cavity occupation driven by the damped single-photon pulse.

    Examples
    --------
    >>> round(float(cavity_population(2.0, 1.0, 0.0)), 5)
    0.27067
    """
    _check_K(K)
    tau = np.asarray(tau, dtype=float)
    tp = np.maximum(tau, 0.0)
    if abs(K - 1.0) < SERIES_EPS and D == 0:
        val = 0.5 * tp ** 2 * np.exp(-tp)
    else:
        den = (K - 1.0) ** 2 + 4.0 * D ** 2
        # cosh(x) e^{-(K+1)tau/2} written as a sum of decaying exponentials
        ch = 0.5 * (np.exp(-tp) + np.exp(-K * tp))
        val = 4.0 * K / den * (ch - np.exp(-0.5 * (K + 1) * tp) * np.cos(D * tp))
    return heaviside(tau) * val


def population_curve(tau, K, D=0.0) -> PopulationCurve:
    tau = np.asarray(tau, dtype=float)
    return PopulationCurve(tau, cavity_population(tau, K, D))


def _fourier_at(f: Callable, center: float, half: float, t: float, tol: float):
    """(2 pi)^(-1/2) int f(w) exp(-i w t) dw, core window plus oscillatory tails."""
    lo, hi = center - half, center + half
    est = 0.0

    def q(fun, a, b, **kw):
        nonlocal est
        val, err = integrate.quad(fun, a, b, epsabs=tol, epsrel=0.0, limit=2000, **kw)
        est += err
        return val

    core = lambda w: f(w) * np.exp(-1j * w * t)
    total = (q(lambda w: core(w).real, lo, hi, points=[center])
             + 1j * q(lambda w: core(w).imag, lo, hi, points=[center]))
    if t == 0:
        total += (q(lambda w: f(w).real, hi, np.inf) + 1j * q(lambda w: f(w).imag, hi, np.inf)
                  + q(lambda w: f(-w).real, -lo, np.inf) + 1j * q(lambda w: f(-w).imag, -lo, np.inf))
    else:
        # e^{-iwt} = cos(wt) - i sin(wt); the QAWF rule needs w >= 0 and t > 0
        s = abs(t)
        sg = np.sign(t)
        for x0, refl in ((hi, 1.0), (-lo, -1.0)):
            g = lambda u, x0=x0, refl=refl: f(refl * (u + x0))
            ph = np.exp(-1j * refl * x0 * t)
            c = q(lambda u: g(u).real, 0, np.inf, weight="cos", wvar=s) + \
                1j * q(lambda u: g(u).imag, 0, np.inf, weight="cos", wvar=s)
            sn = q(lambda u: g(u).real, 0, np.inf, weight="sin", wvar=s) + \
                1j * q(lambda u: g(u).imag, 0, np.inf, weight="sin", wvar=s)
            total += ph * (c - 1j * sg * refl * sn)
    return total / np.sqrt(2 * np.pi), est


def cavity_population_spectral(spectrum: Callable, omega_eff: float, kappa: float, t,
                               center: float | None = None, t_ph: float | None = None,
                               tol: float = 1e-10):
    """Cavity population |F[K(w) xi(w)](t)|^2 by adaptive quadrature.

    Independent of :func:`cavity_population`; used as its oracle.

    Parameters
    ----------
    spectrum : callable
        Spectral amplitude xi(w).
    center : float, optional
        Centre of the core window, defaults to ``omega_eff``.
    t_ph : float, optional
        Sets the core half-width max(50 / t_ph, 50 kappa).
    """
    center = omega_eff if center is None else center
    half = 50.0 * max(kappa, 1.0 / t_ph if t_ph else 0.0)
    kern = lambda w: np.sqrt(kappa / 2) / (1j * (omega_eff - w) + kappa / 2)
    f = lambda w: kern(w) * spectrum(w)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.shape)
    for i, ti in enumerate(ts):
        amp, est = _fourier_at(f, center, half, ti, tol)
        if est > 1e3 * tol:
            raise QuadratureError("spectral quadrature did not converge", est)
        out[i] = abs(amp) ** 2
    return out if np.ndim(t) else out[0]


def transmitted_density(x, t, kappa, population: Callable):
    """Transmitted photon density at position x (v = 1), kappa/2 * n(t - x)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(x < 0) or np.any(t - x < 0):
        raise ValueError("point lies outside the causal region t >= x >= 0")
    return 0.5 * kappa * population(t - x)


def click_general(K, D, eta=1.0):
    """Infinite-time click probability for dimensionless detuning D."""
    _check_K(K)
    return eta * K * (K + 1.0) / ((K + 1.0) ** 2 + 4.0 * np.asarray(D) ** 2)


def click_probability_infinite(K, X, branch="resonant", eta=1.0) -> ClickProbability:
    if X < 0 or not 0 <= eta <= 1:
        raise ValueError("need X >= 0 and 0 <= eta <= 1")
    if branch == "resonant":
        v = click_general(K, 0.0, eta)
    elif branch == "detuned":
        v = click_general(K, 2.0 * X, eta)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return ClickProbability(float(v), branch)


def finite_time_delta(K, D, tau_m, form="exact"):
    """Click probability still outstanding after counting for tau_m.

    ``form="exact"`` integrates the population tail in closed form.
    ``form="plus_sign"`` keeps the variant with ``+[(K+1) cos + D sin]``,
    which differs from the exact tail by terms of order exp(-(K+1) tau_m / 2).
    """
    _check_K(K)
    if np.any(np.asarray(tau_m) < 0):
        raise ValueError("tau_m must be non-negative")
    D = np.asarray(D, dtype=float)
    tm = np.asarray(tau_m, dtype=float)
    if abs(K - 1.0) < SERIES_EPS and np.all(D == 0) and form == "exact":
        # tail of tau^2 e^{-tau} / 4
        return 0.25 * np.exp(-tm) * (tm ** 2 + 2 * tm + 2)
    den = (K - 1.0) ** 2 + 4.0 * D ** 2
    a = (K * np.exp(-tm) + np.exp(-K * tm)) / (2.0 * K)
    e = np.exp(-0.5 * (K + 1.0) * tm) / ((K + 1.0) ** 2 + 4.0 * D ** 2)
    if form == "exact":
        b = -2.0 * e * ((K + 1.0) * np.cos(D * tm) - 2.0 * D * np.sin(D * tm))
    elif form == "plus_sign":
        b = 2.0 * e * ((K + 1.0) * np.cos(D * tm) + D * np.sin(D * tm))
    else:
        raise ValueError(f"unknown form {form!r}")
    return (a + b) * 2.0 * K ** 2 / den


def finite_time_delta_approx(K, tau_m):
    """Leading-order resonant-branch loss (1 + 2/K) exp(-tau_m)."""
    _check_K(K)
    return (1.0 + 2.0 / K) * np.exp(-np.asarray(tau_m, dtype=float))


def contrast_dispersive(K, X, eta=1.0, tau_m=None, D_up=0.0, form="exact"):
    """Contrast between up (detuning D_up) and down (D_up - 2X) probes.

    Examples
    --------
    >>> round(float(contrast_dispersive(4.27, 3.64, tau_m=6)), 2)
    0.71
    """
    D_dn = D_up - 2.0 * np.asarray(X)
    c = click_general(K, D_up, eta) - click_general(K, D_dn, eta)
    if tau_m is not None:
        c = c - eta * (finite_time_delta(K, D_up, tau_m, form)
                       - finite_time_delta(K, D_dn, tau_m, form))
    return c


def optimal_cavity_decay(X):
    """K maximizing the infinite-time contrast at fixed X."""
    X = np.asarray(X, dtype=float)
    if np.any(X <= 0):
        raise ValueError("X must be positive")
    s = 16.0 * X ** 2 + 1.0
    u = np.cbrt(X * np.sqrt(s) + s / 4.0 - 0.125)
    return u + 1.0 / (4.0 * u) - 0.5


def optimal_cavity_decay_asymptote(X):
    return 2.0 * np.asarray(X, dtype=float) ** (2.0 / 3.0)


@dataclass(frozen=True)
class ApproxContrast:
    value: float
    valid: bool


def contrast_approx(K, eta=1.0, X=None) -> ApproxContrast:
    """eta (1 - 3 / (2K)); ``valid`` is False when X < 100."""
    _check_K(K)
    valid = True if X is None else bool(X >= 100)
    return ApproxContrast(float(eta * (1.0 - 1.5 / K)), valid)


def contrast_approx_finite(K, tau_m, eta=1.0):
    """Approximate law with the leading finite-counting loss."""
    return eta * (1.0 - 1.5 / K - finite_time_delta_approx(K, tau_m))
