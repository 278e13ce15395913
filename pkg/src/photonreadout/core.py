"""Parameter records, derived couplings, the probe pulse and regime checks.

All angular quantities are in rad/s and all times in seconds.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi
GHZ = TWO_PI * 1e9
MHZ = TWO_PI * 1e6
KHZ = TWO_PI * 1e3
US = 1e-6


class ParameterError(ValueError):
    """Raised when a parameter record violates its invariants."""


class QubitState(enum.Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class SystemParams:
    """Qubit, resonator and detector parameters.

    Parameters
    ----------
    omega_q, omega_r : float
        Qubit and resonator angular frequencies (rad/s).
    g : float
        Qubit-resonator coupling (rad/s). Zero is allowed.
    kappa : float
        Total resonator decay rate into both waveguides (rad/s).
    eta : float
        Detector quantum efficiency.
    """

    omega_q: float
    omega_r: float
    g: float
    kappa: float
    eta: float = 1.0

    def __post_init__(self):
        for name in ("omega_q", "omega_r", "kappa"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ParameterError(f"{name} must be positive, got {v!r}")
        if not np.isfinite(self.g) or self.g < 0:
            raise ParameterError(f"g must be non-negative, got {self.g!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta!r}")
        if self.omega_q == self.omega_r:
            raise ParameterError("omega_q == omega_r leaves lambda undefined")

    def replace(self, **kw) -> "SystemParams":
        d = dict(omega_q=self.omega_q, omega_r=self.omega_r, g=self.g,
                 kappa=self.kappa, eta=self.eta)
        d.update(kw)
        return SystemParams(**d)


@dataclass(frozen=True)
class PulseParams:
    """Exponentially damped single-photon pulse.

    ``omega_ph=None`` means the probe sits on the up-state resonance
    omega_r + chi, resolved against a ``SystemParams`` by
    :func:`resolve_carrier`.
    """

    t_ph: float
    t0: float = 0.0
    omega_ph: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.t_ph) or self.t_ph <= 0:
            raise ParameterError(f"t_ph must be positive, got {self.t_ph!r}")
        if not np.isfinite(self.t0) or self.t0 < 0:
            raise ParameterError(f"t0 must be non-negative, got {self.t0!r}")


@dataclass(frozen=True)
class DerivedQuantities:
    lam: float
    Lam: float
    chi: float
    kappa_q: float
    t_purcell: float
    omega_eff_up: float
    omega_eff_down: float


@dataclass(frozen=True)
class DimensionlessGroup:
    K: float
    X: float
    D_up: float
    D_down: float
    t0: float
    t_ph: float

    def tau_of(self, t):
        return (np.asarray(t, dtype=float) - self.t0) / self.t_ph


def derive_couplings(p: SystemParams, purcell_uses_kappa_q: bool = False) -> DerivedQuantities:
    """Dispersive and Bloch-Siegert ratios, pull, Purcell time.

    Examples
    --------
    >>> d = derive_couplings(SystemParams(5 * GHZ, 4.09 * GHZ, 53.6 * MHZ, 4.08 * MHZ))
    >>> round(d.lam, 4), round(d.chi / MHZ, 2)
    (0.0589, 3.47)
    """
    lam = p.g / (p.omega_q - p.omega_r)
    Lam = p.g / (p.omega_q + p.omega_r)
    chi = p.g * (lam + Lam)
    kappa_q = p.omega_q / p.omega_r * p.kappa
    rate = (kappa_q if purcell_uses_kappa_q else p.kappa) * lam ** 2
    t_purcell = np.inf if rate == 0 else 1.0 / rate
    return DerivedQuantities(lam, Lam, chi, kappa_q, t_purcell,
                             p.omega_r + chi, p.omega_r - chi)


def resolve_carrier(p: SystemParams, pulse: PulseParams) -> PulseParams:
    """Return ``pulse`` with a concrete carrier (omega_r + chi if unset)."""
    if pulse.omega_ph is not None:
        return pulse
    return PulseParams(pulse.t_ph, pulse.t0, derive_couplings(p).omega_eff_up)


def make_dimensionless(p: SystemParams, pulse: PulseParams) -> DimensionlessGroup:
    d = derive_couplings(p)
    pulse = resolve_carrier(p, pulse)
    t = pulse.t_ph
    return DimensionlessGroup(
        K=p.kappa * t,
        X=d.chi * t,
        D_up=(d.omega_eff_up - pulse.omega_ph) * t,
        D_down=(d.omega_eff_down - pulse.omega_ph) * t,
        t0=pulse.t0,
        t_ph=t,
    )


def heaviside(x):
    """Step function with theta(0) = 1/2."""
    return np.heaviside(x, 0.5)


def pulse_spectrum(pulse: PulseParams, omega):
    """Lorentzian single-photon spectrum xi(omega), unit L2 norm over omega."""
    omega = np.asarray(omega, dtype=float)
    w_ph = 0.0 if pulse.omega_ph is None else pulse.omega_ph
    t = pulse.t_ph
    return (np.exp(1j * omega * pulse.t0) / np.sqrt(TWO_PI * t)
            / (omega - w_ph + 0.5j / t))


def pulse_envelope(pulse: PulseParams, t):
    """Time-domain envelope, ``i`` times the unitary Fourier transform of the spectrum.

    The transform convention is F[f](t) = (2 pi)^(-1/2) int f(w) exp(-i w t) dw.
    """
    t = np.asarray(t, dtype=float)
    w_ph = 0.0 if pulse.omega_ph is None else pulse.omega_ph
    s = t - pulse.t0
    # clip keeps exp finite on the causal zero branch
    sc = np.maximum(s, 0.0)
    return (heaviside(s) * np.exp(-1j * w_ph * sc - 0.5 * sc / pulse.t_ph)
            / np.sqrt(pulse.t_ph))


@dataclass(frozen=True)
class RegimeThresholds:
    dispersive: float = 0.05      # 4 lambda^2
    bloch_siegert: float = 0.05   # Lambda^2 / lambda^2
    overdamping: float = 0.01     # kappa / omega_r


@dataclass(frozen=True)
class RegimeReport:
    four_lambda_sq: float
    Lam_sq_over_lam_sq: float
    kappa_over_omega_r: float
    kappa_q_over_omega_q: float
    chi_t_ph: float
    thresholds: RegimeThresholds = field(default_factory=RegimeThresholds)

    @property
    def flags(self) -> dict:
        th = self.thresholds
        return {
            "dispersive": self.four_lambda_sq > th.dispersive,
            "bloch_siegert": self.Lam_sq_over_lam_sq > th.bloch_siegert,
            "overdamping": self.kappa_over_omega_r > th.overdamping,
        }

    @property
    def ok(self) -> bool:
        return not any(self.flags.values())


def validate_regime(p: SystemParams, pulse: PulseParams,
                    thresholds: RegimeThresholds | None = None) -> RegimeReport:
    d = derive_couplings(p)
    ratio = 0.0 if d.lam == 0 else (d.Lam / d.lam) ** 2
    return RegimeReport(
        four_lambda_sq=4 * d.lam ** 2,
        Lam_sq_over_lam_sq=ratio,
        kappa_over_omega_r=p.kappa / p.omega_r,
        kappa_q_over_omega_q=d.kappa_q / p.omega_q,
        chi_t_ph=d.chi * pulse.t_ph,
        thresholds=thresholds or RegimeThresholds(),
    )
