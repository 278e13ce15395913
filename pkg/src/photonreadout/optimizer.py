"""Parameter design: the analytic chain from a target error and numerical
maximization of the beyond-dispersive contrast over (g, kappa).
"""
from __future__ import annotations

import csv
from contextlib import contextmanager
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import (ParameterError, PulseParams, RegimeThresholds, SystemParams,
                   derive_couplings)
from .dispersive import contrast_approx, contrast_dispersive, optimal_cavity_decay
from .transport_full import SolverError, SolverOptions, full_contrast


class InfeasibleTargetError(ValueError):
    pass


class RangeError(ValueError):
    pass


# ---------------------------------------------------------------- analytic chain

def min_pulse_duration(epsilon, chi, eta=1.0):
    """Shortest pulse giving readout error ``epsilon`` at the optimal K.

    Returns ``(t_ph, valid)``; ``valid`` is False when ``eta != 1`` since
    the bound assumes an ideal detector.

    >>> t, ok = min_pulse_duration(0.00375, 1.0)
    >>> round(t, 6), ok
    (1000.0, True)
    """
    if not 0 < epsilon < 0.375:
        raise ValueError("epsilon must lie in (0, 3/8)")
    if chi <= 0:
        raise ValueError("chi must be positive")
    return (0.375 / epsilon) ** 1.5 / chi, eta == 1.0


@dataclass(frozen=True)
class DesignTargets:
    """Inputs of the analytic chain.

    ``ratio_tm_Tp`` is t_m / T_Purcell and ``ratio_tm_tph`` is t_m / t_ph.
    """

    epsilon: float
    ratio_lambda_Lambda: float
    omega_q: float
    ratio_tm_tph: float = 6.0
    ratio_tm_Tp: float = 0.1

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ParameterError("epsilon must lie in (0, 0.5)")
        if self.ratio_lambda_Lambda <= 1:
            raise ParameterError("lambda / Lambda must exceed 1")
        if min(self.omega_q, self.ratio_tm_tph, self.ratio_tm_Tp) <= 0:
            raise ParameterError("omega_q and ratios must be positive")


@dataclass(frozen=True)
class ParameterPlan:
    system: SystemParams
    pulse: PulseParams
    t_m: float
    lam: float
    Lam: float
    chi: float
    K: float
    X: float
    t_purcell: float
    contrast_d: float
    residuals: dict = field(default_factory=dict)

    @property
    def t_purcell_actual(self):
        """1 / (kappa lambda^2) with kappa from the exact optimal K."""
        return 1.0 / (self.system.kappa * self.lam ** 2)


def analytic_plan(targets: DesignTargets, thresholds: RegimeThresholds | None = None) -> ParameterPlan:
    """Full parameter set from a target error.

    The Purcell time entering the chain is the targeted one,
    T_P = t_m / ratio_tm_Tp. Because kappa uses the exact optimal K rather
    than its asymptote, 1 / (kappa lambda^2) differs from it slightly; see
    :attr:`ParameterPlan.t_purcell_actual`.
    """
    th = thresholds or RegimeThresholds()
    rho = targets.ratio_lambda_Lambda
    wq = targets.omega_q
    tp_over_tph = targets.ratio_tm_tph / targets.ratio_tm_Tp
    lam = np.sqrt(targets.epsilon / (0.75 * tp_over_tph))
    if 4 * lam ** 2 > th.dispersive:
        raise InfeasibleTargetError(
            f"epsilon={targets.epsilon:g} needs lambda={lam:.4g}, 4 lambda^2={4 * lam**2:.3g} "
            f"exceeds the dispersive threshold {th.dispersive:g}; lower epsilon or "
            f"raise T_P / t_ph")
    wr = wq * (rho - 1) / (rho + 1)
    g = 2 * lam * wq / (rho + 1)
    Lam = lam / rho
    r = 1.0 / tp_over_tph
    t_ph = 0.5 * rho * (0.5 * r) ** 1.5 / (lam ** 5 * wq)
    chi = g * (lam + Lam)
    X = chi * t_ph
    K = float(optimal_cavity_decay(X))
    kappa = K / t_ph
    t_m = targets.ratio_tm_tph * t_ph
    t_p = t_m / targets.ratio_tm_Tp
    system = SystemParams(wq, wr, g, kappa)
    pulse = PulseParams(t_ph)
    d = derive_couplings(system)
    res = {
        "epsilon": abs(0.75 * t_p / t_ph * d.lam ** 2 / targets.epsilon - 1),
        "omega_r": abs(wq * (d.lam / d.Lam - 1) / (d.lam / d.Lam + 1) / wr - 1),
        "g": abs(2 * d.lam * wq / (d.lam / d.Lam + 1) / g - 1),
        "t_ph": abs(0.5 * d.lam / d.Lam * (t_ph / (2 * t_p)) ** 1.5 / (d.lam ** 5 * wq) / t_ph - 1),
        "K": abs(kappa * t_ph / float(optimal_cavity_decay(d.chi * t_ph)) - 1),
    }
    c_d = float(contrast_dispersive(K, X, tau_m=targets.ratio_tm_tph))
    return ParameterPlan(system, pulse, t_m, d.lam, d.Lam, d.chi, K, d.chi * t_ph,
                         t_p, c_d, res)


def predicted_error(K, eta=1.0):
    """Readout error (1 - C) / 2 of the approximate law."""
    return 0.5 * (1.0 - contrast_approx(K, eta).value)


# ---------------------------------------------------------------- maps

@dataclass(frozen=True)
class MapResult:
    g: np.ndarray
    kappa: np.ndarray
    contrast: np.ndarray      # shape (len(g), len(kappa)); NaN where invalid
    p_up: np.ndarray
    valid: np.ndarray
    errors: dict
    argmax: tuple

    @property
    def best(self):
        i, j = self.argmax
        return self.g[i], self.kappa[j], self.contrast[i, j]


def _cell(args):
    p, ratio, t_m, options = args
    try:
        r = full_contrast(p, PulseParams(t_m / ratio), t_m, options=options)
        return r.contrast, r.p_up, ""
    except (SolverError, ParameterError, np.linalg.LinAlgError) as e:
        return np.nan, np.nan, str(e)


def _run(tasks, jobs):
    if jobs is None or jobs <= 1 or len(tasks) < 2:
        return [_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _axis(lo, hi, n):
    if not (0 < lo < hi):
        raise RangeError(f"range must satisfy 0 < lo < hi, got ({lo!r}, {hi!r})")
    return np.geomspace(lo, hi, n)


def contrast_map(p_base: SystemParams, t_m: float, g_range, kappa_range,
                 resolution=(8, 8), ratio_tm_tph=6.0, options: SolverOptions | None = None,
                 jobs=1) -> MapResult:
    """Full-model contrast on a log-spaced (g, kappa) grid.

    The probe sits on the up-state resonance of each cell and
    t_ph = t_m / ratio_tm_tph. Cells whose solve fails are marked invalid.
    """
    ng, nk = resolution
    if ng < 8 or nk < 8:
        raise RangeError("resolution must be at least 8 x 8")
    gs = _axis(*g_range, ng)
    ks = _axis(*kappa_range, nk)
    tasks = [(p_base.replace(g=g, kappa=k), ratio_tm_tph, t_m, options)
             for g in gs for k in ks]
    out = _run(tasks, jobs)
    C = np.array([o[0] for o in out]).reshape(ng, nk)
    P = np.array([o[1] for o in out]).reshape(ng, nk)
    errs = {divmod(i, nk): o[2] for i, o in enumerate(out) if o[2]}
    valid = np.isfinite(C)
    if not valid.any():
        raise SolverError("every map cell failed")
    am = np.unravel_index(np.nanargmax(C), C.shape)
    return MapResult(gs, ks, C, P, valid, errs, (int(am[0]), int(am[1])))


@contextmanager
def _open(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as f:
            yield f


def write_map_csv(target, m: MapResult, scale=1.0):
    """Columns g, kappa, C_n, P_up, valid, g-major order (gnuplot ``every`` friendly).

    ``target`` is a path or an open text file.
    """
    with _open(target) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["g", "kappa", "C_n", "P_up", "valid"])
        for i, g in enumerate(m.g):
            for j, k in enumerate(m.kappa):
                w.writerow([_fmt(g / scale), _fmt(k / scale), _fmt(m.contrast[i, j]),
                            _fmt(m.p_up[i, j]), int(m.valid[i, j])])


def _fmt(x):
    return "nan" if not np.isfinite(x) else format(float(x), ".9g")


# ---------------------------------------------------------------- direct search

@dataclass(frozen=True)
class OptimumPoint:
    g_opt: float
    kappa_opt: float
    C_max: float
    p_up: float
    boundary_pinned: bool
    neighbors: dict
    samples: MapResult | None = None
    n_eval: int = 0


def numeric_optimize(p_base: SystemParams, t_m: float, g_bounds, kappa_bounds,
                     ratio_tm_tph=6.0, coarse=(8, 8), seed=None,
                     options: SolverOptions | None = None, jobs=1,
                     stop_pp=0.02) -> OptimumPoint:
    """Coarse map, then Nelder-Mead on (log g, log kappa).

    Parameters
    ----------
    seed : (g, kappa), optional
        Extra starting point (for instance an analytic plan); the search
        starts from whichever of seed and map argmax is better.
    stop_pp : float
        Stop once the simplex contrast spread falls below this many
        percentage points.
    """
    if p_base.omega_q <= p_base.omega_r:
        raise RangeError("optimization assumes omega_q > omega_r")
    m = contrast_map(p_base, t_m, g_bounds, kappa_bounds, coarse, ratio_tm_tph, options, jobs)
    lo = np.log([g_bounds[0], kappa_bounds[0]])
    hi = np.log([g_bounds[1], kappa_bounds[1]])
    n_eval = m.contrast.size

    def evaluate(g, k):
        C, P, err = _cell((p_base.replace(g=g, kappa=k), ratio_tm_tph, t_m, options))
        return C, P

    def f(x):
        nonlocal n_eval
        x = np.clip(x, lo, hi)
        n_eval += 1
        C, _ = evaluate(*np.exp(x))
        return -C if np.isfinite(C) else 1.0

    g0, k0, c0 = m.best
    x0 = np.log([g0, k0])
    if seed is not None:
        cs, _ = evaluate(*seed)
        if np.isfinite(cs) and cs > c0:
            x0 = np.log(seed)
    # initial simplex spans roughly one coarse cell
    step = (hi - lo) / np.array(coarse)
    simplex = np.array([x0, x0 + [step[0], 0], x0 + [0, step[1]]])
    r = optimize.minimize(f, x0, method="Nelder-Mead",
                          options={"initial_simplex": simplex, "fatol": stop_pp / 100,
                                   "xatol": 1e-4, "maxiter": 400})
    x = np.clip(r.x, lo, hi)
    g, k = np.exp(x)
    C, P = evaluate(g, k)
    nb = {}
    for name, (dg, dk) in {"g+": (1.02, 1), "g-": (0.98, 1),
                           "kappa+": (1, 1.02), "kappa-": (1, 0.98)}.items():
        nb[name] = evaluate(g * dg, k * dk)[0]
    pinned = bool(np.any(np.abs(x - lo) < 1e-3) or np.any(np.abs(x - hi) < 1e-3))
    return OptimumPoint(float(g), float(k), float(C), float(P), pinned, nb, m, n_eval)


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class Curve:
    sweep: str
    values: np.ndarray
    points: list
    increasing: bool
    steps: np.ndarray

    @property
    def c_max(self):
        return np.array([p.C_max for p in self.points])


def detuned_system(detuning, ratio_lambda_Lambda=10.0, g=0.0, kappa=1.0, eta=1.0):
    """System with omega_q - omega_r = ``detuning`` and the given lambda / Lambda."""
    rho = ratio_lambda_Lambda
    wq = 0.5 * detuning * (rho + 1)
    return SystemParams(wq, wq * (rho - 1) / (rho + 1), g, kappa, eta)


def cmax_curve(sweep: str, values, p_base: SystemParams, t_m=None, ratio_tm_tph=6.0,
               g_bounds=None, kappa_bounds=None, ratio_lambda_Lambda=10.0,
               options: SolverOptions | None = None, jobs=1, coarse=(8, 8)) -> Curve:
    """Maximal contrast along a sweep.

    ``sweep="pulse_duration"`` treats ``values`` as measurement times t_m
    (t_ph = t_m / ratio_tm_tph) at the detuning of ``p_base``.
    ``sweep="detuning"`` treats ``values`` as omega_q - omega_r at fixed
    ``t_m`` with lambda / Lambda held at ``ratio_lambda_Lambda``.
    Bounds may be callables of the sweep value.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise RangeError("empty sweep")
    pts = []
    for v in values:
        if sweep == "pulse_duration":
            p, tm = p_base, v
        elif sweep == "detuning":
            if t_m is None:
                raise RangeError("detuning sweep needs t_m")
            p = detuned_system(v, ratio_lambda_Lambda, p_base.g, p_base.kappa, p_base.eta)
            tm = t_m
        else:
            raise RangeError(f"unknown sweep {sweep!r}")
        gb = g_bounds(v) if callable(g_bounds) else g_bounds
        kb = kappa_bounds(v) if callable(kappa_bounds) else kappa_bounds
        pts.append(numeric_optimize(p, tm, gb, kb, ratio_tm_tph, coarse,
                                    options=options, jobs=jobs))
    c = np.array([q.C_max for q in pts])
    steps = np.diff(c)
    return Curve(sweep, values, pts, bool(np.all(steps > 0)), steps)


def write_curve_csv(target, curve: Curve, scale=1.0):
    with _open(target) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["value", "C_max", "g_opt", "kappa_opt", "P_up", "pinned"])
        for v, q in zip(curve.values, curve.points):
            w.writerow([_fmt(v), _fmt(q.C_max), _fmt(q.g_opt / scale),
                        _fmt(q.kappa_opt / scale), _fmt(q.p_up), int(q.boundary_pinned)])
