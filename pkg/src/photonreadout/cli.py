"""Command-line entry point.

Exit codes: 0 success, 2 configuration or usage error, 3 regime violation
under ``--strict``, 4 solver failure. CSV numbers carry 9 significant
digits with a '.' decimal separator.
"""
from __future__ import annotations

import argparse
import csv
import sys
from contextlib import contextmanager

import numpy as np

from .config import ConfigError, load_config
from .core import (GHZ, MHZ, US, ParameterError, derive_couplings, make_dimensionless,
                   validate_regime)
from .dispersive import contrast_dispersive
from .optimizer import (RangeError, cmax_curve, contrast_map, numeric_optimize,
                        write_curve_csv, write_map_csv)
from .presets import TABLES, recompute
from .transport_full import SolverError, SolverOptions, full_contrast, make_grid

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_SOLVER = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, msg, code):
        self.code = code
        super().__init__(msg)


def _fmt(x):
    return "nan" if not np.isfinite(x) else format(float(x), ".9g")


@contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as f:
            yield f


def _write_rows(path, header, rows):
    with _sink(path) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _pair(text, what):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise CliError(f"{what} must look like LO,HI", EXIT_CONFIG) from None
    if not 0 < lo < hi:
        raise CliError(f"{what} has zero or negative extent: {text}", EXIT_CONFIG)
    return lo, hi


def _shape(text):
    try:
        a, b = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise CliError("resolution must look like NxM", EXIT_CONFIG) from None
    return a, b


def _load(args):
    if not args.config:
        raise CliError("--config is required", EXIT_CONFIG)
    return load_config(args.config)


def _regime(cfg, strict):
    rep = validate_regime(cfg.system, cfg.pulse, cfg.thresholds)
    bad = [k for k, v in rep.flags.items() if v]
    if bad:
        print(f"warning: regime thresholds exceeded: {', '.join(bad)}", file=sys.stderr)
        if strict:
            raise CliError("regime violation under --strict", EXIT_REGIME)
    return rep


# ---------------------------------------------------------------- commands

def cmd_derive(args):
    cfg = _load(args)
    d = derive_couplings(cfg.system)
    rep = validate_regime(cfg.system, cfg.pulse, cfg.thresholds)
    rows = [
        ("lambda", d.lam), ("Lambda", d.Lam), ("chi_mhz", d.chi / MHZ),
        ("kappa_q_mhz", d.kappa_q / MHZ), ("t_purcell_us", d.t_purcell / US),
        ("omega_eff_up_ghz", d.omega_eff_up / GHZ), ("omega_eff_down_ghz", d.omega_eff_down / GHZ),
        ("four_lambda_sq", rep.four_lambda_sq), ("Lambda_sq_over_lambda_sq", rep.Lam_sq_over_lam_sq),
        ("kappa_over_omega_r", rep.kappa_over_omega_r), ("chi_t_ph", rep.chi_t_ph),
    ]
    for k, v in rows:
        print(f"{k:<26s} {_fmt(v):>16s}")
    for k, v in rep.flags.items():
        print(f"{'flag_' + k:<26s} {('VIOLATED' if v else 'ok'):>16s}")
    if args.out:
        _write_rows(args.out, ["quantity", "value"], [(k, _fmt(v)) for k, v in rows])
    _regime(cfg, args.strict)
    return EXIT_OK


def _options(args):
    return SolverOptions(equations=args.equations, click_formula=args.click_formula)


def cmd_contrast(args):
    cfg = _load(args)
    _regime(cfg, args.strict)
    model = args.model or cfg.model or "dispersive"
    p, pulse, t_m = cfg.system, cfg.pulse, cfg.t_m
    if model == "dispersive":
        dg = make_dimensionless(p, pulse)
        c = float(contrast_dispersive(dg.K, dg.X, p.eta, tau_m=dg.tau_of(t_m), D_up=dg.D_up))
        print(f"{'C_d':<12s} {_fmt(c):>16s}")
        if args.out:
            _write_rows(args.out, ["model", "C"], [("dispersive", _fmt(c))])
        return EXIT_OK
    method = args.method
    grid = None
    span = args.grid_span * MHZ if args.grid_span else cfg.grid_span
    nodes = args.grid_nodes or cfg.grid_nodes
    tol = args.tol or cfg.tol
    if method == "kgrid":
        grid = make_grid(p, pulse, span=span, nodes=nodes or 1200)
    r = full_contrast(p, pulse, t_m, grid, method, _options(args), tol=tol)
    rows = [("C_n", r.contrast), ("P_click_up", r.click_up), ("P_click_down", r.click_down),
            ("P_up", r.p_up), ("two_photon_up", r.up.two_photon),
            ("norm_up", r.up.norm[-1]), ("norm_down", r.down.norm[-1])]
    for k, v in rows:
        print(f"{k:<14s} {_fmt(v):>16s}")
    print(f"{'method':<14s} {method:>16s}")
    if args.out:
        _write_rows(args.out, ["quantity", "value"], [(k, _fmt(v)) for k, v in rows])
    return EXIT_OK


def cmd_tables(args):
    rows = []
    for res in recompute(args.which, _options(args), full=not args.dispersive_only):
        r = res.row
        rec = [args.which, r.row, r.kind]
        for ref, got in ((r.ref_C_d, res.C_d), (r.ref_C_n, res.C_n), (r.ref_P_up, res.P_up)):
            rec += [_fmt(100 * ref), _fmt(100 * got), _fmt(100 * (got - ref))]
        rec.append(res.error)
        rows.append(rec)
        if res.error:
            print(f"row {r.row}: {res.error}", file=sys.stderr)
    _write_rows(args.out, ["table", "row", "kind", "C_d_ref", "C_d", "C_d_delta",
                           "C_n_ref", "C_n", "C_n_delta", "P_up_ref", "P_up", "P_up_delta",
                           "error"], rows)
    return EXIT_OK


def _ranges(args):
    return (tuple(v * MHZ for v in _pair(args.g_range, "--g-range")),
            tuple(v * MHZ for v in _pair(args.kappa_range, "--kappa-range")))


def _ratio(cfg):
    return cfg.t_m / cfg.pulse.t_ph


def cmd_map(args):
    cfg = _load(args)
    gb, kb = _ranges(args)
    m = contrast_map(cfg.system, cfg.t_m, gb, kb, _shape(args.resolution), _ratio(cfg),
                     _options(args), args.jobs)
    g, k, c = m.best
    print(f"C_max {_fmt(c)} at g/2pi={_fmt(g / MHZ)} MHz kappa/2pi={_fmt(k / MHZ)} MHz; "
          f"{int((~m.valid).sum())} invalid cells", file=sys.stderr)
    with _sink(args.out) as f:
        write_map_csv(f, m, MHZ)
    return EXIT_OK


def cmd_optimize(args):
    cfg = _load(args)
    gb, kb = _ranges(args)
    o = numeric_optimize(cfg.system, cfg.t_m, gb, kb, _ratio(cfg), _shape(args.resolution),
                         options=_options(args), jobs=args.jobs)
    if o.boundary_pinned:
        print("warning: optimum pinned to a bound; widen the ranges", file=sys.stderr)
    rows = [("C_max", o.C_max), ("g_opt_mhz", o.g_opt / MHZ), ("kappa_opt_mhz", o.kappa_opt / MHZ),
            ("P_up", o.p_up), ("boundary_pinned", int(o.boundary_pinned)), ("evaluations", o.n_eval)]
    for k, v in rows:
        print(f"{k:<16s} {_fmt(v):>16s}")
    if args.out:
        _write_rows(args.out, ["quantity", "value"], [(k, _fmt(v)) for k, v in rows])
    return EXIT_OK


def cmd_curve(args):
    cfg = _load(args)
    gb, kb = _ranges(args)
    try:
        vals = [float(v) for v in args.values.split(",")]
    except ValueError:
        raise CliError("--values must be a comma separated list", EXIT_CONFIG) from None
    base_tm = cfg.t_m
    base_det = cfg.system.omega_q - cfg.system.omega_r
    if args.sweep == "pulse_duration":
        values = np.array(vals) * US
        # optimal kappa scales roughly as 1 / t_m and g weakly with t_m
        g_b = lambda v: tuple(x * (base_tm / v) ** 0.2 for x in gb)
        k_b = lambda v: tuple(x * base_tm / v for x in kb)
        c = cmax_curve("pulse_duration", values, cfg.system, ratio_tm_tph=_ratio(cfg),
                       g_bounds=g_b, kappa_bounds=k_b, options=_options(args),
                       jobs=args.jobs, coarse=_shape(args.resolution))
        scale = US
    else:
        values = np.array(vals) * GHZ
        g_b = lambda v: tuple(x * v / base_det for x in gb)
        c = cmax_curve("detuning", values, cfg.system, t_m=base_tm, ratio_tm_tph=_ratio(cfg),
                       g_bounds=g_b, kappa_bounds=kb, options=_options(args),
                       jobs=args.jobs, coarse=_shape(args.resolution))
        scale = GHZ
    c = type(c)(c.sweep, c.values / scale, c.points, c.increasing, c.steps)
    print(f"monotone increasing: {c.increasing}", file=sys.stderr)
    with _sink(args.out) as f:
        write_curve_csv(f, c, MHZ)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    ap = argparse.ArgumentParser(prog="photonreadout",
                                 description="Single-photon qubit readout contrast calculator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="key = value run file")
        sp.add_argument("--out", help="CSV output path")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--equations", choices=("hermitian", "asymmetric"), default="hermitian")
        sp.add_argument("--click-formula", choices=("physical", "excited"), default="physical")

    sp = sub.add_parser("derive", help="derived couplings and regime report")
    common(sp)
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_derive)

    sp = sub.add_parser("contrast", help="contrast for one configuration")
    common(sp)
    sp.add_argument("--model", choices=("dispersive", "full"))
    sp.add_argument("--method", choices=("cascade", "kgrid"), default="cascade")
    sp.add_argument("--strict", action="store_true")
    sp.add_argument("--grid-span", type=float, help="k-grid half-width, MHz")
    sp.add_argument("--grid-nodes", type=int)
    sp.add_argument("--tol", type=float, help="k-grid time-step scale")
    sp.set_defaults(func=cmd_contrast)

    sp = sub.add_parser("tables", help="recompute the bundled reference tables")
    common(sp, config=False)
    sp.add_argument("--which", choices=TABLES, required=True)
    sp.add_argument("--dispersive-only", action="store_true")
    sp.set_defaults(func=cmd_tables)

    for name, fn, hlp in (("map", cmd_map, "contrast over a (g, kappa) grid"),
                          ("optimize", cmd_optimize, "maximize contrast over (g, kappa)"),
                          ("curve", cmd_curve, "maximal contrast along a sweep")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.add_argument("--g-range", default="20,200", help="g/2pi LO,HI in MHz")
        sp.add_argument("--kappa-range", default="1,20", help="kappa/2pi LO,HI in MHz")
        sp.add_argument("--resolution", default="8x8")
        if name == "curve":
            sp.add_argument("--sweep", choices=("pulse_duration", "detuning"), required=True)
            sp.add_argument("--values", required=True,
                            help="t_m in us (pulse_duration) or omega_q - omega_r in GHz")
        sp.set_defaults(func=fn)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RangeError, ParameterError, CliError) as e:
        code = getattr(e, "code", EXIT_CONFIG)
        print(f"error: {e}", file=sys.stderr)
        return code
    except SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
