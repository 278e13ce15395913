"""Flat ``key = value`` run configuration.

Grammar, one entry per line::

    # comment
    omega_q_ghz = 5.0
    omega_ph_ghz = resonant-up

Blank lines and ``#`` comments are ignored. Keys are case-sensitive and
may appear once. Frequencies are ordinary (not angular) and converted by
2 pi on load.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .core import (GHZ, MHZ, US, ParameterError, PulseParams, RegimeThresholds,
                   SystemParams)


class ConfigError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


REQUIRED = ("omega_q_ghz", "omega_r_ghz", "g_mhz", "kappa_mhz")
FLOAT_KEYS = {
    "omega_q_ghz", "omega_r_ghz", "g_mhz", "kappa_mhz", "eta", "t_ph_us",
    "t0_us", "t_m_us", "tm_over_tph", "grid_span_mhz", "tol",
    "thr_dispersive", "thr_bloch_siegert", "thr_overdamping",
}
INT_KEYS = {"grid_nodes"}
STR_KEYS = {"omega_ph_ghz", "model", "name"}
KNOWN = FLOAT_KEYS | INT_KEYS | STR_KEYS


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams
    pulse: PulseParams
    t_m: float
    grid_span: float | None = None
    grid_nodes: int | None = None
    tol: float | None = None
    thresholds: RegimeThresholds = field(default_factory=RegimeThresholds)
    name: str = ""
    model: str | None = None


def parse_text(text: str) -> dict:
    out, where = {}, {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", i)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN:
            raise ConfigError(f"unknown key {key!r}", i)
        if key in out:
            raise ConfigError(f"duplicate key {key!r} (first on line {where[key]})", i)
        if not val:
            raise ConfigError(f"empty value for {key!r}", i)
        try:
            if key in FLOAT_KEYS:
                out[key] = float(val)
            elif key in INT_KEYS:
                out[key] = int(val)
            else:
                out[key] = val
        except ValueError:
            raise ConfigError(f"bad value {val!r} for {key!r}", i) from None
        where[key] = i
    out["_lines"] = where
    return out


def build_config(d: dict) -> RunConfig:
    lines = d.get("_lines", {})
    for k in REQUIRED:
        if k not in d:
            raise ConfigError(f"missing required key {k!r}")
    ratio = d.get("tm_over_tph", 6.0)
    t_ph = d.get("t_ph_us")
    t_m = d.get("t_m_us")
    if t_ph is None and t_m is None:
        raise ConfigError("need t_ph_us or t_m_us")
    if t_ph is None:
        t_ph = t_m / ratio
    if t_m is None:
        t_m = t_ph * ratio
    wph = d.get("omega_ph_ghz", "resonant-up")
    if wph == "resonant-up":
        omega_ph = None
    else:
        try:
            omega_ph = float(wph) * GHZ
        except ValueError:
            raise ConfigError(f"omega_ph_ghz must be a number or 'resonant-up', got {wph!r}",
                              lines.get("omega_ph_ghz")) from None
    try:
        system = SystemParams(d["omega_q_ghz"] * GHZ, d["omega_r_ghz"] * GHZ,
                              d["g_mhz"] * MHZ, d["kappa_mhz"] * MHZ, d.get("eta", 1.0))
        pulse = PulseParams(t_ph * US, d.get("t0_us", 0.0) * US, omega_ph)
    except ParameterError as e:
        raise ConfigError(str(e)) from None
    if t_m <= 0:
        raise ConfigError("t_m must be positive", lines.get("t_m_us"))
    th = RegimeThresholds(
        d.get("thr_dispersive", RegimeThresholds.dispersive),
        d.get("thr_bloch_siegert", RegimeThresholds.bloch_siegert),
        d.get("thr_overdamping", RegimeThresholds.overdamping),
    )
    model = d.get("model")
    if model is not None and model not in ("dispersive", "full"):
        raise ConfigError(f"model must be 'dispersive' or 'full', got {model!r}", lines.get("model"))
    span = d.get("grid_span_mhz")
    return RunConfig(system, pulse, t_m * US,
                     grid_span=None if span is None else span * MHZ,
                     grid_nodes=d.get("grid_nodes"), tol=d.get("tol"),
                     thresholds=th, name=d.get("name", ""), model=model)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return build_config(parse_text(text))
