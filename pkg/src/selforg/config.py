"""Scenario configuration files (YAML, natural units).

Sections and keys (all optional except ``geometry.n``)::

    geometry:  kind (chain|ring), n, a0, theta, dipole (z|circular|[dx, dy, dz])
    params:    rabi, detuning, trap_freq, recoil_freq, friction
    run:       mode (adiabatic|full), t_max, stride, motion_axes (x|radial|xy)
    ensemble:  n_realizations, disorder_amplitude, base_seed
    sweep:     axis, values | (start, stop, num)
    potential: grid_min, grid_max, points_per_lambda, thetas
    spectrum:  cutoff_cells, k_points
    output:    directory, formats

Omitted trap frequencies default to 1.0 omega_r for chains of three or
more atoms and 0.1 omega_r for rings and atom pairs. Complex dipole
components may be written as strings such as ``"0.7071j"``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import yaml

from .dynamics import Mode, StopCriteria
from .ensemble import Scenario
from .model import GeometryKind, MotionAxes, SystemParams, Z_DIPOLE, CIRCULAR_DIPOLE


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


SCHEMA = {
    "geometry": {"kind": "chain", "n": None, "a0": 0.5, "theta": None, "dipole": None},
    "params": {"rabi": 0.05, "detuning": 0.0, "trap_freq": None, "recoil_freq": 1e-3, "friction": 0.005},
    "run": {"mode": "adiabatic", "t_max": 2e6, "stride": 1, "motion_axes": None},
    "ensemble": {"n_realizations": 30, "disorder_amplitude": 0.01, "base_seed": 0},
    "sweep": {"axis": "a0", "values": None, "start": None, "stop": None, "num": None},
    "potential": {"grid_min": None, "grid_max": None, "points_per_lambda": 2000, "thetas": None},
    "spectrum": {"cutoff_cells": 100, "k_points": 401},
    "output": {"directory": "out", "formats": ["csv", "json"]},
}


@dataclass
class ScenarioConfig:
    geometry: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    potential: dict = field(default_factory=dict)
    spectrum: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @property
    def kind(self):
        return GeometryKind(self.geometry["kind"])

    @property
    def n(self):
        return int(self.geometry["n"])

    @property
    def a0(self):
        return float(self.geometry["a0"])

    def dipole(self):
        spec = self.geometry.get("dipole")
        theta = self.geometry.get("theta")
        if spec is None and theta is not None:
            return np.array([np.cos(theta), 1j * np.sin(theta), 0.0])
        if spec is None:
            return CIRCULAR_DIPOLE if self.kind is GeometryKind.RING else Z_DIPOLE
        if isinstance(spec, str):
            named = {"z": Z_DIPOLE, "circular": CIRCULAR_DIPOLE}
            if spec not in named:
                raise ConfigError(f"unknown dipole name {spec!r}", "geometry.dipole")
            return named[spec]
        try:
            vec = np.array([complex(str(c).replace(" ", "")) for c in spec])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse dipole {spec!r}", "geometry.dipole") from exc
        if vec.shape != (3,) or abs(np.linalg.norm(vec) - 1) > 1e-12:
            raise ConfigError("dipole must be a unit 3-vector", "geometry.dipole")
        return vec

    def system_params(self):
        p = dict(self.params)
        if p["trap_freq"] is None:
            p["trap_freq"] = 1.0 if (self.kind is GeometryKind.CHAIN and self.n >= 3) else 0.1
        return SystemParams(dipole=self.dipole(), **{k: float(v) for k, v in p.items()})

    def stop(self):
        return StopCriteria(t_max=float(self.run["t_max"]), stride=int(self.run["stride"]))

    def scenario(self):
        axes = self.run.get("motion_axes")
        return Scenario(
            kind=self.kind,
            n=self.n,
            spacing=self.a0,
            dipole=tuple(self.dipole()),
            motion_axes=None if axes is None else MotionAxes(axes),
            params=self.system_params(),
            mode=Mode(self.run["mode"]),
            stop=self.stop(),
        )

    def sweep_values(self):
        s = self.sweep
        if s.get("values") is not None:
            return np.asarray(s["values"], dtype=float)
        if s.get("start") is not None and s.get("stop") is not None and s.get("num") is not None:
            return np.linspace(float(s["start"]), float(s["stop"]), int(s["num"]))
        raise ConfigError("sweep needs values or start/stop/num", "sweep.values")

    def as_dict(self):
        return {name: copy.deepcopy(getattr(self, name)) for name in SCHEMA}


def _merge(base, override, prefix=""):
    if not isinstance(override, dict):
        raise ConfigError(f"section {prefix or 'root'} must be a mapping", prefix or None)
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if key not in base:
            raise ConfigError(f"unknown key {path!r}", path)
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], value or {}, path)
        else:
            out[key] = value
    return out


def build_config(data=None, *overrides):
    merged = copy.deepcopy(SCHEMA)
    for layer in (data, *overrides):
        if layer:
            merged = _merge(merged, layer)
    cfg = ScenarioConfig(**merged)
    validate(cfg)
    return cfg


def validate(cfg):
    g = cfg.geometry
    if g["n"] is None:
        raise ConfigError("geometry.n is required", "geometry.n")
    try:
        kind = GeometryKind(g["kind"])
        Mode(cfg.run["mode"])
        if cfg.run["motion_axes"] is not None:
            MotionAxes(cfg.run["motion_axes"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if kind is GeometryKind.CUSTOM:
        raise ConfigError("custom geometries are not supported in config files", "geometry.kind")
    if not isinstance(g["n"], int) or g["n"] < 1:
        raise ConfigError("geometry.n must be a positive integer", "geometry.n")
    if kind is GeometryKind.RING and g["n"] < 3:
        raise ConfigError("a ring needs at least 3 atoms", "geometry.n")
    if not float(g["a0"]) > 0:
        raise ConfigError("geometry.a0 must be positive", "geometry.a0")
    cfg.dipole()


def read_config_data(path):
    """Raw mapping from a YAML file; syntax errors carry the line number."""
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"parse error at line {line}: {exc.problem}", line=line) from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("top level must be a mapping of sections")
    return data or {}


def load_config(path, *overrides):
    """Parse a YAML scenario file; unknown keys are errors."""
    return build_config(read_config_data(path), *overrides)
