"""Run configuration: INI files with [problem], [solver], [experiment], [sweep].

Example::

    [problem]
    reg = l1
    kappa = 1
    sparsity = 0.25

    [sweep]
    delta = 2, 4
    lambda = 0.05:0.4:8

    [experiment]
    p = 250
    trials = 100
    seed = 2019

Grids are comma lists or ``start:stop:count[:lin|log]``.
"""
from __future__ import annotations

import configparser
from dataclasses import replace

import numpy as np

from .lab import FistaKnobs
from .solver import SolverKnobs
from .sweep import SweepConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names section and key."""


SCHEMA = {
    "problem": {"reg": str, "kappa": float, "sparsity": float, "delta": "grid", "lambda": "grid"},
    "sweep": {"delta": "grid", "lambda": "grid", "workers": int},
    "solver": {"quad_order": int, "tol": float, "max_iter": int, "damping": float},
    "experiment": {
        "p": int, "trials": int, "seed": int, "epsilon": float,
        "fista_tol": float, "fista_max_iter": int,
    },
}

PRESETS = {
    "figure1": """
[problem]
reg = l2sq
kappa = 1
[sweep]
delta = 2, 4, 8
lambda = 0.05:1.0:8
[experiment]
p = 250
trials = 100
seed = 2019
""",
    "figure2": """
[problem]
reg = l1
kappa = 1
sparsity = 0.25
[sweep]
delta = 2, 4
lambda = 0.05:0.4:8
[experiment]
p = 250
trials = 100
seed = 2019
epsilon = 0.001
""",
}
PRESETS["figure3"] = PRESETS["figure2"]


def parse_grid(text: str) -> tuple:
    """``"2,4,8"`` or ``"start:stop:count[:lin|log]"`` to a tuple of floats."""
    text = str(text).strip()
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) not in (3, 4):
            raise ValueError(f"grid {text!r} must be start:stop:count[:lin|log]")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        scale = parts[3] if len(parts) == 4 else "lin"
        if count < 1:
            raise ValueError("grid count must be positive")
        if scale == "lin":
            vals = np.linspace(start, stop, count)
        elif scale == "log":
            if start <= 0 or stop <= 0:
                raise ValueError("log grid needs positive endpoints")
            vals = np.geomspace(start, stop, count)
        else:
            raise ValueError(f"grid scale must be lin or log, not {scale!r}")
        return tuple(float(v) for v in vals)
    vals = tuple(float(v) for v in text.split(",") if v.strip())
    if not vals:
        raise ValueError("empty grid")
    return vals


def _convert(section, key, raw):
    kind = SCHEMA[section][key]
    try:
        if kind == "grid":
            return parse_grid(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return str(raw).strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def read_ini(text: str, source: str = "<config>") -> dict:
    """Parse INI text into ``{(section, key): value}``, rejecting unknown fields."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: [{section}] unknown key {key!r}")
            values[(section, key)] = _convert(section, key, raw)
    return values


def build(values: dict, base: SweepConfig | None = None) -> SweepConfig:
    """Apply parsed values on top of ``base`` (defaults when None)."""
    cfg = base or SweepConfig()
    solver, fista = cfg.solver, cfg.fista
    upd = {}
    for (section, key), val in values.items():
        if section == "problem" and key in ("reg", "kappa", "sparsity"):
            upd[key] = val
        elif key == "delta":
            upd["deltas"] = val
        elif key == "lambda":
            upd["lambdas"] = val
        elif key == "workers":
            upd["workers"] = val
        elif section == "solver":
            solver = replace(solver, **{key: val})
        elif key in ("p", "trials", "epsilon"):
            upd[key] = val
        elif key == "seed":
            upd["master_seed"] = val
        elif key == "fista_tol":
            fista = replace(fista, tol=val)
        elif key == "fista_max_iter":
            fista = replace(fista, max_iter=val)
    try:
        cfg = replace(cfg, solver=solver, fista=fista, **upd)
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None
    if cfg.reg == "none" and "lambdas" not in upd:
        cfg = replace(cfg, lambdas=(0.0,))
    return cfg


def load(path: str | None = None, preset: str | None = None, overrides: dict | None = None) -> SweepConfig:
    cfg = SweepConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = build(read_ini(PRESETS[preset], f"preset {preset}"), cfg)
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        cfg = build(read_ini(text, path), cfg)
    if overrides:
        cfg = build(overrides, cfg)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


__all__ = ["ConfigError", "PRESETS", "SolverKnobs", "FistaKnobs", "build", "load", "parse_grid", "read_ini"]
