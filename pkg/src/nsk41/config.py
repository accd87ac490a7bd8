"""Experiment configuration: TOML ingestion, validation, defaults.

Configs are strict: unknown keys are rejected and every defaulted value is
materialized into the resolved dictionary, so the manifest echoes exactly
what ran.
"""

from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .forcing import PhysicalParams
from .spectral import GridSpec


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


KINDS = (
    "evolve",
    "stationary-picard",
    "oseen",
    "stability",
    "spectra-audit",
    "force-audit",
    "kernel-audit",
    "sweep",
)

# section -> key -> (type predicate description, default or REQUIRED)
_REQUIRED = object()

_SCHEMA: dict = {
    "": {
        "kind": _REQUIRED,
        "seed": 0,
        "out": None,
        "params": None,
        "grid": None,
        "evolve": None,
        "picard": None,
        "oseen": None,
        "stability": None,
        "spectra": None,
        "kernel": None,
        "force_audit": None,
        "sweep": None,
    },
    "params": {
        "nu": _REQUIRED,
        "alpha": _REQUIRED,
        "ell0": _REQUIRED,
        "L": _REQUIRED,
        "F": _REQUIRED,
        "rho1": 1.0,
        "rho2": 2.0,
        "orientation": [1.0, 1.0, 1.0],
    },
    "grid": {
        "box_half_side": _REQUIRED,
        "resolution": _REQUIRED,
        "dealias_fraction": 2.0 / 3.0,
    },
    "evolve": {
        "dt": _REQUIRED,
        "t_end": _REQUIRED,
        "scheme": 2,
        "snapshot_every": 0,
        "average_start_fraction": 0.5,
        "fixed_dt": False,
        "initial": "zero",
        "initial_amplitude": 0.1,
        "initial_slope": 3.0,
    },
    "picard": {
        "variant": "damped",
        "tolerance": 1e-10,
        "max_iters": 200,
    },
    "oseen": {
        "n_max": 6,
    },
    "stability": {
        "n_seeds": 3,
        "perturbation_amplitude": 0.05,
        "residual_tol": 1e-6,
    },
    "spectra": {
        "fit_window": None,
        "gevrey_s": 0.5,
    },
    "kernel": {
        "nu": 1.0,
        "alpha": 1.0,
        "radii": [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0],
        "tail_exponent": 4,
        "tail_radii": [10.0, 15.0, 20.0, 25.0, 30.0, 40.0],
    },
    "force_audit": {
        "s_values": [-0.5, 0.0, 0.5, 1.0],
        "p_values": [2.0, 3.0, "inf"],
        "mu_values": [1.0, 1.25, 1.5],
        "theta_values": [0.0, 0.75, 1.5, 2.25, 3.0],
    },
    "sweep": {
        "kind": _REQUIRED,
        "axes": _REQUIRED,
    },
}

_SECTION_NEEDS: dict = {
    "evolve": ("params", "grid", "evolve"),
    "stationary-picard": ("params", "grid", "picard"),
    "oseen": ("params", "grid", "picard", "oseen"),
    "stability": ("params", "grid", "picard", "evolve", "stability"),
    "spectra-audit": ("params", "grid", "picard", "spectra"),
    "force-audit": ("params", "grid", "force_audit"),
    "kernel-audit": ("kernel",),
    "sweep": ("sweep",),
}


def _resolve_section(name: str, given: dict | None) -> dict:
    schema = _SCHEMA[name]
    given = dict(given or {})
    unknown = set(given) - set(schema)
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{name or 'top level'}]: {sorted(unknown)}"
        )
    out = {}
    for key, default in schema.items():
        if key in given:
            out[key] = given[key]
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} in [{name or 'top level'}]")
        else:
            out[key] = default
    return out


def load_config(path) -> dict:
    """Parse and validate a TOML experiment file into a resolved dict."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config parse error in {path}: {e}") from e
    return resolve_config(raw)


def resolve_config(raw: dict) -> dict:
    top = _resolve_section("", raw)
    kind = top["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r} (expected one of {KINDS})")
    resolved = {
        "kind": kind,
        "seed": int(top["seed"]),
        "out": top["out"],
    }
    for section in _SECTION_NEEDS[kind]:
        resolved[section] = _resolve_section(section, top.get(section))
    if kind == "sweep":
        inner_kind = resolved["sweep"]["kind"]
        if inner_kind not in KINDS or inner_kind == "sweep":
            raise ConfigError(f"sweep cannot wrap kind {inner_kind!r}")
        axes = resolved["sweep"]["axes"]
        if not isinstance(axes, list) or not axes:
            raise ConfigError("sweep.axes must be a nonempty list of tables")
        for ax in axes:
            if set(ax) != {"path", "values"}:
                raise ConfigError(
                    "each sweep axis needs exactly the keys 'path' and 'values'"
                )
            if not isinstance(ax["values"], list) or not ax["values"]:
                raise ConfigError(f"sweep axis {ax.get('path')!r} has no values")
        # the inner experiment's sections are validated per-point
        for section in _SECTION_NEEDS[inner_kind]:
            resolved[section] = _resolve_section(section, top.get(section))
    _check_cross_invariants(resolved)
    return resolved


def _check_cross_invariants(cfg: dict) -> None:
    # construct the domain objects early so invariant violations surface
    # as config errors, before any computation
    if "params" in cfg:
        try:
            build_params(cfg)
        except ValueError as e:
            raise ConfigError(f"invalid [params]: {e}") from e
    if "grid" in cfg:
        try:
            build_grid(cfg)
        except ValueError as e:
            raise ConfigError(f"invalid [grid]: {e}") from e
    if "evolve" in cfg:
        ev = cfg["evolve"]
        if ev["dt"] <= 0 or ev["t_end"] <= 0:
            raise ConfigError("invalid [evolve]: dt and t_end must be positive")
        if ev["scheme"] not in (2, 4):
            raise ConfigError("invalid [evolve]: scheme must be 2 or 4")
        if ev["initial"] not in ("zero", "random"):
            raise ConfigError("invalid [evolve]: initial must be 'zero' or 'random'")
    if "picard" in cfg:
        pc = cfg["picard"]
        if pc["variant"] not in ("damped", "classical"):
            raise ConfigError(
                "invalid [picard]: variant must be 'damped' or 'classical'"
            )
        if pc["tolerance"] <= 0:
            raise ConfigError("invalid [picard]: tolerance must be positive")
    if "kernel" in cfg:
        k = cfg["kernel"]
        if k["nu"] <= 0 or k["alpha"] <= 0:
            raise ConfigError("invalid [kernel]: nu and alpha must be positive")
        if k["tail_exponent"] not in (4, 5, 6):
            raise ConfigError("invalid [kernel]: tail_exponent must be 4, 5 or 6")


def build_params(cfg: dict) -> PhysicalParams:
    p = cfg["params"]
    return PhysicalParams(
        nu=float(p["nu"]),
        alpha=float(p["alpha"]),
        ell0=float(p["ell0"]),
        L=float(p["L"]),
        F=float(p["F"]),
        rho1=float(p["rho1"]),
        rho2=float(p["rho2"]),
    )


def build_grid(cfg: dict) -> GridSpec:
    g = cfg["grid"]
    return GridSpec(
        box_half_side=float(g["box_half_side"]),
        resolution=int(g["resolution"]),
        dealias_fraction=float(g["dealias_fraction"]),
    )


def set_by_path(cfg: dict, path: str, value) -> None:
    """Assign a dotted-path key like 'params.F' inside a resolved config."""
    parts = path.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"sweep axis path {path!r} does not resolve")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"sweep axis path {path!r} does not resolve")
    node[parts[-1]] = value


def parse_p_value(p):
    if p in ("inf", "Inf", "INF"):
        return np.inf
    return float(p)
