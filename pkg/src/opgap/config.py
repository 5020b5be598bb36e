"""Flat ``key = value`` run configuration with grid shorthand.

Example::

    # qubit-rate chain with a suppressed first bond
    w_plus = 4
    w_minus = 1
    gamma = logspace(1e-4, 1e-2, 3)
    g = linspace(0.05, 0.45, 41)
    bond_overrides = 1:0.1

Values may be numbers, ``true``/``false``, bare strings, lists ``[a, b]``
or ``linspace(a, b, n)`` / ``logspace(a, b, n)`` (endpoints given as values,
not exponents). ``#`` starts a comment.
"""
from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .chain import ChainSpec, ChainSpecError
from .ruc import RucParams

SUBCOMMANDS = ("spectrum", "modes", "scan-binding", "dynamics", "trajectories", "ruc-verify", "compare-continuum")
STOCHASTIC = ("trajectories", "ruc-verify")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


# key -> kind; 'grid' values are ascending float arrays
KEYS: dict[str, str] = {
    # chain
    "w_plus": "float", "w_minus": "float", "gamma": "grid", "L": "length", "use_dressed_rate": "bool",
    "q": "int", "boundary_extent": "int", "bond_overrides": "overrides", "geometry": "str",
    "far_boundary": "str",
    # circuit-derived rates
    "ruc_q": "intgrid", "ruc_r": "float",
    # spectrum / modes / comparison
    "k": "int", "x_max": "int", "x_stride": "int",
    # binding scan
    "g": "grid", "bond": "int", "rounding_factor": "float", "fit_span": "float", "ansatz": "str",
    # dynamics
    "t": "grid", "fit_window": "pair", "normalize_q": "bool", "rtol": "float",
    # trajectories
    "walkers": "int", "horizon": "float", "n_times": "int", "start": "int", "tilted": "bool",
    "hist_bins": "int", "hist_t": "float",
    # circuit oracle
    "samples": "int", "com_horizon": "float", "com_walkers": "int",
    # run control
    "seed": "int", "threads": "int",
}

_GRID_RE = re.compile(r"^(linspace|logspace)\((.*)\)$")


def _scalar(text: str) -> Any:
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_value(text: str) -> Any:
    text = text.strip()
    m = _GRID_RE.match(text)
    if m:
        try:
            a, b, n = (ast.literal_eval(p.strip()) for p in m.group(2).split(","))
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(f"bad grid {text!r}") from exc
        if int(n) != n or n < 1:
            raise ConfigError(f"grid size must be a positive integer in {text!r}")
        if m.group(1) == "linspace":
            return [float(v) for v in np.linspace(a, b, int(n))]
        if a <= 0 or b <= 0:
            raise ConfigError(f"logspace endpoints must be positive in {text!r}")
        return [float(v) for v in np.logspace(math.log10(a), math.log10(b), int(n))]
    if text.startswith("["):
        try:
            val = ast.literal_eval(text)
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(f"bad list {text!r}") from exc
        return list(val)
    return _scalar(text)


def _as_float(key: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def _as_int(key: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return int(v)


def _coerce(key: str, raw: Any) -> Any:
    kind = KEYS[key]
    if kind == "float":
        return _as_float(key, raw)
    if kind == "int":
        return _as_int(key, raw)
    if kind == "bool":
        if not isinstance(raw, bool):
            raise ConfigError(f"{key} must be true or false")
        return raw
    if kind == "str":
        return str(raw)
    if kind == "length":
        if isinstance(raw, str) and raw.lower() == "auto":
            return None
        return _as_int(key, raw)
    if kind in ("grid", "intgrid"):
        vals = raw if isinstance(raw, list) else [raw]
        if not vals:
            raise ConfigError(f"{key} grid is empty")
        conv = _as_int if kind == "intgrid" else _as_float
        out = [conv(key, v) for v in vals]
        if any(b <= a for a, b in zip(out, out[1:])):
            raise ConfigError(f"{key} grid must be strictly ascending")
        return out
    if kind == "pair":
        if not isinstance(raw, list) or len(raw) != 2:
            raise ConfigError(f"{key} must be a two-element list [lo, hi]")
        lo, hi = (_as_float(key, v) for v in raw)
        if not hi > lo:
            raise ConfigError(f"{key} must be ascending")
        return [lo, hi]
    if kind == "overrides":
        items = raw if isinstance(raw, (list, tuple)) else [raw]
        out = {}
        for it in items:
            try:
                x, g = str(it).split(":")
                out[int(x)] = float(g)
            except ValueError as exc:
                raise ConfigError(f"bond override {it!r} is not of the form site:factor") from exc
        return out
    raise AssertionError(kind)


def _split_overrides(text: str) -> str:
    # "1:0.1, 2:0.5" is not a Python literal; keep it as a list of strings
    parts = [p.strip() for p in text.strip().strip("[]").split(",") if p.strip()]
    return "[" + ", ".join(repr(p) for p in parts) + "]"


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse config text into a typed flat dict (unknown keys rejected)."""
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if KEYS[key] == "overrides":
            val = _split_overrides(val)
        out[key] = _coerce(key, parse_value(val))
    return out


def render_value(key: str, v: Any) -> str:
    kind = KEYS[key]
    if kind == "length" and v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if kind == "overrides":
        return ", ".join(f"{x}:{g!r}" for x, g in sorted(v.items()))
    if isinstance(v, list):
        return "[" + ", ".join(repr(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class RunConfig:
    """One validated run: subcommand, typed parameters and output options."""

    subcommand: str
    params: dict[str, Any] = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}")
        unknown = set(self.params) - set(KEYS)
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}")
        if self.subcommand in STOCHASTIC and self.params.get("seed") is None:
            raise ConfigError(f"{self.subcommand} is stochastic and needs a seed")

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    @property
    def seed(self) -> int | None:
        return self.params.get("seed")

    @property
    def threads(self) -> int:
        return int(self.params.get("threads", 1))

    def to_text(self) -> str:
        """Canonical config text; parses back to an equal ``params``."""
        return "".join(f"{k} = {render_value(k, self.params[k])}\n" for k in sorted(self.params))

    def rates(self) -> tuple[float, float, str]:
        """``(w_plus, w_minus, geometry)`` from explicit rates or ``ruc_q``."""
        geometry = self.get("geometry", "edge")
        if "ruc_q" in self.params:
            if "w_plus" in self.params or "w_minus" in self.params:
                raise ConfigError("give either w_plus/w_minus or ruc_q, not both")
            qs = self.params["ruc_q"]
            pr = RucParams(q=qs[0], r=self.get("ruc_r", 1.0), geometry="com" if geometry == "com" else "edge")
            return pr.w_plus, pr.w_minus, geometry
        if "w_plus" not in self.params or "w_minus" not in self.params:
            raise ConfigError("w_plus and w_minus are required (or ruc_q)")
        return self.params["w_plus"], self.params["w_minus"], geometry

    def chain_spec(self, gamma: float | None = None) -> ChainSpec:
        wp, wm, geometry = self.rates()
        if gamma is None:
            gam = self.get("gamma", [0.0])
            if len(gam) != 1:
                raise ConfigError(f"{self.subcommand} takes a single gamma value")
            gamma = gam[0]
        use_dressed = self.get("use_dressed_rate", "ruc_q" in self.params)
        q = self.get("q", self.params["ruc_q"][0] if "ruc_q" in self.params else 2)
        overrides = self.get("bond_overrides", {})
        extent = self.get("boundary_extent", max(overrides) if overrides else 0)
        try:
            return ChainSpec(L=self.get("L"), w_plus=wp, w_minus=wm, gamma=gamma, use_dressed_rate=use_dressed,
                             q=q, boundary_extent=extent, bond_overrides=overrides, geometry=geometry,
                             far_boundary=self.get("far_boundary", "reflecting"))
        except ChainSpecError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str, subcommand: str, out: str | None = None, fmt: str = "csv",
                seed: int | None = None, threads: int | None = None) -> RunConfig:
    """Read a config file; command-line ``seed``/``threads`` take precedence."""
    with open(path, encoding="utf-8") as fh:
        params = parse_config_text(fh.read())
    if seed is not None:
        params["seed"] = int(seed)
    if threads is not None:
        params["threads"] = int(threads)
    return RunConfig(subcommand=subcommand, params=params, out=out, format=fmt)
