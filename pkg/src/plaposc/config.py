"""Scenario configuration: a flat, line-oriented key = value format with
repeated [support] blocks, chosen for diffability and language-agnostic
parsing.

Weights (and custom potentials) are given as arithmetic expressions in a
small grammar (constants, x, + - * / ^, sin, cos, exp, log, sqrt, pi);
they are differentiated symbolically, so a' is exact.  Tabulated weights
are accepted through ``weight_samples = path.csv`` with finite-difference
derivatives.  Unknown keys are rejected with their line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy

from .errors import ConfigError, ValidationError
from .potential import (DoubleWellPotential, WeightFunction,
                        make_allen_cahn, make_pendulum, validate_potential)
from .ptrig import PExponent

__all__ = ["ScenarioConfig", "parse_config", "load_config",
           "weight_from_expression"]

_ALLOWED_FUNCS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp,
                  "log": sympy.log, "sqrt": sympy.sqrt}

_TOP_KEYS = {
    "p", "potential", "potential_w", "potential_c0", "potential_c1",
    "potential_cm1", "weight", "weight_samples", "epsilons", "xi_nodes",
    "cells_per_eps", "h0", "counts", "out_dir", "seed", "h_bulk",
    "log_margin_constant",
}
_SUPPORT_KEYS = {"kind", "s", "t"}
_TOLERANCE_KEYS = {"el_residual", "junction", "neumann", "energy_residual",
                   "profile_residual"}

_DEFAULT_TOLERANCES = {
    "el_residual": 1e-4,
    "junction": 1e-5,
    "neumann": 1e-8,
    "energy_residual": 1e-3,
    "profile_residual": 1e-6,
}


def _parse_expression(text: str, symbol: str):
    """Parse an expression of one variable in the restricted grammar."""
    var = sympy.Symbol(symbol)
    local = dict(_ALLOWED_FUNCS)
    local[symbol] = var
    local["pi"] = sympy.pi
    try:
        expr = sympy.parse_expr(
            text.replace("^", "**"), local_dict=local, evaluate=True)
    except Exception as ex:
        raise ConfigError(f"cannot parse expression {text!r}: {ex}")
    bad_symbols = expr.free_symbols - {var}
    if bad_symbols:
        raise ConfigError(
            f"expression {text!r} uses unknown names {sorted(map(str, bad_symbols))}")
    for f in expr.atoms(sympy.Function):
        if f.func.__name__ not in _ALLOWED_FUNCS:
            raise ConfigError(
                f"expression {text!r} uses unsupported function {f.func}")
    return expr, var


def weight_from_expression(text: str) -> WeightFunction:
    """Weight a(x) from an expression; a' by symbolic differentiation."""
    expr, x = _parse_expression(text, "x")
    a_fn = sympy.lambdify(x, expr, modules="numpy")
    ap_fn = sympy.lambdify(x, sympy.diff(expr, x), modules="numpy")

    def a(v):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(np.asarray(a_fn(v), dtype=float), v.shape).copy() \
            if v.ndim else float(a_fn(float(v)))

    def a_prime(v):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(np.asarray(ap_fn(v), dtype=float), v.shape).copy() \
            if v.ndim else float(ap_fn(float(v)))

    return WeightFunction(a=a, a_prime=a_prime, name=text)


def _custom_potential(P: PExponent, w_text: str, c0: float, c1: float,
                      cm1: float) -> DoubleWellPotential:
    """User potential from an expression in u with declared constants."""
    from .potential import _extend
    expr, u = _parse_expression(w_text, "u")
    w_fn = sympy.lambdify(u, expr, modules="numpy")
    wp_fn = sympy.lambdify(u, sympy.diff(expr, u), modules="numpy")
    w2_fn = sympy.lambdify(u, sympy.diff(expr, u, 2), modules="numpy")
    w_zero = float(w_fn(0.0))

    def core(v):
        v = np.asarray(v, dtype=float)
        out = np.asarray(w_fn(v), dtype=float)
        return out if out.ndim else float(out)

    def core_prime(v):
        v = np.asarray(v, dtype=float)
        out = np.asarray(wp_fn(v), dtype=float)
        return out if out.ndim else float(out)

    w_ext, wp_ext = _extend(core, core_prime, c1, cm1, P.p)

    def w_second(v):
        v = np.asarray(v, dtype=float)
        inner = np.abs(v) <= 1.0
        out = np.empty_like(v)
        out[inner] = np.asarray(w2_fn(v[inner]), dtype=float)
        out[v > 1.0] = c1 * (P.p - 1.0) * (v[v > 1.0] - 1.0) ** (P.p - 2.0)
        out[v < -1.0] = cm1 * (P.p - 1.0) * (-1.0 - v[v < -1.0]) ** (P.p - 2.0)
        return out if out.ndim else float(out)

    Wd = DoubleWellPotential(
        w=w_ext, w_prime=wp_ext, c_minus1=cm1, c_zero=c0, c_one=c1,
        w_zero=w_zero, pexp=P, name=f"custom({w_text})",
        w_second=w_second if P.p >= 2.0 else None)
    report = validate_potential(Wd)
    if not report.ok:
        raise ValidationError(
            "custom potential failed validation: " + "; ".join(report.failures))
    return Wd


@dataclass
class ScenarioConfig:
    """A fully validated scenario: exponent, potential, weight, supports,
    sweep levels, grids, and per-check tolerance overrides."""

    p: float
    potential_name: str
    weight_text: str
    supports: list                      # list of (kind, s, t)
    epsilons: list
    xi_nodes: int = 768
    cells_per_eps: int = 16
    h0: float | None = None
    counts: list | None = None
    out_dir: str = "out"
    seed: int = 0
    h_bulk: float = 4e-4
    log_margin_constant: float = 1.0
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOLERANCES))
    weight_samples: str | None = None
    potential_w: str | None = None
    potential_constants: tuple | None = None
    raw_text: str = ""

    def pexp(self) -> PExponent:
        return PExponent.from_p(self.p)

    def build_potential(self) -> DoubleWellPotential:
        P = self.pexp()
        if self.potential_name == "allen_cahn":
            return make_allen_cahn(P)
        if self.potential_name == "pendulum":
            return make_pendulum(P)
        if self.potential_name == "custom":
            c0, c1, cm1 = self.potential_constants
            return _custom_potential(P, self.potential_w, c0, c1, cm1)
        raise ValidationError(f"unknown potential {self.potential_name!r}")

    def build_weight(self) -> WeightFunction:
        if self.weight_samples is not None:
            data = np.loadtxt(self.weight_samples, delimiter=",", ndmin=2)
            return WeightFunction.from_samples(data[:, 0], data[:, 1],
                                               name=self.weight_samples)
        return weight_from_expression(self.weight_text)

    def support_spec(self):
        from .limit_profile import SupportInterval, SupportSpec
        return SupportSpec(intervals=tuple(
            SupportInterval(kind=k, s=s, t=t) for (k, s, t) in self.supports))


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate the line-oriented scenario format."""
    top: dict = {}
    tolerances = dict(_DEFAULT_TOLERANCES)
    supports: list[dict] = []
    section: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() == "[support]":
            section = {}
            supports.append(section)
            continue
        if line.startswith("["):
            raise ConfigError(f"unknown section {line!r}", lineno)
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if section is not None:
            if key not in _SUPPORT_KEYS:
                raise ConfigError(f"unknown support key {key!r}", lineno)
            section[key] = (lineno, value)
        elif key.startswith("tolerance."):
            sub = key.split(".", 1)[1]
            if sub not in _TOLERANCE_KEYS:
                raise ConfigError(f"unknown tolerance key {sub!r}", lineno)
            tolerances[sub] = _as_float(value, key, lineno)
        else:
            if key not in _TOP_KEYS:
                raise ConfigError(f"unknown key {key!r}", lineno)
            top[key] = (lineno, value)

    def take(key, default=None):
        if key in top:
            return top.pop(key)[1]
        return default

    p_raw = take("p")
    if p_raw is None:
        raise ConfigError("missing required key 'p'")
    p = _as_float(p_raw, "p", 0)
    potential_name = take("potential", "allen_cahn")
    weight_text = take("weight", "1")
    weight_samples = take("weight_samples")
    eps_raw = take("epsilons", "")
    epsilons = [float(tok) for tok in eps_raw.split(",") if tok.strip()] \
        if eps_raw else []
    counts_raw = take("counts", "auto")
    counts = None if counts_raw.strip() == "auto" else \
        [int(tok) for tok in counts_raw.split(",") if tok.strip()]
    cfg = ScenarioConfig(
        p=p,
        potential_name=potential_name,
        weight_text=weight_text,
        weight_samples=weight_samples,
        supports=[],
        epsilons=epsilons,
        xi_nodes=int(float(take("xi_nodes", "768"))),
        cells_per_eps=int(float(take("cells_per_eps", "16"))),
        h0=None if take("h0", "auto") in ("auto", None)
        else float(top.get("h0", (0, "0"))[1]),
        counts=counts,
        out_dir=take("out_dir", "out"),
        seed=int(float(take("seed", "0"))),
        h_bulk=float(take("h_bulk", "4e-4")),
        log_margin_constant=float(take("log_margin_constant", "1.0")),
        tolerances=tolerances,
        raw_text=text,
    )
    pw = take("potential_w")
    if potential_name == "custom":
        if pw is None:
            raise ConfigError("potential = custom requires potential_w")
        consts = []
        for key in ("potential_c0", "potential_c1", "potential_cm1"):
            val = take(key)
            if val is None:
                raise ConfigError(f"potential = custom requires {key}")
            consts.append(float(val))
        cfg.potential_w = pw
        cfg.potential_constants = tuple(consts)
    else:
        for key in ("potential_c0", "potential_c1", "potential_cm1"):
            take(key)

    for sec in supports:
        for need in ("kind", "s", "t"):
            if need not in sec:
                lineno = next(iter(sec.values()))[0] if sec else 0
                raise ConfigError(f"support block missing {need!r}", lineno)
        kind = sec["kind"][1]
        s = _as_float(sec["s"][1], "s", sec["s"][0])
        t = _as_float(sec["t"][1], "t", sec["t"][0])
        cfg.supports.append((kind, s, t))

    # eager validation of the numeric invariants (exit code 3 territory)
    cfg.pexp()
    if any(e <= 0.0 for e in cfg.epsilons):
        raise ValidationError("epsilons must be positive")
    cfg.support_spec() if cfg.supports else None
    return cfg


def _as_float(value: str, key: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"key {key!r} needs a number, got {value!r}", lineno)


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())
