"""Double-well potentials, the positive weight a(x), and the root maps.

A valid double well W on [-1, 1] has minima 0 at +-1, an interior maximum
W_0 at 0, local p-power behavior with constants C_{-1}, C_0, C_1 at the
critical points, and W'(u)/phi_p(u) strictly decreasing on [-1, 0) and
strictly increasing on (0, 1].  Outside [-1, 1] every potential carries the
exact p-power extension W(u) = (C_{+-1}/p) |u -+ 1|^p, which keeps the
monotonicity condition on all of R.

Two model families ship with the library (generalized Allen-Cahn and
variable-length pendulum); user potentials are accepted with their
constants declared and are audited by ``validate_potential``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DomainError, ValidationError
from .ptrig import PExponent, phi_p

__all__ = [
    "DoubleWellPotential", "WeightFunction",
    "make_allen_cahn", "make_pendulum", "h_pm",
    "validate_potential", "PotentialReport",
]


@dataclass(frozen=True)
class DoubleWellPotential:
    """A double-well potential with its analytic constants.

    ``w`` and ``w_prime`` are vectorized callables defined on all of R
    (p-power extension outside [-1, 1]).  ``w_deficit(u) = w_zero - w(u)``
    is provided separately because the difference is needed at full
    relative accuracy near u = 0 (orbit energies close to the maximum).
    ``w_second`` is optional curvature information used only to accelerate
    Newton refinements; None is always acceptable.
    """

    w: Callable
    w_prime: Callable
    c_minus1: float
    c_zero: float
    c_one: float
    w_zero: float
    pexp: PExponent
    name: str = "custom"
    w_deficit: Callable | None = None
    w_second: Callable | None = None

    def deficit(self, u):
        """W_0 - W(u), cancellation-free where a specialized form exists."""
        if self.w_deficit is not None:
            return self.w_deficit(u)
        return self.w_zero - self.w(u)


def _extend(core, core_prime, c_one: float, c_minus1: float, p: float):
    """Wrap the [-1,1] branch with the exact p-power tails."""

    def w(u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        inner = np.abs(u) <= 1.0
        out[inner] = core(u[inner])
        hi = u > 1.0
        out[hi] = (c_one / p) * (u[hi] - 1.0) ** p
        lo = u < -1.0
        out[lo] = (c_minus1 / p) * (-1.0 - u[lo]) ** p
        return out if out.ndim else float(out)

    def w_prime(u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        inner = np.abs(u) <= 1.0
        out[inner] = core_prime(u[inner])
        hi = u > 1.0
        out[hi] = c_one * (u[hi] - 1.0) ** (p - 1.0)
        lo = u < -1.0
        out[lo] = -c_minus1 * (-1.0 - u[lo]) ** (p - 1.0)
        return out if out.ndim else float(out)

    return w, w_prime


def make_allen_cahn(P: PExponent) -> DoubleWellPotential:
    """Generalized Allen-Cahn well W(u) = (1/p^2) (1 - |u|^p)^p.

    Constants: W_0 = 1/p^2, C_0 = 1, C_1 = C_{-1} = p^(p-1).
    """
    p = P.p
    w_zero = 1.0 / (p * p)

    def q_of(u):
        # 1 - |u|^p, at full relative accuracy near |u| = 1
        au = np.abs(np.asarray(u, dtype=float))
        with np.errstate(divide="ignore"):
            lg = np.where(au > 0.0, np.log(np.maximum(au, 1e-300)), -np.inf)
        return -np.expm1(p * lg)

    def core(u):
        return (1.0 / (p * p)) * q_of(u) ** p

    def core_prime(u):
        u = np.asarray(u, dtype=float)
        return -phi_p(u, P) * q_of(u) ** (p - 1.0)

    def w_deficit(u):
        # W_0 - W = (1/p^2)(1 - q^p) with q = 1 - |u|^p; both differences
        # via expm1/log1p so the result keeps full relative accuracy for
        # |u| near 0 (x = |u|^p far below float spacing at 1)
        u = np.asarray(u, dtype=float)
        inner = np.abs(u) <= 1.0
        out = np.empty_like(u)
        x = np.abs(u[inner]) ** p
        with np.errstate(divide="ignore"):
            lq = np.log1p(-np.minimum(x, 1.0))
        out[inner] = (1.0 / (p * p)) * np.where(
            x >= 1.0, 1.0, -np.expm1(p * lq))
        out[~inner] = w_zero - core_ext(u[~inner])
        return out if out.ndim else float(out)

    def w_second_inner(u):
        u = np.asarray(u, dtype=float)
        q = q_of(u)
        au = np.abs(u)
        return -(p - 1.0) * au ** (p - 2.0) * q ** (p - 2.0) * (q - p * au ** p)

    c1 = p ** (p - 1.0)
    core_ext, core_prime_ext = _extend(core, core_prime, c1, c1, p)

    def w_second(u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        inner = np.abs(u) <= 1.0
        out[inner] = w_second_inner(u[inner])
        hi = u > 1.0
        out[hi] = c1 * (p - 1.0) * (u[hi] - 1.0) ** (p - 2.0)
        lo = u < -1.0
        out[lo] = c1 * (p - 1.0) * (-1.0 - u[lo]) ** (p - 2.0)
        return out if out.ndim else float(out)

    return DoubleWellPotential(
        w=core_ext, w_prime=core_prime_ext,
        c_minus1=c1, c_zero=1.0, c_one=c1, w_zero=w_zero, pexp=P,
        name="allen_cahn", w_deficit=w_deficit,
        w_second=w_second if p >= 2.0 else None)


_PENDULUM_NODES = 2048
_PENDULUM_SERIES_CUT = 1.0 / 64.0


def make_pendulum(P: PExponent) -> DoubleWellPotential:
    """Pendulum-type well W(u) = int_u^1 phi_p(sin(pi s)) ds.

    Evaluated through a cached antiderivative table: with
    Cum(x) = int_0^x phi_p(sin(pi s)) ds the symmetry of sin about s = 1/2
    gives W(u) = Cum(1 - |u|) and W_0 - W(u) = Cum(|u|), so both the well
    and its deficit are read near the accurate end of the table.  Below a
    matched cut the table is replaced by the series of the integrand, which
    keeps full relative accuracy as the argument vanishes.
    Constants: C_{-1} = C_0 = C_1 = pi^(p-1), W_0 = Cum(1).
    """
    p = P.p
    q = p - 1.0
    s_nodes = np.linspace(0.0, 1.0, _PENDULUM_NODES + 1)
    integrand = np.sin(np.pi * s_nodes) ** q
    cum_spline = CubicSpline(s_nodes, integrand).antiderivative()

    c4 = q / 120.0 + q * (q - 1.0) / 72.0

    def cum_series(d):
        # int_0^d (pi r)^q (1 - q (pi r)^2/6 + c4 (pi r)^4 + O((pi r)^6)) dr
        pd2 = (np.pi * d) ** 2
        lead = np.pi ** q * d ** (q + 1.0) / (q + 1.0)
        return lead * (1.0 - q * (q + 1.0) * pd2 / (6.0 * (q + 3.0))
                       + c4 * (q + 1.0) * pd2 * pd2 / (q + 5.0))

    offset = float(cum_spline(_PENDULUM_SERIES_CUT)) - float(
        cum_series(np.asarray(_PENDULUM_SERIES_CUT)))

    def cum(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= _PENDULUM_SERIES_CUT,
                        cum_series(np.minimum(x, _PENDULUM_SERIES_CUT)),
                        cum_spline(x) - offset)

    w_zero = float(cum(np.asarray(1.0)))

    def core(u):
        u = np.asarray(u, dtype=float)
        return cum(1.0 - np.abs(u))

    def core_prime(u):
        u = np.asarray(u, dtype=float)
        return -phi_p(np.sin(np.pi * u), P)

    def w_deficit(u):
        u = np.asarray(u, dtype=float)
        au = np.abs(u)
        out = np.where(au <= 1.0, cum(np.minimum(au, 1.0)), 0.0)
        if np.any(au > 1.0):
            out = np.where(au > 1.0, w_zero - w_ext(u), out)
        return out if out.ndim else float(out)

    def w_second_inner(u):
        u = np.asarray(u, dtype=float)
        s = np.sin(np.pi * u)
        return -np.pi * (p - 1.0) * np.abs(s) ** (p - 2.0) * np.cos(np.pi * u)

    c = np.pi ** (p - 1.0)
    w_ext, w_prime_ext = _extend(core, core_prime, c, c, p)

    def w_second(u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        inner = np.abs(u) <= 1.0
        out[inner] = w_second_inner(u[inner])
        hi = u > 1.0
        out[hi] = c * (p - 1.0) * (u[hi] - 1.0) ** (p - 2.0)
        lo = u < -1.0
        out[lo] = c * (p - 1.0) * (-1.0 - u[lo]) ** (p - 2.0)
        return out if out.ndim else float(out)

    return DoubleWellPotential(
        w=w_ext, w_prime=w_prime_ext,
        c_minus1=c, c_zero=c, c_one=c, w_zero=w_zero, pexp=P,
        name="pendulum", w_deficit=w_deficit,
        w_second=w_second if p >= 2.0 else None)


def h_pm(xi: float, Wd: DoubleWellPotential,
         deficit: float | None = None) -> tuple[float, float]:
    """The unique roots h_-(xi) < 0 < h_+(xi) of W(h) = xi, 0 < xi < W_0.

    W decreases strictly from W_0 to 0 on each half interval, so bracketed
    root-finding (Brent) on [0, 1] and [-1, 0] is guaranteed.  The equation
    is solved on whichever of W / (W_0 - W) is cancellation-free at the
    requested level; ``deficit`` optionally supplies W_0 - xi directly for
    levels too close to the top to represent through xi.
    """
    w0 = Wd.w_zero
    if deficit is None:
        if not (0.0 < xi < w0):
            raise DomainError(f"energy level must lie in (0, W_0), got {xi}")
        deficit = w0 - xi
    elif not (0.0 < deficit < w0):
        raise DomainError(f"deficit must lie in (0, W_0), got {deficit}")

    if xi > 0.0 and xi <= 0.5 * w0:
        def g(u):
            return float(Wd.w(u)) - xi

        h_plus = brentq(g, 0.0, 1.0, xtol=1e-16, rtol=8.9e-16, maxiter=200)
        h_minus = brentq(g, -1.0, 0.0, xtol=1e-16, rtol=8.9e-16, maxiter=200)
    else:
        # near the top the roots approach 0; solving in log coordinates
        # keeps full relative resolution however small they are
        target = deficit

        def g_log(ell, sign):
            return target - float(Wd.deficit(sign * math.exp(ell)))

        roots = []
        for sign in (1.0, -1.0):
            ell = brentq(lambda l: g_log(l, sign), -700.0, 0.0,
                         xtol=1e-14, rtol=8.9e-16, maxiter=300)
            roots.append(sign * math.exp(ell))
        h_plus, h_minus = roots
    return h_minus, h_plus


@dataclass(frozen=True)
class WeightFunction:
    """Strictly positive C^1 weight a(x) on [0, 1] with its derivative."""

    a: Callable
    a_prime: Callable
    name: str = "custom"

    def __post_init__(self):
        xs = np.linspace(0.0, 1.0, 257)
        vals = np.asarray(self.a(xs), dtype=float)
        if np.any(vals <= 0.0) or not np.all(np.isfinite(vals)):
            i = int(np.argmin(vals))
            raise ValidationError(
                f"weight must be positive on [0,1]: a({xs[i]:.6f}) = {vals[i]:.6e}")

    @classmethod
    def constant(cls, value: float = 1.0) -> "WeightFunction":
        return cls(a=lambda x: np.full_like(np.asarray(x, dtype=float), value),
                   a_prime=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                   name=f"const({value})")

    @classmethod
    def from_callables(cls, a: Callable, a_prime: Callable,
                       name: str = "custom") -> "WeightFunction":
        return cls(a=a, a_prime=a_prime, name=name)

    @classmethod
    def from_samples(cls, x: Sequence[float], values: Sequence[float],
                     name: str = "samples") -> "WeightFunction":
        """Tabulated weight; a' from second-order finite differences."""
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or len(x) < 4:
            raise ValidationError("weight samples need two equal-length "
                                  "1-d arrays with at least 4 points")
        deriv = np.gradient(values, x, edge_order=2)
        a_spl = CubicSpline(x, values)
        ap_spl = CubicSpline(x, deriv)
        return cls(a=lambda t: a_spl(np.asarray(t, dtype=float)),
                   a_prime=lambda t: ap_spl(np.asarray(t, dtype=float)),
                   name=name)


@dataclass
class PotentialReport:
    """Outcome of validate_potential: failures name invariant and witness."""

    ok: bool
    failures: list = field(default_factory=list)
    ratio_at_one: float = float("nan")
    ratio_at_zero: float = float("nan")

    def __bool__(self):
        return self.ok


def validate_potential(Wd: DoubleWellPotential, grid_size: int = 512) -> PotentialReport:
    """Audit the (W1)-(W2) structure of a potential on a grid.

    Checks the critical values W(+-1) = W'(+-1) = W'(0) = 0, the sign
    W'(u) u < 0 inside the wells, monotonicity of W'(u)/phi_p(u) on both
    half-intervals (extended grid, covering the tails), the exact p-power
    tails, and the (W1) local ratios at u -> 1^- and u -> 0.
    """
    if grid_size < 100:
        raise DomainError("grid_size must be at least 100")
    P = Wd.pexp
    p = P.p
    failures: list[str] = []

    for pt in (-1.0, 1.0):
        if abs(float(Wd.w(pt))) > 1e-10:
            failures.append(f"(W1) W({pt:+.0f}) = {float(Wd.w(pt)):.3e} != 0")
        if abs(float(Wd.w_prime(pt))) > 1e-8:
            failures.append(f"(W1) W'({pt:+.0f}) = {float(Wd.w_prime(pt)):.3e} != 0")
    if abs(float(Wd.w_prime(0.0))) > 1e-10:
        failures.append(f"(W1) W'(0) = {float(Wd.w_prime(0.0)):.3e} != 0")
    if not float(Wd.w_zero) > 0.0:
        failures.append("(W1) W_0 must be positive")

    u = np.linspace(-1.0, 1.0, grid_size + 1)
    interior = (np.abs(u) > 1e-3) & (np.abs(u) < 1.0 - 1e-12)
    ui = u[interior]
    sign_vals = np.asarray(Wd.w_prime(ui)) * ui
    if np.any(sign_vals >= 0.0):
        i = int(np.argmax(sign_vals))
        failures.append(f"(W1/W2) W'(u)u < 0 fails at u = {ui[i]:.6f}")

    for lo, hi, direction in ((-1.5, -1e-3, "decreasing"),
                              (1e-3, 1.5, "increasing")):
        ug = np.linspace(lo, hi, grid_size)
        ratio = np.asarray(Wd.w_prime(ug)) / phi_p(ug, P)
        d = np.diff(ratio)
        bad = d >= 0.0 if direction == "decreasing" else d <= 0.0
        if np.any(bad):
            i = int(np.argmax(bad))
            failures.append(
                f"(W2) W'/phi_p not strictly {direction} near u = {ug[i]:.6f}")

    for u_out, c, side in ((1.7, Wd.c_one, "+1"), (-1.7, Wd.c_minus1, "-1")):
        expected = (c / p) * (abs(u_out) - 1.0) ** p
        got = float(Wd.w(u_out))
        if abs(got - expected) > 1e-12 * max(1.0, abs(expected)):
            failures.append(
                f"extension W(u) = (C_{side}/p)|u-({side})|^p fails at u = {u_out}")

    eps = 1e-3
    ratio_one = float(Wd.w(1.0 - eps)) / ((Wd.c_one / p) * eps ** p)
    ratio_zero = float(Wd.deficit(eps)) / ((Wd.c_zero / p) * eps ** p)
    for label, r in (("u->1", ratio_one), ("u->0", ratio_zero)):
        if not (0.5 < r < 2.0):
            failures.append(f"(W1) local p-power ratio at {label} is {r:.4f}")

    return PotentialReport(ok=not failures, failures=failures,
                           ratio_at_one=ratio_one, ratio_at_zero=ratio_zero)
