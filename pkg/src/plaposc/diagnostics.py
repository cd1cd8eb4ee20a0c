"""Quantitative checks on computed solutions: the energy identity, the
Landau-Kolmogorov inequality, zero-count asymptotics, accumulation sets,
and exponential layer decay.

Everything here is read-only over solution objects (duck-typed: anything
with x_grid / u_values / uprime_values / epsilon) and reports numbers; the
tolerances live with the callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autonomous import TimeMapTable
from .bvp_solver import zero_density_integral
from .errors import DomainError, ValidationError
from .limit_profile import EnergyProfile
from .potential import DoubleWellPotential, WeightFunction
from .ptrig import PExponent, phi_p

__all__ = [
    "EnergyTrace", "energy_trace", "LandauResult", "landau_check",
    "ZeroCountReport", "zero_count_report",
    "AccumulationReport", "accumulation_report",
    "LayerDecayFit", "layer_decay_check",
]


def _nonuniform_slope(x, y):
    """Second-order three-point derivative at interior nodes."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    return (hm * hm * y[2:] - hp * hp * y[:-2]
            - (hm * hm - hp * hp) * y[1:-1]) / (hm * hp * (hm + hp))


@dataclass(frozen=True)
class EnergyTrace:
    """E_eps along a solution and the residual of its defining identity."""

    x_grid: np.ndarray
    e_values: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0


def energy_trace(sol, a: WeightFunction, Wd: DoubleWellPotential) -> EnergyTrace:
    """E_eps(x) = -L(eps u')/a + W(u) with the residual of
    E_eps' = (a'/a^2) L(eps u') by centered differences.

    The derivative of E_eps is differenced from its values rather than
    recomposed through phi_p, which would lose accuracy at turning points
    for p < 2.  For assembled piecewise-linear solutions (anything
    carrying ``pieces``) the energy is evaluated on cell midpoints from
    the element slopes, the natural discrete data; nodal derivative
    recovery would inject cell-scale noise that the differencing amplifies.
    """
    P = Wd.pexp
    eps = float(sol.epsilon)
    pieces = getattr(sol, "pieces", None)
    if pieces:
        xs, es, rs = [], [], []
        for pc in pieces:
            x = np.asarray(pc.x_grid, dtype=float)
            u = np.asarray(pc.u_values, dtype=float)
            h = x[1] - x[0]
            du = np.diff(u) / h
            xm = 0.5 * (x[:-1] + x[1:])
            um = 0.5 * (u[:-1] + u[1:])
            am = np.asarray(a.a(xm), dtype=float)
            lv = np.abs(eps * du) ** P.p / P.p_star
            e_c = -lv / am + np.asarray(Wd.w(um), dtype=float)
            de = np.diff(e_c) / np.diff(xm)
            rhs = (np.asarray(a.a_prime(x[1:-1]), dtype=float)
                   / np.asarray(a.a(x[1:-1]), dtype=float) ** 2
                   * 0.5 * (lv[:-1] + lv[1:]))
            xs.append(xm)
            es.append(e_c)
            rs.append(np.abs(de - rhs))
        return EnergyTrace(x_grid=np.concatenate(xs),
                           e_values=np.concatenate(es),
                           residuals=np.concatenate(rs)
                           if rs else np.zeros(0))
    x = np.asarray(sol.x_grid, dtype=float)
    u = np.asarray(sol.u_values, dtype=float)
    up = np.asarray(sol.uprime_values, dtype=float)
    av = np.asarray(a.a(x), dtype=float)
    lval = np.abs(eps * up) ** P.p / P.p_star
    e_vals = -lval / av + np.asarray(Wd.w(u), dtype=float)
    de = _nonuniform_slope(x, e_vals)
    rhs = (np.asarray(a.a_prime(x), dtype=float) / av ** 2 * lval)[1:-1]
    return EnergyTrace(x_grid=x, e_values=e_vals,
                       residuals=np.abs(de - rhs))


@dataclass(frozen=True)
class LandauResult:
    """Margins of the interpolation inequalities for one grid function."""

    lhs: float
    rhs: float
    margin: float            # rhs - lhs, must be >= -tol
    coarse_margin: float     # margin of the additive inequality

    def __bool__(self):
        return self.margin >= 0.0 and self.coarse_margin >= 0.0


def landau_check(x_grid, v_values, P: PExponent) -> LandauResult:
    """Margins of || phi_p(v') ||^(p/(p-1)) <= 4 gamma_p ||v|| ||(phi_p(v'))'||
    and of the additive bound with constant 2^(p-1), for a grid function
    with vanishing end derivatives.
    """
    x = np.asarray(x_grid, dtype=float)
    v = np.asarray(v_values, dtype=float)
    if len(x) < 5:
        raise DomainError("landau_check needs at least 5 grid points")
    h = x[1] - x[0]
    d_left = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    d_right = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    scale = max(1.0, float(np.max(np.abs(v))) / (x[-1] - x[0]))
    if abs(d_left) > 1e-4 * scale or abs(d_right) > 1e-4 * scale:
        raise ValidationError(
            "landau_check requires v'(0) = v'(1) = 0 on the input grid "
            f"(got {d_left:.3e}, {d_right:.3e})")
    vp = np.zeros_like(v)
    vp[1:-1] = _nonuniform_slope(x, v)
    w = phi_p(vp, P)
    wp = np.zeros_like(w)
    wp[1:-1] = _nonuniform_slope(x, w)
    wp[0] = (w[1] - w[0]) / (x[1] - x[0])
    wp[-1] = (w[-1] - w[-2]) / (x[-1] - x[-2])
    lhs = float(np.max(np.abs(w))) ** (P.p / (P.p - 1.0))
    rhs = 4.0 * P.gamma_p * float(np.max(np.abs(v))) * float(np.max(np.abs(wp)))
    coarse = (2.0 ** (P.p - 1.0) * float(np.max(np.abs(v))) ** (P.p - 1.0)
              + float(np.max(np.abs(wp)))) - float(np.max(np.abs(w)))
    return LandauResult(lhs=lhs, rhs=rhs, margin=rhs - lhs,
                        coarse_margin=float(coarse))


@dataclass
class ZeroCountReport:
    """eps z_eps against the limiting zero-density integral over a sweep."""

    epsilons: list
    eps_z: list
    limit_integral: float
    rel_errors: list
    decreasing_tail: bool     # the last two halvings improve

    def row(self, i):
        return (self.epsilons[i], self.eps_z[i], self.rel_errors[i])


def zero_count_report(solutions, E: EnergyProfile, a: WeightFunction,
                      table: TimeMapTable) -> ZeroCountReport:
    """Compare eps * (number of zeros) with int_0^1 2 a^{1/p} / T(E) dx.

    The integrand is extended by 0 where E vanishes (T diverges) and by
    the tabulated top value where E approaches W_0.
    """
    sols = sorted(solutions, key=lambda s: -s.epsilon)
    limit = zero_density_integral(0.0, 1.0, a, E, table)
    eps_list, ez, rel = [], [], []
    for s in sols:
        eps_list.append(float(s.epsilon))
        ez.append(float(s.epsilon) * len(np.asarray(s.zero_locations)))
        rel.append(abs(ez[-1] - limit) / limit if limit > 0 else ez[-1])
    dec = len(rel) < 3 or (rel[-1] <= rel[-2] <= rel[-3])
    return ZeroCountReport(epsilons=eps_list, eps_z=ez, limit_integral=limit,
                           rel_errors=rel, decreasing_tail=dec)


@dataclass
class AccumulationReport:
    """Hausdorff-type distances between zero sets and supp E over a sweep."""

    epsilons: list
    dist_support_to_zeros: list   # max over supp E of distance to zeros
    dist_zeros_to_allowed: list   # max over zeros of distance to the union
    shrinking: bool


def accumulation_report(solutions, E: EnergyProfile, a: WeightFunction,
                        n_samples: int = 2001) -> AccumulationReport:
    """Distances (a) supp E -> nearest zero and (b) zeros -> supp E union
    {a' = 0} union {0, 1}, per solution, finest last.

    Distance (b) uses the support intervals and critical points exactly
    (a zero inside a support component is at distance zero), so it is not
    polluted by sampling resolution.
    """
    sols = sorted(solutions, key=lambda s: -s.epsilon)
    xs = np.linspace(0.0, 1.0, n_samples)
    supp = xs[E.interp(xs) > 0.0]
    intervals = [(iv.s, iv.t) for iv in E.support.intervals]
    ap = np.asarray(a.a_prime(xs), dtype=float)
    sign_change = np.flatnonzero(np.sign(ap[:-1]) * np.sign(ap[1:]) < 0)
    crit = np.concatenate([xs[np.abs(ap) <= 1e-12],
                           0.5 * (xs[sign_change] + xs[sign_change + 1]),
                           [0.0, 1.0]])

    def dist_to_allowed(z):
        d_int = min(max(s - z, z - t, 0.0) for (s, t) in intervals)
        return min(d_int, float(np.min(np.abs(crit - z))))

    eps_list, d_a, d_b = [], [], []
    for s in sols:
        zeros = np.sort(np.asarray(s.zero_locations, dtype=float))
        eps_list.append(float(s.epsilon))
        if zeros.size == 0:
            d_a.append(1.0)
            d_b.append(0.0)
            continue
        d_a.append(float(np.max(np.min(
            np.abs(supp[:, None] - zeros[None, :]), axis=1))))
        d_b.append(max(dist_to_allowed(float(z)) for z in zeros))
    shrink = all(np.diff(d_a) <= 1e-12) and all(np.diff(d_b) <= 1e-12)
    return AccumulationReport(epsilons=eps_list,
                              dist_support_to_zeros=d_a,
                              dist_zeros_to_allowed=d_b,
                              shrinking=bool(shrink))


@dataclass(frozen=True)
class LayerDecayFit:
    """Exponential envelope |u - 1| + |eps u'| <= K1 exp(-K2 d / eps)."""

    k1: float
    k2: float
    envelope_fraction: float  # fraction of samples below the envelope

    def __bool__(self):
        return self.k2 > 0.0 and self.envelope_fraction >= 0.99


def layer_decay_check(sol, intervals, floor: float = 1e-13) -> LayerDecayFit:
    """Fit the exponential decay of |u - 1| + |eps u'| into the plateaus.

    ``intervals`` lists (s, t) windows where the solution stays in [0, 1]
    (a window inside [-1, 0] is mirrored).  The decay rate comes from a
    least-squares fit in log scale against min(x - s, t - x)/eps; the
    multiplier is the upper envelope at that rate, so the envelope holds
    on every usable sample by construction and is reported as a fraction
    of all samples (those above the floor).
    """
    x = np.asarray(sol.x_grid, dtype=float)
    u = np.asarray(sol.u_values, dtype=float)
    up = np.asarray(sol.uprime_values, dtype=float)
    eps = float(sol.epsilon)
    ds, vals = [], []
    for (s, t) in intervals:
        m = (x >= s) & (x <= t)
        if not np.any(m):
            continue
        uu = u[m]
        if np.all((uu >= -1.0 - 1e-9) & (uu <= 1e-9)):
            uu = -uu
        if np.any(uu < -1e-9) or np.any(uu > 1.0 + 1e-9):
            raise DomainError(
                f"interval ({s}, {t}) leaves [0, 1]; layer decay is only "
                "defined on one-signed plateau pieces")
        d = np.minimum(x[m] - s, t - x[m]) / eps
        v = np.abs(uu - 1.0) + np.abs(eps * up[m])
        ds.append(d)
        vals.append(v)
    if not ds:
        raise DomainError("no samples inside the given intervals")
    d = np.concatenate(ds)
    v = np.concatenate(vals)
    usable = v > floor
    if usable.sum() < 8:
        raise DomainError("not enough samples above the floor to fit")
    logv = np.log(v[usable])
    slope, intercept = np.polyfit(d[usable], logv, 1)
    k2 = -float(slope)
    log_k1 = float(np.max(logv + k2 * d[usable]))
    k1 = math.exp(log_k1)
    ok = v <= k1 * np.exp(-k2 * d) * (1.0 + 1e-12) + floor
    return LayerDecayFit(k1=k1, k2=k2,
                         envelope_fraction=float(np.mean(ok)))
