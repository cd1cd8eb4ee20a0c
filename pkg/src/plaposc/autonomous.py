"""Phase-plane analysis of the autonomous equation -(phi_p(v'))' + a W'(v) = 0.

The conserved energy is H_a(v', v) = -(1/a) L(v') + W(v).  Orbits with
energy xi in (0, W_0) are periodic; their period T_a(xi) and averaged
kinetic energy K_a(xi) are computed by quadrature between the turning
points h_-(xi) < 0 < h_+(xi):

    T_a(xi) = 2 int ds / Lp_inv(a (W(s) - xi)),
    K_a(xi) = (2 / T_a) int a (W(s) - xi) / Lp_inv(a (W(s) - xi)) ds,

the second form following from energy conservation L(v') = a (W(v) - xi).
Both integrands share an endpoint singularity of order (W - xi)^(-1/p) at
the turning points; the substitution s = h -+ theta^{p*} removes it
analytically, after which panels graded geometrically toward the turning
point integrate the smooth remainder with fixed Gauss-Legendre rules.
W(s) - xi is evaluated as (W_0 - xi) - (W_0 - W(s)) through the potential's
cancellation-free deficit, so energies within 1e-10 of W_0 remain accurate.

Scaling in the constant weight (period in a^{-1/p}, kinetic energy in a)
holds exactly by construction because a enters the integrands as a pure
prefactor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, ValidationError
from .potential import DoubleWellPotential, h_pm
from .ptrig import phi_p, phi_p_inv

__all__ = [
    "time_map", "kinetic_avg", "arch_time", "build_table", "TimeMapTable",
    "heteroclinic_orbit", "Heteroclinic", "boundary_pair", "ArchSolution",
    "integrate_orbit",
]

_GL_NODES, _GL_WEIGHTS = leggauss(16)
_N_PANELS = 48


def _half_integrals(e: float, edge: float, a: float,
                    Wd: DoubleWellPotential) -> tuple[float, float]:
    """Time and kinetic integrals over the half-interval between 0 and a
    turning point ``edge`` (either h_+ > 0 or h_- < 0).

    e = W_0 - xi.  Returns (int ds/|v'|, int L(v')/|v'| ds) with
    |v'| = (p* a z)^(1/p), z(s) = e - deficit(s).
    """
    p = Wd.pexp.p
    p_star = Wd.pexp.p_star
    sgn = math.copysign(1.0, edge)
    h_abs = abs(edge)
    if h_abs == 0.0:
        return 0.0, 0.0
    theta_max = h_abs ** (1.0 / p_star)
    dw_edge = abs(float(Wd.w_prime(edge)))

    # Anchor the energy gap at the potential's own value at the located
    # turning point, so the root-finding residual of h_pm cannot leak into
    # the singular end of the quadrature (where it would be amplified).
    # Low orbits (xi below W_0/2) difference W itself, which carries full
    # relative accuracy near the wells; high orbits difference the deficit,
    # accurate near the top.  Either way z(edge) = 0 by construction.
    w_edge = float(Wd.w(edge))
    e_loc = float(Wd.deficit(edge))
    low_orbit = w_edge <= 0.5 * Wd.w_zero
    z_scale = w_edge if low_orbit else e_loc

    # geometric panels [theta_max 2^-(k+1), theta_max 2^-k]
    uppers = theta_max * 0.5 ** np.arange(_N_PANELS)
    lowers = uppers * 0.5
    mids = 0.5 * (uppers + lowers)
    halfs = 0.5 * (uppers - lowers)
    theta = (mids[:, None] + halfs[:, None] * _GL_NODES[None, :]).ravel()

    tps = theta ** p_star
    s = sgn * (h_abs - tps)
    if low_orbit:
        z = (np.asarray(Wd.w(s)) - w_edge).ravel()
    else:
        z = (e_loc - np.asarray(Wd.deficit(s))).ravel()
    # Within the crossover region the direct difference is down in the
    # rounding noise; a second-order turning-point expansion is then the
    # more accurate value (truncation O((tps / curvature scale)^3)).
    if Wd.w_second is not None:
        w2_edge = float(Wd.w_second(edge))
    else:
        step = max(1e-7, 1e-7 * h_abs)
        w2_edge = (float(Wd.w_prime(edge)) -
                   float(Wd.w_prime(edge - sgn * step))) / (sgn * step)
    model = dw_edge * tps + 0.5 * w2_edge * tps * tps
    use_model = model <= 1e-6 * z_scale
    # floor above the subnormal range: floored nodes contribute < 1e-19
    # relative and only occur at depths irrelevant to the integrals
    z = np.where(use_model, np.maximum(model, 1e-320), np.maximum(z, 1e-320))

    jac = p_star * theta ** (p_star - 1.0)
    speed = (p_star * a * z) ** (1.0 / p)
    w_all = (halfs[:, None] * _GL_WEIGHTS[None, :]).ravel()
    time_val = float(np.sum(w_all * jac / speed))
    kin_val = float(np.sum(w_all * jac * (a * z / speed)))

    # innermost stub [0, theta_max 2^-K]: the time integrand is constant
    # there (exactly so in the linear model); the kinetic integrand
    # vanishes like theta^{p*} and contributes below rounding
    stub = lowers[-1]
    if dw_edge > 0.0:
        time_val += stub * p_star / (p_star * a * dw_edge) ** (1.0 / p)
    return time_val, kin_val


def _orbit_integrals(xi: float, a: float, Wd: DoubleWellPotential,
                     deficit: float | None = None):
    """(T_a, K_a, h_-, h_+) for an energy level xi in (0, W_0).

    ``deficit`` optionally supplies W_0 - xi directly, which keeps full
    relative accuracy for orbits arbitrarily close to the well top (where
    xi itself would round to W_0).
    """
    w0 = Wd.w_zero
    if deficit is not None:
        if not (0.0 < deficit < w0):
            raise DomainError(f"deficit must lie in (0, W_0), got {deficit}")
        e = deficit
        xi = w0 - deficit
    else:
        if not (0.0 < xi < w0):
            raise DomainError(f"energy level must lie in (0, W_0), got {xi}")
        e = w0 - xi
    if a <= 0.0:
        raise DomainError("the weight constant a must be positive")
    hm, hp = h_pm(xi, Wd, deficit=deficit)
    t_r, k_r = _half_integrals(e, hp, a, Wd)
    t_l, k_l = _half_integrals(e, hm, a, Wd)
    T = 2.0 * (t_l + t_r)
    if not np.isfinite(T) or T <= 0.0:
        raise NumericalError(f"time-map quadrature failed at xi = {xi}")
    K = (k_l + k_r) / (t_l + t_r)
    return T, K, hm, hp


def time_map(xi: float, a: float, Wd: DoubleWellPotential,
             deficit: float | None = None) -> float:
    """Period T_a(xi) of the closed orbit at energy xi in (0, W_0)."""
    return _orbit_integrals(xi, a, Wd, deficit=deficit)[0]


def kinetic_avg(xi: float, a: float, Wd: DoubleWellPotential,
                deficit: float | None = None) -> float:
    """Averaged kinetic energy K_a(xi) over one period of the xi-orbit."""
    return _orbit_integrals(xi, a, Wd, deficit=deficit)[1]


def arch_time(xi: float, a: float, Wd: DoubleWellPotential,
              sign: int = +1) -> float:
    """Duration of the one-signed arch (zero to zero) at energy xi.

    For an even potential this equals T_a(xi) / 2.
    """
    w0 = Wd.w_zero
    if not (0.0 < xi < w0):
        raise DomainError(f"energy level must lie in (0, W_0), got {xi}")
    e = w0 - xi
    hm, hp = h_pm(xi, Wd)
    edge = hp if sign > 0 else hm
    t_half, _ = _half_integrals(e, edge, a, Wd)
    return 2.0 * t_half


# ---------------------------------------------------------------------------
# Table of T and K over a refined energy grid
# ---------------------------------------------------------------------------

@dataclass
class TimeMapTable:
    """T_a and K_a sampled on an energy grid log-refined at both ends.

    Interpolation runs in the doubly logarithmic coordinate
    y = log(xi) - log(W_0 - xi), where T is asymptotically linear at the
    lower end and log K is asymptotically linear at the upper end, so a
    cubic interpolant holds midpoint errors below 1e-6 relative.
    """

    xi_grid: np.ndarray
    t_values: np.ndarray
    k_values: np.ndarray
    a_ref: float
    potential: DoubleWellPotential
    _t_spline: CubicSpline = field(repr=False, default=None)
    _logk_spline: CubicSpline = field(repr=False, default=None)

    def __post_init__(self):
        if np.any(np.diff(self.t_values) >= 0.0):
            i = int(np.argmax(np.diff(self.t_values) >= 0.0))
            raise ValidationError(
                f"time map not strictly decreasing near xi = {self.xi_grid[i]:.3e}")
        if np.any(self.k_values <= 0.0):
            i = int(np.argmin(self.k_values))
            raise ValidationError(
                f"averaged kinetic energy not positive at xi = {self.xi_grid[i]:.3e}")
        y = self._y(self.xi_grid)
        object.__setattr__(self, "_t_spline", CubicSpline(y, self.t_values))
        object.__setattr__(self, "_logk_spline",
                           CubicSpline(y, np.log(self.k_values)))

    @property
    def w_zero(self) -> float:
        return self.potential.w_zero

    def _y(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.log(xi) - np.log(self.w_zero - xi)

    def T_of(self, xi):
        """Interpolated period; clamped to the table range outside it."""
        xi = np.clip(np.asarray(xi, dtype=float),
                     self.xi_grid[0], self.xi_grid[-1])
        out = self._t_spline(self._y(xi))
        return out if out.ndim else float(out)

    def K_of(self, xi):
        """Interpolated averaged kinetic energy, positive by construction."""
        xi = np.clip(np.asarray(xi, dtype=float),
                     self.xi_grid[0], self.xi_grid[-1])
        out = np.exp(self._logk_spline(self._y(xi)))
        return out if out.ndim else float(out)

    @property
    def xi_floor(self) -> float:
        return float(self.xi_grid[0])

    @property
    def xi_ceil(self) -> float:
        return float(self.xi_grid[-1])


def build_table(Wd: DoubleWellPotential, a: float = 1.0,
                n_nodes: int = 768, floor_rel: float = 1e-12,
                ceil_gap: float = 4e-10,
                check_midpoints: int = 7) -> TimeMapTable:
    """Tabulate T_a and K_a on (floor_rel * W_0, W_0 - ceil_gap * W_0).

    The grid is uniform in y = log(xi) - log(W_0 - xi), which refines
    geometrically toward both endpoints.  A sample of midpoints is checked
    against direct quadrature; disagreement beyond 1e-6 relative fails the
    build.
    """
    w0 = Wd.w_zero
    xi_lo = floor_rel * w0
    xi_hi = w0 * (1.0 - ceil_gap)
    y = np.linspace(math.log(xi_lo) - math.log(w0 - xi_lo),
                    math.log(xi_hi) - math.log(w0 - xi_hi), n_nodes)
    xi = w0 / (1.0 + np.exp(-y))
    t_vals = np.empty(n_nodes)
    k_vals = np.empty(n_nodes)
    for i, x in enumerate(xi):
        t_vals[i], k_vals[i], _, _ = _orbit_integrals(float(x), a, Wd)
    table = TimeMapTable(xi_grid=xi, t_values=t_vals, k_values=k_vals,
                         a_ref=a, potential=Wd)
    if check_midpoints:
        idx = np.linspace(1, n_nodes - 2, check_midpoints).astype(int)
        for i in idx:
            xm = w0 / (1.0 + math.exp(-0.5 * (y[i] + y[i + 1])))
            t_direct, k_direct, _, _ = _orbit_integrals(float(xm), a, Wd)
            t_err = abs(table.T_of(xm) - t_direct) / t_direct
            k_err = abs(table.K_of(xm) - k_direct) / k_direct
            if t_err > 1e-6 or k_err > 1e-6:
                raise ValidationError(
                    f"table interpolation error at xi = {xm:.3e}: "
                    f"T {t_err:.2e}, K {k_err:.2e} (> 1e-6)")
    return table


# ---------------------------------------------------------------------------
# Orbit integration (oracle and arch construction)
# ---------------------------------------------------------------------------

def integrate_orbit(x_span, v0: float, w0_momentum: float, a: float,
                    Wd: DoubleWellPotential, x_eval=None,
                    rtol: float = 1e-12, atol: float = 1e-14,
                    project_energy: float | None = None,
                    n_segments: int = 1):
    """Integrate the first-order system v' = phi_p^{-1}(w), w' = a W'(v).

    With ``project_energy`` set to the orbit energy xi, the momentum is
    re-projected onto the energy level between segments and on the output
    samples, controlling drift where phi_p^{-1} loses its Lipschitz
    constant (turning points, p > 2).
    Returns (x, v, w) arrays sampled at ``x_eval``.
    """
    P = Wd.pexp

    def rhs(x, yv):
        return [phi_p_inv(yv[1], P), a * float(Wd.w_prime(yv[0]))]

    def project(v, w):
        z = max(float(Wd.w(v)) - project_energy, 0.0)
        mag = (P.p_star * a * z) ** (1.0 / P.p_star)
        return math.copysign(mag, w) if w != 0.0 else 0.0

    x0, x1 = float(x_span[0]), float(x_span[1])
    if x_eval is None:
        x_eval = np.linspace(x0, x1, 801)
    x_eval = np.asarray(x_eval, dtype=float)
    bounds = np.linspace(x0, x1, n_segments + 1)
    segments = []
    v, w = float(v0), float(w0_momentum)
    for k in range(n_segments):
        sol = solve_ivp(rhs, (bounds[k], bounds[k + 1]), [v, w],
                        method="DOP853", dense_output=True,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise NumericalError(f"orbit integration failed: {sol.message}")
        segments.append(sol.sol)
        v, w = float(sol.y[0][-1]), float(sol.y[1][-1])
        if project_energy is not None:
            w = project(v, w)
    seg_width = (x1 - x0) / n_segments if x1 != x0 else 1.0
    idx = np.clip(((x_eval - x0) / seg_width).astype(int), 0, n_segments - 1)
    v_arr = np.empty_like(x_eval)
    w_arr = np.empty_like(x_eval)
    for k in range(n_segments):
        mask = idx == k
        if np.any(mask):
            vals = segments[k](x_eval[mask])
            v_arr[mask] = vals[0]
            w_arr[mask] = vals[1]
    if project_energy is not None:
        z = np.maximum(np.asarray(Wd.w(v_arr)) - project_energy, 0.0)
        mag = (P.p_star * a * z) ** (1.0 / P.p_star)
        w_arr = np.where(w_arr >= 0.0, mag, -mag)
    return x_eval.copy(), v_arr, w_arr


@dataclass(frozen=True)
class Heteroclinic:
    """The zero-energy trajectory joining the wells, with v(0) = 0."""

    x_grid: np.ndarray
    v_values: np.ndarray
    vprime_values: np.ndarray
    a_ref: float
    kinetic_integral: float


def heteroclinic_orbit(a: float, Wd: DoubleWellPotential, x_max: float,
                       n_points: int = 2001) -> Heteroclinic:
    """Heteroclinic orbit by integrating v' = Lp_inv(a W(v)) from v(0) = 0.

    The first-order reduction follows from H_a = 0; the derivative is
    reconstructed from the energy identity, so the trajectory conserves
    H_a exactly by construction, and accuracy is governed by the scalar
    integration alone.  Also accumulates int L(v') dx = int a W(v) dx.
    """
    if x_max <= 0.0:
        raise DomainError("x_max must be positive")
    P = Wd.pexp

    def rhs(x, y):
        v = min(max(y[0], -1.0), 1.0)
        wv = max(float(Wd.w(v)), 0.0)
        return [(P.p_star * a * wv) ** (1.0 / P.p), a * wv]

    xs = np.linspace(0.0, x_max, (n_points + 1) // 2)
    sol_f = solve_ivp(rhs, (0.0, x_max), [0.0, 0.0], method="DOP853",
                      t_eval=xs, rtol=1e-12, atol=1e-14)
    sol_b = solve_ivp(rhs, (0.0, -x_max), [0.0, 0.0], method="DOP853",
                      t_eval=-xs, rtol=1e-12, atol=1e-14)
    if not (sol_f.success and sol_b.success):
        raise NumericalError("heteroclinic integration failed")
    x = np.concatenate([sol_b.t[::-1][:-1], sol_f.t])
    v = np.concatenate([sol_b.y[0][::-1][:-1], sol_f.y[0]])
    v = np.clip(v, -1.0, 1.0)
    vp = (P.p_star * a * np.maximum(np.asarray(Wd.w(v)), 0.0)) ** (1.0 / P.p)
    # the backward leg accumulates int_0^{-X} a W dx = -int_{-X}^0 a W dx
    kinetic = float(sol_f.y[1][-1] - sol_b.y[1][-1])
    return Heteroclinic(x_grid=x, v_values=v, vprime_values=vp,
                        a_ref=a, kinetic_integral=kinetic)


@dataclass(frozen=True)
class ArchSolution:
    """A one-signed solution arch with zeros at x = -M and x = +M."""

    x_grid: np.ndarray
    v_values: np.ndarray
    vprime_values: np.ndarray
    xi: float
    a_ref: float

    @property
    def v0(self) -> float:
        """Value at the midpoint x = 0 (the extremum)."""
        return float(self.v_values[len(self.v_values) // 2])


def _solve_arch_energy(M: float, a: float, Wd: DoubleWellPotential,
                       sign: int) -> float:
    """Energy level whose one-signed arch lasts exactly 2M."""
    w0 = Wd.w_zero
    lo_y, hi_y = math.log(1e-13), math.log(1.0 - 1e-11) - math.log(1e-11)

    def gap(y):
        xi = w0 / (1.0 + math.exp(-y))
        return arch_time(xi, a, Wd, sign) - 2.0 * M

    # bracket in y; arch_time decreases in xi hence in y
    y_lo, y_hi = lo_y, hi_y
    if gap(y_lo) < 0.0:
        raise DomainError(
            "arch of duration 2M does not exist: M exceeds the table range")
    if gap(y_hi) > 0.0:
        raise DomainError(
            f"no arch with half-length M = {M}: 2M is below the minimal "
            "half-period (M <= M_0)")
    y_root = brentq(gap, y_lo, y_hi, xtol=1e-13, rtol=8.9e-16, maxiter=200)
    return w0 / (1.0 + math.exp(-y_root))


def boundary_pair(M: float, a: float, Wd: DoubleWellPotential,
                  n_points: int = 2001) -> tuple[ArchSolution, ArchSolution]:
    """The unique positive/negative solutions vanishing at both of +-M.

    Exists for M above M_0 = inf T_a/4 (detected from the time map, which
    is monotone); the arch energy solves arch-duration = 2M, and the
    trajectory is reconstructed by orbit integration at that energy with
    energy projection on the output.
    """
    if M <= 0.0:
        raise DomainError("M must be positive")
    w0 = Wd.w_zero
    archs = []
    for sign in (+1, -1):
        # admissibility against the minimal arch duration (attained as the
        # energy approaches W_0, where the time map is smallest)
        m0 = arch_time(w0 * (1.0 - 1e-11), a, Wd, sign) / 2.0
        if M <= m0:
            raise DomainError(
                f"M = {M} is at or below the minimal admissible "
                f"half-length M_0 ~ {m0:.6f}")
        xi = _solve_arch_energy(M, a, Wd, sign)
        e = w0 - xi
        P = Wd.pexp
        vp0 = (P.p_star * a * e) ** (1.0 / P.p)
        w_momentum = math.copysign(vp0 ** (P.p - 1.0), sign)
        n_half = (n_points + 1) // 2
        x_eval = np.linspace(-M, M, 2 * n_half - 1)
        x, v, w = integrate_orbit((-M, M), 0.0, w_momentum, a, Wd,
                                  x_eval=x_eval, project_energy=xi,
                                  n_segments=8)
        vp = phi_p_inv(w, P)
        archs.append(ArchSolution(x_grid=x, v_values=v, vprime_values=vp,
                                  xi=xi, a_ref=a))
    return archs[0], archs[1]
