"""Broken-geodesic construction of solutions of the singularly perturbed
Neumann problem -eps (phi_p(eps u'))' + a(x) W'(u) = 0, u'(0) = u'(1) = 0.

The construction minimizes the action

    I_eps(s, t; u) = int_s^t (eps^p / p) |u'|^p + a(x) W(u) dx

over one-signed pieces (zero boundary values at interior junctions,
natural conditions at the domain ends), then maximizes the sum of the
piece minima over the junction vector tau.  The partial derivatives of a
piece minimum with respect to its endpoints have the closed form

    d m / d s = (eps^p / p*) |u'(s)|^p - a(s) W_0,
    d m / d t = -(eps^p / p*) |u'(t)|^p + a(t) W_0,

so stationarity in an interior junction is exactly the matching of the
one-sided derivative magnitudes, and the maximizer glues the pieces into a
C^1 solution.  Coordinate ascent drives these closed-form gradients to
zero junction by junction.

Pieces are discretized with piecewise-linear elements and midpoint
quadrature of the potential term, minimized by projected quasi-Newton
descent (L-BFGS-B) under the sign constraint and polished by a Newton
iteration on the inactive set.  Mesh size is tied to eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded
from scipy.optimize import brentq, minimize

from .autonomous import TimeMapTable
from .errors import (ConstructionError, DomainError, NumericalError,
                     ValidationError)
from .limit_profile import EnergyProfile
from .potential import DoubleWellPotential, WeightFunction
from .ptrig import PExponent, phi_p, phi_p_inv

__all__ = [
    "PieceMinimizer", "minimize_piece", "m_partials",
    "Block", "Partition", "BVPSolution", "maximize_partition",
    "Trajectory", "shoot_ivp", "count_eigenvalues",
    "AngleTrace", "prufer_angle", "zero_density_integral",
    "detect_margin", "select_counts", "quantile_init",
]


# ---------------------------------------------------------------------------
# Constrained piece minimization
# ---------------------------------------------------------------------------

@dataclass
class PieceMinimizer:
    """Minimizer of one sign-constrained piece of the action."""

    eps: float
    s: float
    t: float
    sign: int
    boundary_kind: str          # "dd" | "nd" | "dn"
    x_grid: np.ndarray
    u_values: np.ndarray
    m_value: float
    d_left: float               # one-sided u'(s)
    d_right: float              # one-sided u'(t)
    trivial: bool
    grad_residual: float        # max |discrete EL residual| over free nodes


def _piece_functional(u, h, eps_p, p, a_mid, Wd):
    du = np.diff(u) / h
    kinetic = (eps_p / p) * np.sum(np.abs(du) ** p) * h
    potential = float(np.sum(a_mid * np.asarray(
        Wd.w(0.5 * (u[:-1] + u[1:])))) * h)
    return kinetic + potential


def _piece_gradient(u, h, eps_p, P, a_mid, Wd):
    du = np.diff(u) / h
    flux = eps_p * phi_p(du, P)
    wp = np.asarray(Wd.w_prime(0.5 * (u[:-1] + u[1:])))
    g = np.zeros_like(u)
    g[:-1] += -flux + 0.5 * h * a_mid * wp
    g[1:] += flux + 0.5 * h * a_mid * wp
    return g


def _one_sided_derivatives(x, u):
    h = x[1] - x[0]
    d_left = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    d_right = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return float(d_left), float(d_right)


class PieceSolver:
    """Caches the context of repeated piece solves during the ascent.

    The first-eigenvalue dichotomy is decided by the zero set of the
    linearized flow (the first conjugate point of the endpoint), which is
    cached per starting point since it does not depend on the far end.
    """

    def __init__(self, eps: float, weight: WeightFunction,
                 Wd: DoubleWellPotential, cells_per_eps: int = 16,
                 gtol: float = 1e-11, maxiter: int = 4000):
        self.eps = eps
        self.weight = weight
        self.Wd = Wd
        self.P = Wd.pexp
        self.cells_per_eps = cells_per_eps
        self.gtol = gtol
        self.maxiter = maxiter
        self._conjugate_cache: dict = {}
        self._warm: dict = {}
        self._solution_cache: dict = {}
        xs = np.linspace(0.0, 1.0, 513)
        avals = np.asarray(weight.a(xs), dtype=float)
        self._a_min = float(avals.min())
        self._a_max = float(avals.max())

    # -- linearized dichotomy -------------------------------------------
    def first_conjugate_point(self, x0: float, direction: int,
                              neumann: bool = False) -> float:
        """First zero of the linearization started at x0 (+1 right, -1 left).

        The linearized equation eps (phi_p(eps y'))' + C_0 a phi_p(y) = 0 is
        started with (y, y') = (0, +-1) at a junction or (1, 0) at a
        Neumann end; the piece minimizer is nontrivial exactly when the
        far end lies beyond this first zero (negative first eigenvalue).
        """
        key = (round(x0, 5), direction, neumann)
        hit = self._conjugate_cache.get(key)
        if hit is not None:
            return hit
        x0 = key[0]
        P = self.P
        eps = self.eps
        c0 = self.Wd.c_zero

        def rhs(x, yw):
            y, w = yw
            return [phi_p_inv(w, P) / eps,
                    -c0 * float(self.weight.a(x)) * phi_p(y, P) / eps]

        def event(x, yw):
            return yw[0]

        event.terminal = True
        event.direction = 0
        x_end = 1.0 if direction > 0 else 0.0
        if neumann:
            x_start = x0
            y0 = [1.0, 0.0]
        else:
            # start a hair into the interval, on the positive side, so the
            # zero at x0 itself does not fire the event
            x_start = x0 + direction * 1e-9
            y0 = [1e-9, float(direction) * phi_p(eps, P)]
        sol = solve_ivp(rhs, (x_start, x_end), y0, method="DOP853",
                        events=event, rtol=1e-10, atol=1e-12)
        if sol.t_events[0].size:
            out = float(sol.t_events[0][0])
        else:
            out = math.inf if direction > 0 else -math.inf
        self._conjugate_cache[key] = out
        return out

    def is_nontrivial(self, s: float, t: float, boundary_kind: str) -> bool:
        # asymptotic bounds on the first conjugate length (the linearized
        # phase advances at rate (C_0 a)^{1/p}/eps) decide clear cases
        # without integrating
        P = self.P
        angle = P.pi_p if boundary_kind == "dd" else 0.5 * P.pi_p
        c0 = self.Wd.c_zero
        len_min = self.eps * angle / (c0 * self._a_max) ** (1.0 / P.p)
        len_max = self.eps * angle / (c0 * self._a_min) ** (1.0 / P.p)
        length = t - s
        if length > 1.6 * len_max:
            return True
        if length < 0.6 * len_min:
            return False
        if boundary_kind == "dd":
            z = self.first_conjugate_point(s, +1, neumann=False)
            return z < t
        if boundary_kind == "nd":
            z = self.first_conjugate_point(s, +1, neumann=True)
            return z < t
        if boundary_kind == "dn":
            z = self.first_conjugate_point(t, -1, neumann=True)
            return z > s
        raise ValidationError(f"unknown boundary kind {boundary_kind!r}")

    # -- discrete minimization ------------------------------------------
    def _grid(self, s, t):
        n = max(12, int(math.ceil(self.cells_per_eps * (t - s) / self.eps)))
        return np.linspace(s, t, n + 1)

    def _default_guess(self, x, s, t, boundary_kind):
        eps = self.eps
        d_left = x - s if boundary_kind in ("dd", "dn") else np.full_like(x, np.inf)
        d_right = t - x if boundary_kind in ("dd", "nd") else np.full_like(x, np.inf)
        d = np.minimum(d_left, d_right)
        return np.tanh(0.75 * d / eps)

    def solve(self, s: float, t: float, sign: int, boundary_kind: str,
              warm_key=None, initial_guess=None) -> PieceMinimizer:
        if not (0.0 <= s < t <= 1.0):
            raise DomainError(f"piece needs 0 <= s < t <= 1, got ({s}, {t})")
        sign = 1 if sign >= 0 else -1
        cache_key = (round(s, 13), round(t, 13), sign, boundary_kind)
        if initial_guess is None:
            hit = self._solution_cache.get(cache_key)
            if hit is not None:
                return hit
        x = self._grid(s, t)
        h = x[1] - x[0]
        a_mid = np.asarray(self.weight.a(0.5 * (x[:-1] + x[1:])), dtype=float)
        eps_p = self.eps ** self.P.p

        m_trivial = float(np.sum(a_mid) * h) * self.Wd.w_zero
        if not self.is_nontrivial(s, t, boundary_kind):
            u = np.zeros_like(x)
            out = PieceMinimizer(eps=self.eps, s=s, t=t, sign=sign,
                                 boundary_kind=boundary_kind, x_grid=x,
                                 u_values=u, m_value=m_trivial,
                                 d_left=0.0, d_right=0.0, trivial=True,
                                 grad_residual=0.0)
            self._solution_cache[cache_key] = out
            return out

        dirichlet_left = boundary_kind in ("dd", "dn")
        dirichlet_right = boundary_kind in ("dd", "nd")
        free = np.ones(len(x), dtype=bool)
        if dirichlet_left:
            free[0] = False
        if dirichlet_right:
            free[-1] = False

        default = sign * self._default_guess(x, s, t, boundary_kind)
        guess = None
        warm = False
        if initial_guess is not None:
            guess = np.asarray(initial_guess, dtype=float).copy()
            if len(guess) != len(x):
                raise DomainError("initial_guess length must match the grid")
        elif warm_key is not None:
            cached = self._warm.get(warm_key)
            if cached is not None:
                xc, uc = cached
                guess = np.interp(x, xc, uc)
                # a warm solution from a shorter span extends by zeros;
                # keep the layered default shape there so the iteration
                # cannot slide onto the trivial branch
                if sign > 0:
                    guess = np.maximum(guess, default)
                else:
                    guess = np.minimum(guess, default)
                warm = True
        if guess is None:
            guess = default
        guess = np.where(free, guess, 0.0)
        if sign > 0:
            guess = np.maximum(guess, 0.0)
        else:
            guess = np.minimum(guess, 0.0)

        def descend(u_start):
            u_full = u_start.copy()

            def fun(v):
                u_loc = u_full.copy()
                u_loc[free] = v
                f = _piece_functional(u_loc, h, eps_p, self.P.p, a_mid, self.Wd)
                g = _piece_gradient(u_loc, h, eps_p, self.P, a_mid, self.Wd)
                return f, g[free]

            bounds = [(0.0, None) if sign > 0 else (None, 0.0)] \
                * int(free.sum())
            res = minimize(fun, u_start[free], jac=True, method="L-BFGS-B",
                           bounds=bounds,
                           options={"maxiter": self.maxiter, "ftol": 1e-16,
                                    "gtol": 1e-10, "maxcor": 25})
            u_out = u_start.copy()
            u_out[free] = res.x
            u_out[~free] = 0.0
            return u_out

        def residual_of(u_val):
            g = _piece_gradient(u_val, h, eps_p, self.P, a_mid, self.Wd)
            act = free & (sign * u_val <= 1e-14) & (sign * g >= 0.0)
            sel = free & ~act
            return float(np.max(np.abs(g[sel])) / h) if sel.any() else 0.0

        # warm starts are close to stationary: try the Newton iteration
        # first; accept only a stationary point strictly below the trivial
        # level (u = 0 is always critical), else fall back to descent
        u = None
        if warm:
            u_try = self._newton_polish(guess, free, h, eps_p, a_mid, sign)
            if residual_of(u_try) <= self.gtol and \
                    _piece_functional(u_try, h, eps_p, self.P.p, a_mid,
                                      self.Wd) < m_trivial:
                u = u_try
        if u is None:
            u = descend(guess)
            u = self._newton_polish(u, free, h, eps_p, a_mid, sign)
            if _piece_functional(u, h, eps_p, self.P.p, a_mid,
                                 self.Wd) >= m_trivial and warm:
                # the warm shape misled the descent; restart cold
                u = descend(np.where(free, default, 0.0))
                u = self._newton_polish(u, free, h, eps_p, a_mid, sign)
        resid = residual_of(u)

        m_val = _piece_functional(u, h, eps_p, self.P.p, a_mid, self.Wd)
        if m_val >= m_trivial - 1e-14 * max(1.0, abs(m_trivial)):
            u = np.zeros_like(x)
            out = PieceMinimizer(eps=self.eps, s=s, t=t, sign=sign,
                                 boundary_kind=boundary_kind, x_grid=x,
                                 u_values=u, m_value=m_trivial,
                                 d_left=0.0, d_right=0.0, trivial=True,
                                 grad_residual=0.0)
            self._solution_cache[cache_key] = out
            return out
        if warm_key is not None:
            self._warm[warm_key] = (x, u)
        d_left, d_right = _one_sided_derivatives(x, u)
        out = PieceMinimizer(eps=self.eps, s=s, t=t, sign=sign,
                             boundary_kind=boundary_kind, x_grid=x,
                             u_values=u, m_value=float(m_val),
                             d_left=d_left, d_right=d_right, trivial=False,
                             grad_residual=resid)
        self._solution_cache[cache_key] = out
        return out

    def _newton_polish(self, u, free, h, eps_p, a_mid, sign,
                       rounds: int = 40):
        """Newton iteration on the inactive set (tridiagonal Jacobian)."""
        if self.Wd.w_second is None:
            return u
        P = self.P
        p = P.p
        u = u.copy()
        for _ in range(rounds):
            g = _piece_gradient(u, h, eps_p, P, a_mid, self.Wd)
            active = free & (sign * u <= 1e-14) & (sign * g >= 0.0)
            sel = free & ~active
            idx = np.flatnonzero(sel)
            if idx.size == 0:
                break
            gn = np.max(np.abs(g[sel]))
            if gn < self.gtol * h:
                break
            du = np.diff(u) / h
            phi_prime = (p - 1.0) * np.abs(du) ** (p - 2.0) \
                if p != 2.0 else np.ones_like(du)
            phi_prime = np.minimum(phi_prime, 1e12)
            ke = eps_p * phi_prime / h
            w2 = np.asarray(self.Wd.w_second(0.5 * (u[:-1] + u[1:])))
            pe = 0.25 * h * a_mid * w2
            n = len(u)
            diag = np.zeros(n)
            off = np.zeros(n - 1)
            diag[:-1] += ke + pe
            diag[1:] += ke + pe
            off[:] = -ke + pe
            # reduce to the selected unknowns; couplings to excluded
            # neighbors drop out because their values are fixed
            J_diag = diag[idx]
            ab = np.zeros((3, idx.size))
            ab[1] = np.maximum(J_diag, 1e-9 * np.max(J_diag))
            upper = np.zeros(idx.size)
            lower = np.zeros(idx.size)
            for k, j in enumerate(idx[:-1]):
                if idx[k + 1] == j + 1:
                    upper[k + 1] = off[j]
                    lower[k] = off[j]
            ab[0, 1:] = upper[1:]
            ab[2, :-1] = lower[:-1]
            try:
                step = solve_banded((1, 1), ab, g[idx])
            except Exception:
                break
            alpha = 1.0
            f0 = _piece_functional(u, h, eps_p, p, a_mid, self.Wd)
            improved = False
            for _ls in range(30):
                u_try = u.copy()
                u_try[idx] -= alpha * step
                if sign > 0:
                    u_try[free] = np.maximum(u_try[free], 0.0)
                else:
                    u_try[free] = np.minimum(u_try[free], 0.0)
                f_try = _piece_functional(u_try, h, eps_p, p, a_mid, self.Wd)
                g_try = _piece_gradient(u_try, h, eps_p, P, a_mid, self.Wd)
                sel_try = free & ~(free & (sign * u_try <= 1e-14)
                                   & (sign * g_try >= 0.0))
                gn_try = np.max(np.abs(g_try[sel_try])) if sel_try.any() else 0.0
                if gn_try < gn or f_try < f0 - 1e-16:
                    u = u_try
                    improved = True
                    break
                alpha *= 0.5
            if not improved:
                break
        return u


def minimize_piece(eps: float, s: float, t: float, sign: int,
                   boundary_kind: str, a: WeightFunction,
                   Wd: DoubleWellPotential, grid_n: int | None = None,
                   cells_per_eps: int = 16) -> PieceMinimizer:
    """Unique sign-constrained minimizer of the piece action.

    ``boundary_kind`` "dd" pins both ends to zero, "nd" leaves the left
    end natural (a Neumann domain end), "dn" the right end.  When the
    linearized dichotomy says the first eigenvalue is nonnegative, the
    zero minimizer is returned with m = W_0 int a.
    """
    if grid_n is not None:
        cells_per_eps = max(4, int(math.ceil(grid_n * eps / max(t - s, 1e-12))))
    solver = PieceSolver(eps, a, Wd, cells_per_eps=cells_per_eps)
    return solver.solve(s, t, sign, boundary_kind)


def m_partials(pm: PieceMinimizer, a: WeightFunction,
               Wd: DoubleWellPotential) -> tuple[float, float]:
    """Closed-form endpoint derivatives of the piece minimum.

    dm/ds = (eps^p / p*) |u'(s)|^p - a(s) W_0 and the mirrored sign at t;
    equivalently -+ a E_eps at the endpoint.  For the zero minimizer these
    reduce to (-a(s) W_0, +a(t) W_0).
    """
    P = Wd.pexp
    w0 = Wd.w_zero
    pref = pm.eps ** P.p / P.p_star
    dm_ds = pref * abs(pm.d_left) ** P.p - float(a.a(pm.s)) * w0
    dm_dt = -pref * abs(pm.d_right) ** P.p + float(a.a(pm.t)) * w0
    return float(dm_ds), float(dm_dt)


# ---------------------------------------------------------------------------
# Partition maximization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    """A support component (s, t) with margin h0 and zero count."""

    s: float
    t: float
    h0: float
    count: int

    @property
    def window(self) -> tuple[float, float]:
        return (self.s - self.h0, self.t + self.h0)


@dataclass
class Partition:
    """Ordered junction vector with its block bookkeeping."""

    tau: np.ndarray
    blocks: tuple[Block, ...]

    def block_of(self, j: int) -> int:
        n = 0
        for i, b in enumerate(self.blocks):
            if j < n + b.count:
                return i
            n += b.count
        raise IndexError(j)


@dataclass
class BVPSolution:
    """An assembled solution of the Neumann problem at one eps."""

    epsilon: float
    x_grid: np.ndarray
    u_values: np.ndarray
    uprime_values: np.ndarray
    tau_star: Partition
    zero_locations: np.ndarray
    pieces: list = field(default_factory=list, repr=False)
    junction_mismatch: float = 0.0

    @property
    def zero_count(self) -> int:
        return len(self.zero_locations)


def detect_margin(blocks_st, weight: WeightFunction, h_max: float = 0.2,
                  samples: int = 64) -> float:
    """Largest margin h with a' > 0 left of every s_i and a' < 0 right of
    every t_i, found by sampling and bisection refinement."""

    def margin_ok(h):
        for (s, t) in blocks_st:
            xs = np.linspace(max(0.0, s - h), s, samples)
            if np.any(np.asarray(weight.a_prime(xs[:-1])) <= 0.0):
                return False
            xt = np.linspace(t, min(1.0, t + h), samples)
            if np.any(np.asarray(weight.a_prime(xt[1:])) >= 0.0):
                return False
        return True

    lo, hi = 0.0, h_max
    if margin_ok(h_max):
        return h_max
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if margin_ok(mid):
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise ValidationError(
            "no admissible margin: a' does not have the required signs "
            "next to the block edges")
    return lo


def zero_density_integral(lo: float, hi: float, weight: WeightFunction,
                          profile: EnergyProfile, table: TimeMapTable,
                          n_nodes: int = 2001) -> float:
    """int_lo^hi 2 a(x)^{1/p} / T(E(x)) dx with the vanishing-E convention.

    Where E = 0 the period diverges and the integrand is extended by 0;
    where E reaches W_0 the limit value a^{1/p} C_0^{1/p} / pi_p applies
    (through the tabulated period at the ceiling).
    """
    P = table.potential.pexp
    x = np.linspace(lo, hi, n_nodes)
    e = profile.interp(x)
    out = np.zeros_like(x)
    pos = e > table.xi_floor
    t_vals = table.T_of(np.clip(e[pos], table.xi_floor, table.xi_ceil))
    out[pos] = 2.0 * np.asarray(weight.a(x[pos])) ** (1.0 / P.p) / t_vals
    from scipy.integrate import simpson
    return float(simpson(out, x=x))


def select_counts(eps: float, blocks_st, weight: WeightFunction,
                  profile: EnergyProfile, table: TimeMapTable) -> list[int]:
    """Zero counts per block: the density integral over the block over eps,
    rounded to the nearest positive integer."""
    counts = []
    for (s, t) in blocks_st:
        integral = zero_density_integral(s, t, weight, profile, table)
        counts.append(max(1, int(round(integral / eps))))
    return counts


def quantile_init(blocks, weight: WeightFunction, profile: EnergyProfile,
                  table: TimeMapTable, n_nodes: int = 2001) -> np.ndarray:
    """Initial junction positions at the zero-density quantiles.

    Within each block the k-th of n junctions sits where the cumulative
    density reaches (k + 1/2)/n of the block integral, which is where the
    zeros of the constructed solution accumulate.
    """
    P = table.potential.pexp
    out = []
    for b in blocks:
        x = np.linspace(b.s, b.t, n_nodes)
        e = profile.interp(x)
        dens = np.zeros_like(x)
        pos = e > table.xi_floor
        dens[pos] = 2.0 * np.asarray(weight.a(x[pos])) ** (1.0 / P.p) \
            / table.T_of(np.clip(e[pos], table.xi_floor, table.xi_ceil))
        cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (dens[1:] + dens[:-1]) * np.diff(x))])
        targets = (np.arange(b.count) + 0.5) / b.count * cum[-1]
        out.extend(np.interp(targets, cum, x).tolist())
    return np.asarray(out)


def _junction_gradient(left: PieceMinimizer, right: PieceMinimizer,
                       eps: float, P: PExponent) -> float:
    """d f / d tau_j = (eps^p/p*) (|u'_right(tau)|^p - |u'_left(tau)|^p)."""
    return (eps ** P.p / P.p_star) * (
        abs(right.d_left) ** P.p - abs(left.d_right) ** P.p)


def maximize_partition(eps: float, blocks, a: WeightFunction,
                       Wd: DoubleWellPotential,
                       cells_per_eps: int = 16,
                       max_sweeps: int = 60,
                       junction_tol: float = 1e-6,
                       min_gap_eps: float = 0.5,
                       initial_tau=None) -> tuple[Partition, BVPSolution]:
    """Maximize f_eps(tau) = sum_j m_{(-)^j}(eps; tau_j, tau_j+1) over the
    admissible junction set and assemble the glued solution.

    ``blocks`` is a sequence of Block values (margins satisfying the sign
    conditions on a', counts per the zero-density integral).  Cyclic
    coordinate ascent roots the closed-form junction gradient inside each
    bracket; a maximizer pinned to the boundary of the admissible set is a
    construction failure.
    """
    blocks = tuple(blocks)
    if not blocks:
        raise ValidationError("at least one block is required")
    for b in blocks:
        if b.count < 1:
            raise ValidationError("every block needs at least one junction")
        lo, hi = b.window
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"block window ({lo}, {hi}) leaves [0, 1]")
        xs = np.linspace(max(0.0, b.s - b.h0), b.s, 33)
        if np.any(np.asarray(a.a_prime(xs[:-1])) <= 0.0):
            raise ValidationError(
                f"a' must be positive on the left margin of block at {b.s}")
        xt = np.linspace(b.t, min(1.0, b.t + b.h0), 33)
        if np.any(np.asarray(a.a_prime(xt[1:])) >= 0.0):
            raise ValidationError(
                f"a' must be negative on the right margin of block at {b.t}")
    for b1, b2 in zip(blocks, blocks[1:]):
        if b1.window[1] >= b2.window[0]:
            raise ValidationError("block windows overlap")

    solver = PieceSolver(eps, a, Wd, cells_per_eps=cells_per_eps)
    P = Wd.pexp

    # initial junctions: quantiles of the zero density when supplied,
    # otherwise evenly spread inside each block
    windows = []
    for b in blocks:
        windows.extend([b.window] * b.count)
    if initial_tau is not None:
        tau = np.asarray(initial_tau, dtype=float).copy()
        if len(tau) != sum(b.count for b in blocks):
            raise ValidationError("initial_tau length does not match counts")
    else:
        tau = np.concatenate([np.linspace(b.s, b.t, b.count + 2)[1:-1]
                              for b in blocks])
    n_tau = len(tau)
    gap = min_gap_eps * eps

    def solve_piece(j, lo, hi):
        """Piece j spans (lo, hi) = (knots[j], knots[j+1])."""
        sign = 1 if j % 2 == 0 else -1
        bc = "dd"
        if j == 0:
            bc = "nd"
        elif j == n_tau:
            bc = "dn"
        return solver.solve(lo, hi, sign, bc, warm_key=(j,))

    def pieces_for(tau_vec):
        out = []
        knots = np.concatenate([[0.0], tau_vec, [1.0]])
        for j in range(n_tau + 1):
            out.append(solve_piece(j, knots[j], knots[j + 1]))
        return out

    pieces = pieces_for(tau)

    def grad_at(j, tj):
        """Junction gradient at tau_j = tj (other junctions fixed)."""
        left_lo = tau[j - 1] if j > 0 else 0.0
        right_hi = tau[j + 1] if j < n_tau - 1 else 1.0
        left = solver.solve(left_lo, tj, 1 if j % 2 == 0 else -1,
                            "nd" if j == 0 else "dd", warm_key=(j,))
        right = solver.solve(tj, right_hi, 1 if (j + 1) % 2 == 0 else -1,
                             "dn" if j == n_tau - 1 else "dd",
                             warm_key=(j + 1,))
        return _junction_gradient(left, right, eps, P), left, right

    def mismatch_of(piece_list):
        out = 0.0
        for j in range(n_tau):
            out = max(out, abs(abs(piece_list[j].d_right)
                               - abs(piece_list[j + 1].d_left)))
        return out

    def residuals_of(piece_list):
        return np.array([abs(piece_list[j + 1].d_left) ** P.p
                         - abs(piece_list[j].d_right) ** P.p
                         for j in range(n_tau)])

    # phase 1: a few sweeps of coordinate ascent for globalization
    pinned: int | None = None
    for sweep in range(4):
        pinned = None
        for j in range(n_tau):
            lo_w, hi_w = windows[j]
            lo = max(lo_w, (tau[j - 1] + gap) if j > 0 else gap)
            hi = min(hi_w, (tau[j + 1] - gap) if j < n_tau - 1 else 1.0 - gap)
            if hi - lo <= 0.0:
                raise ConstructionError(
                    f"empty admissible bracket for junction {j}")
            g_lo, *_ = grad_at(j, lo)
            g_hi, *_ = grad_at(j, hi)
            # f increases while the junction gradient is positive; a
            # bracket end can only be optimal transiently, while the
            # neighbors still have to move
            if g_lo <= 0.0:
                tau[j] = lo
                pinned = j
            elif g_hi >= 0.0:
                tau[j] = hi
                pinned = j
            else:
                tau[j] = brentq(lambda tt: grad_at(j, tt)[0], lo, hi,
                                xtol=1e-7, rtol=1e-12, maxiter=100)
        if pinned is None:
            break
    if pinned is not None:
        raise ConstructionError(
            f"maximizer pinned to the boundary of the admissible set at "
            f"junction {pinned} (tau = {tau[pinned]:.6f}); the requested "
            "counts are not admissible at this eps")

    # phase 2: damped Newton on the full junction system (tridiagonal)
    pieces = pieces_for(tau)
    mismatch = mismatch_of(pieces)
    fd_step = 1e-7
    converged = mismatch < junction_tol
    for _ in range(max_sweeps):
        if converged:
            break
        R = residuals_of(pieces)
        J = np.zeros((n_tau, n_tau))
        knots = np.concatenate([[0.0], tau, [1.0]])
        for j in range(n_tau):
            tj = tau[j] + fd_step
            left = solve_piece(j, knots[j], tj)
            right = solve_piece(j + 1, tj, knots[j + 2])
            if j > 0:
                J[j - 1, j] = (abs(left.d_left) ** P.p
                               - abs(pieces[j].d_left) ** P.p) / fd_step
            J[j, j] = ((abs(right.d_left) ** P.p - abs(left.d_right) ** P.p)
                       - R[j]) / fd_step
            if j < n_tau - 1:
                J[j + 1, j] = ((abs(pieces[j + 2].d_left) ** P.p
                                - abs(right.d_right) ** P.p)
                               - R[j + 1]) / fd_step
        try:
            step = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            raise ConstructionError("singular junction system in the "
                                    "Newton stage of the ascent")
        # keep ordering and window membership with a damped step
        alpha = 1.0
        for j in range(n_tau):
            lo_w, hi_w = windows[j]
            lo = max(lo_w, (tau[j - 1] + gap) if j > 0 else gap)
            hi = min(hi_w, (tau[j + 1] - gap) if j < n_tau - 1 else 1.0 - gap)
            if step[j] > 0:
                alpha = min(alpha, 0.9 * (hi - tau[j]) / step[j]) \
                    if step[j] > 1e-15 else alpha
            elif step[j] < 0:
                alpha = min(alpha, 0.9 * (lo - tau[j]) / step[j]) \
                    if step[j] < -1e-15 else alpha
        alpha = max(alpha, 1e-3)
        improved = False
        r_norm = float(np.max(np.abs(R)))
        for _ls in range(8):
            tau_try = tau + alpha * step
            order_ok = np.all(np.diff(tau_try) > 0.0) and \
                all(windows[j][0] <= tau_try[j] <= windows[j][1]
                    for j in range(n_tau))
            if order_ok:
                pieces_try = pieces_for(tau_try)
                r_try = float(np.max(np.abs(residuals_of(pieces_try))))
                if r_try < r_norm:
                    tau = tau_try
                    pieces = pieces_try
                    improved = True
                    break
            alpha *= 0.5
        if not improved:
            break
        mismatch = mismatch_of(pieces)
        converged = mismatch < junction_tol
    if not converged:
        raise ConstructionError(
            f"junction system did not meet the matching tolerance: "
            f"mismatch {mismatch:.3e}")

    for j, pc in enumerate(pieces):
        if pc.trivial:
            raise ConstructionError(
                f"piece {j} has a trivial minimizer at the maximizer; "
                "the block counts are not admissible at this eps")

    # assemble the glued solution
    xs = [pieces[0].x_grid]
    us = [pieces[0].u_values]
    for pc in pieces[1:]:
        xs.append(pc.x_grid[1:])
        us.append(pc.u_values[1:])
    x = np.concatenate(xs)
    u = np.concatenate(us)
    uprime = np.gradient(u, x, edge_order=2)
    # natural conditions at the domain ends and matched one-sided values
    # at the junctions (the construction's own derivative data)
    uprime[0] = 0.0
    uprime[-1] = 0.0
    offset = 0
    for j, pc in enumerate(pieces[:-1]):
        offset += len(pc.x_grid) - 1
        uprime[offset] = 0.5 * (pc.d_right + pieces[j + 1].d_left)

    part = Partition(tau=tau.copy(), blocks=blocks)
    sol = BVPSolution(epsilon=eps, x_grid=x, u_values=u,
                      uprime_values=uprime, tau_star=part,
                      zero_locations=tau.copy(), pieces=pieces,
                      junction_mismatch=float(mismatch))
    return part, sol


# ---------------------------------------------------------------------------
# Shooting, eigenvalue counting, Pruefer angle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """A shooting trajectory of the eps-problem with its energy defect."""

    epsilon: float
    x_grid: np.ndarray
    u_values: np.ndarray
    w_values: np.ndarray          # w = phi_p(eps u')
    uprime_values: np.ndarray
    energy_defect: float          # max | E_eps - E_eps(x0) - int (a'/a^2) L |


def shoot_ivp(eps: float, x0: float, u0: float, w0: float,
              a: WeightFunction, Wd: DoubleWellPotential,
              direction: int = +1, x_end: float | None = None,
              n_out: int = 801, rtol: float = 1e-11,
              atol: float = 1e-13) -> Trajectory:
    """Integrate u' = phi_p^{-1}(w)/eps, w' = a W'(u)/eps from (u0, w0).

    The quadrature variable z' = (a'/a^2) L(eps u') is carried along, so
    the reported energy defect measures the conservation of the energy
    identity over the trajectory.
    """
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    P = Wd.pexp
    if x_end is None:
        x_end = 1.0 if direction > 0 else 0.0

    def rhs(x, y):
        u, w, _ = y
        lval = abs(w) ** P.p_star / P.p_star
        av = float(a.a(x))
        return [phi_p_inv(w, P) / eps,
                av * float(Wd.w_prime(u)) / eps,
                float(a.a_prime(x)) / (av * av) * lval]

    xs = np.linspace(x0, x_end, n_out)
    sol = solve_ivp(rhs, (x0, x_end), [u0, w0, 0.0], t_eval=xs,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError(f"shooting failed: {sol.message}")
    u = sol.y[0]
    w = sol.y[1]
    z = sol.y[2]
    lv = np.abs(w) ** P.p_star / P.p_star
    av = np.asarray(a.a(sol.t), dtype=float)
    e_eps = -lv / av + np.asarray(Wd.w(u))
    defect = float(np.max(np.abs(e_eps - e_eps[0] - z)))
    return Trajectory(epsilon=eps, x_grid=sol.t, u_values=u, w_values=w,
                      uprime_values=phi_p_inv(w, P) / eps,
                      energy_defect=defect)


def count_eigenvalues(eps: float, s: float, t: float, a: WeightFunction,
                      Wd: DoubleWellPotential) -> int:
    """Number of negative Dirichlet eigenvalues of the linearization on
    (s, t), obtained as the zero count of the flow started at (0, 1).

    Integrates eps (phi_p(eps u'))' + C_0 a phi_p(u) = 0 from u(s) = 0,
    u'(s) = 1 and counts the zeros strictly inside (s, t).
    """
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    P = Wd.pexp
    c0 = Wd.c_zero

    def rhs(x, yw):
        y, w = yw
        return [phi_p_inv(w, P) / eps,
                -c0 * float(a.a(x)) * phi_p(y, P) / eps]

    def event(x, yw):
        return yw[0]

    event.terminal = False
    event.direction = 0
    w0 = phi_p(eps, P)        # w at u' = 1
    sol = solve_ivp(rhs, (s, t), [0.0, w0], method="DOP853", events=event,
                    rtol=1e-10, atol=1e-13, dense_output=False)
    if not sol.success:
        raise NumericalError(f"eigenvalue flow failed: {sol.message}")
    zeros = sol.t_events[0]
    interior = zeros[(zeros > s + 1e-12) & (zeros < t - 1e-12)]
    return int(len(interior))


@dataclass(frozen=True)
class AngleTrace:
    """Continuous generalized-polar angle along a trajectory."""

    x_grid: np.ndarray
    theta: np.ndarray
    winding: float                # |theta(x0) - theta(x1)| / pi_p

    @property
    def zero_estimate(self) -> float:
        return self.winding


def comparison_g(u, Wd: DoubleWellPotential):
    """g(u) = p^{1/p} (W_0 - W(u))^{1/p} sgn(u), the phase-plane gauge."""
    P = Wd.pexp
    u = np.asarray(u, dtype=float)
    val = (P.p * np.maximum(np.asarray(Wd.deficit(u)), 0.0)) ** (1.0 / P.p)
    out = val * np.sign(u)
    return out if out.ndim else float(out)


def prufer_angle(eps: float, x_grid, u_values, uprime_values,
                 a: WeightFunction, Wd: DoubleWellPotential) -> AngleTrace:
    """Continuous angle theta(x) of the generalized polar coordinates

        a^{1/p} g(u) = r^{2/p} C_p(theta),
        phi_p(eps u') = r^{2/p*} S_p(theta).

    The angle is computed pointwise from the normalized pair and unwrapped
    by continuity; the trajectory must be nontrivial (simple zeros keep
    r > 0).  The winding divided by pi_p estimates the zero count within
    one unit.
    """
    from .ptrig import p_atan2
    P = Wd.pexp
    x = np.asarray(x_grid, dtype=float)
    u = np.asarray(u_values, dtype=float)
    up = np.asarray(uprime_values, dtype=float)
    A = np.asarray(a.a(x), dtype=float) ** (1.0 / P.p) * comparison_g(u, Wd)
    B = phi_p(eps * up, P)
    r2_over_p = np.abs(A) ** P.p / P.p + np.abs(B) ** P.p_star / P.p_star
    r2 = P.p * r2_over_p
    if np.any(r2 <= 0.0):
        raise ValidationError(
            "degenerate trajectory: u and u' vanish simultaneously")
    c_t = A / r2 ** (1.0 / P.p)
    s_t = B / r2 ** (1.0 / P.p_star)
    th = p_atan2(s_t, c_t, P)
    # unwrap with decreasing-angle continuity
    two_pi = 2.0 * P.pi_p
    dth = np.diff(th)
    dth = (dth + P.pi_p) % two_pi - P.pi_p
    theta = np.concatenate([[th[0]], th[0] + np.cumsum(dth)])
    winding = abs(theta[0] - theta[-1]) / P.pi_p
    return AngleTrace(x_grid=x, theta=theta, winding=float(winding))
