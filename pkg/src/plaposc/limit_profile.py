"""Limit energy profiles: solutions of E' = (a'/a) K(E) with prescribed support.

The right-hand side is non-Lipschitz at E = 0 (K vanishes only
logarithmically), which is exactly why nontrivial supports are possible.
On each support component the unique profile vanishing at the anchor edge
comes from separation of variables,

    G(E(x)) = log( a(x) / a(anchor) ),    G(E) = int_0^E d xi / K(xi),

with G strictly increasing, G(0) = 0 and G(E) -> +inf as E -> W_0, so the
constructed E automatically stays below W_0.  Forward integration from a
small positive level serves only as an independent oracle: starting at
E = delta instead of 0 shifts the profile by the vanishing lag G(delta).

Support components follow the admissible classification: interior
components (s, t) need a(s) = a(t) and a > a(s) inside; half-open
components (s, 1] and [0, t) need the weight to exceed its anchor value on
the component.  A support equal to all of [0, 1] is rejected (the profile
is not unique there and no selection principle is adopted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, PchipInterpolator

from .autonomous import TimeMapTable, kinetic_avg
from .errors import DomainError, NumericalError, ValidationError
from .potential import DoubleWellPotential, WeightFunction

__all__ = [
    "SupportInterval", "SupportSpec", "EnergyProfile",
    "k_antiderivative", "k_antiderivative_inverse", "construct_profile",
    "profile_residual", "integrate_profile_forward", "divergence_probe",
]


@dataclass(frozen=True)
class SupportInterval:
    """One connected component of {E > 0}.

    kind "i" is an interior interval (s, t); kind "ii" reaches the right
    boundary, (s, 1]; kind "iii" reaches the left boundary, [0, t).
    """

    kind: str
    s: float
    t: float

    def __post_init__(self):
        if self.kind not in ("i", "ii", "iii"):
            raise ValidationError(f"unknown support interval kind {self.kind!r}")
        if not (0.0 <= self.s < self.t <= 1.0):
            raise ValidationError(
                f"support interval needs 0 <= s < t <= 1, got ({self.s}, {self.t})")
        if self.kind == "ii" and self.t != 1.0:
            raise ValidationError("kind-ii intervals must end at t = 1")
        if self.kind == "iii" and self.s != 0.0:
            raise ValidationError("kind-iii intervals must start at s = 0")

    @property
    def anchor(self) -> float:
        """The edge where E vanishes and the separated solution is anchored."""
        return self.t if self.kind == "iii" else self.s


@dataclass(frozen=True)
class SupportSpec:
    """An ordered disjoint union of admissible support intervals."""

    intervals: tuple[SupportInterval, ...]

    def __post_init__(self):
        ivs = tuple(self.intervals)
        for prev, cur in zip(ivs, ivs[1:]):
            if cur.s < prev.t:
                raise ValidationError(
                    f"support intervals overlap or are unsorted near x = {cur.s}")
        if any(iv.kind == "iii" for iv in ivs[1:]):
            raise ValidationError("only the first interval may touch x = 0")
        if any(iv.kind == "ii" for iv in ivs[:-1]):
            raise ValidationError("only the last interval may touch x = 1")
        if len(ivs) == 1 and ivs[0].s == 0.0 and ivs[0].t == 1.0 \
                and ivs[0].kind == "i":
            raise ValidationError(
                "support equal to [0, 1] is rejected: the profile is not unique")

    def validate_against(self, weight: WeightFunction,
                         rel_tol: float = 1e-8, samples: int = 513) -> None:
        """Check the admissibility of every component for the given weight.

        Interior components need matching edge values (within rel_tol) and
        the weight strictly above the edge value inside (sampled).
        """
        for iv in self.intervals:
            a_anchor = float(weight.a(iv.anchor))
            if iv.kind == "i":
                a_s, a_t = float(weight.a(iv.s)), float(weight.a(iv.t))
                if abs(a_s - a_t) > rel_tol * max(abs(a_s), abs(a_t)):
                    raise ValidationError(
                        f"kind-i interval ({iv.s}, {iv.t}): a(s) = {a_s:.12g} "
                        f"and a(t) = {a_t:.12g} differ beyond tolerance")
            xs = np.linspace(iv.s, iv.t, samples)[1:-1]
            vals = np.asarray(weight.a(xs), dtype=float)
            bad = vals <= a_anchor
            if np.any(bad):
                xb = xs[int(np.argmax(bad))]
                raise ValidationError(
                    f"interval ({iv.s}, {iv.t}) kind {iv.kind}: weight does "
                    f"not exceed its anchor value at x = {xb:.6f}")


@dataclass(frozen=True)
class EnergyProfile:
    """A grid profile 0 <= E < W_0 vanishing exactly off its support."""

    x_grid: np.ndarray
    e_values: np.ndarray
    support: SupportSpec

    def interp(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x_grid, self.e_values)


# ---------------------------------------------------------------------------
# The antiderivative G of 1/K and its inverse
# ---------------------------------------------------------------------------

class _GMap:
    """Dense monotone representation of G(E) = int_0^E dxi / K(xi).

    Built once per table on a grid refined toward both energy endpoints
    (uniform in y = log xi - log(W_0 - xi)).  The below-floor stub is
    approximated by its leading term xi_floor / K(xi_floor); it contributes
    O(1e-11) against G values of order one.
    """

    def __init__(self, table: TimeMapTable, n_dense: int = 6001):
        w0 = table.w_zero
        y = np.linspace(table._y(table.xi_floor),
                        table._y(table.xi_ceil), n_dense)
        xi = w0 / (1.0 + np.exp(-y))
        f = (xi * (w0 - xi) / w0) / table.K_of(xi)  # d xi / dy over K
        spline = CubicSpline(y, f)
        g = spline.antiderivative()(y)
        g += table.xi_floor / float(table.K_of(table.xi_floor))
        self._w0 = w0
        self._y_lo = float(y[0])
        self._g_lo = float(g[0])
        self._xi_floor = table.xi_floor
        self._xi_ceil = table.xi_ceil
        self.g_ceil = float(g[-1])
        self._fwd = PchipInterpolator(y, g)
        self._inv = PchipInterpolator(g, y)

    def g_of(self, e):
        e = np.asarray(e, dtype=float)
        below = e < self._xi_floor
        ec = np.clip(e, self._xi_floor, self._xi_ceil)
        out = self._fwd(np.log(ec) - np.log(self._w0 - ec))
        out = np.where(below, self._g_lo * e / self._xi_floor, out)
        return out if out.ndim else float(out)

    def g_inv(self, z):
        z = np.asarray(z, dtype=float)
        below = z < self._g_lo
        zc = np.clip(z, self._g_lo, self.g_ceil)
        y = self._inv(zc)
        out = self._w0 / (1.0 + np.exp(-y))
        out = np.where(below, self._xi_floor * np.maximum(z, 0.0) / self._g_lo,
                       out)
        return out if out.ndim else float(out)


def _g_map(table: TimeMapTable) -> _GMap:
    gm = getattr(table, "_g_map_cache", None)
    if gm is None:
        gm = _GMap(table)
        table._g_map_cache = gm
    return gm


def k_antiderivative(E: float, table: TimeMapTable) -> float:
    """G(E) = int_0^E dxi / K(xi); strictly increasing with G(0) = 0."""
    if E < 0.0 or E >= table.w_zero:
        raise DomainError(f"G is defined for 0 <= E < W_0, got {E}")
    gm = _g_map(table)
    if E > table.xi_ceil:
        raise NumericalError(
            f"G({E}) is beyond the table ceiling {table.xi_ceil:.6e}; "
            "the integral diverges toward W_0")
    return float(gm.g_of(E))


def k_antiderivative_inverse(z: float, table: TimeMapTable) -> float:
    """Monotone inverse of G; defined for 0 <= z <= G(table ceiling)."""
    if z < 0.0:
        raise DomainError(f"G^-1 needs a nonnegative argument, got {z}")
    gm = _g_map(table)
    if z > gm.g_ceil:
        raise NumericalError(
            f"G^-1({z}) exceeds the tabulated range {gm.g_ceil:.3f}; "
            "the requested level is too close to W_0")
    return float(gm.g_inv(z))


def divergence_probe(Wd: DoubleWellPotential, a: float = 1.0,
                     gap: float = 1e-12, nodes_per_decade: int = 8,
                     start_gap: float = 1e-3) -> float:
    """Direct quadrature of int dxi / K from W_0 - start_gap to W_0 - gap.

    Probes the divergence of the integral at the top of the well by
    working in the gap variable e = W_0 - xi (accurate down to gaps near
    the smallest positive doubles); the integrand e / K(W_0 - e) tends to
    a positive constant, so the integral grows without bound as gap -> 0.
    """
    if not (0.0 < gap < start_gap):
        raise DomainError("need 0 < gap < start_gap")
    n = max(3, int(nodes_per_decade * math.log10(start_gap / gap)) + 1)
    le = np.linspace(math.log(start_gap), math.log(gap), n)
    vals = np.array([math.exp(l) / kinetic_avg(0.0, a, Wd,
                                               deficit=math.exp(l))
                     for l in le])
    # integrand in d(-log e) is smooth and slowly varying
    return float(np.trapezoid(vals, -le))


# ---------------------------------------------------------------------------
# Profile construction and residual
# ---------------------------------------------------------------------------

def _component_grid(iv: SupportInterval, h_bulk: float, edge_d0: float,
                    edge_ratio: float) -> np.ndarray:
    """Grid on [s, t], geometrically refined toward each vanishing edge.

    The refined zone ends where its local spacing reaches the bulk step,
    so spacings vary by at most the geometric ratio everywhere.
    """
    s, t = iv.s, iv.t
    length = t - s
    refine_left = iv.kind in ("i", "ii")
    refine_right = iv.kind in ("i", "iii")
    d_star = min(h_bulk / (edge_ratio - 1.0), 0.25 * length)

    def edge_distances():
        d = []
        cur = edge_d0 * length
        while cur < d_star:
            d.append(cur)
            cur *= edge_ratio
        return np.asarray(d)

    core_lo = s + (d_star if refine_left else 0.0)
    core_hi = t - (d_star if refine_right else 0.0)
    pieces = []
    if refine_left:
        pieces.append(s + edge_distances())
    n_core = max(8, int(math.ceil((core_hi - core_lo) / h_bulk)) + 1)
    pieces.append(np.linspace(core_lo, core_hi, n_core))
    if refine_right:
        pieces.append(t - edge_distances()[::-1])
    grid = np.unique(np.concatenate([[s], *pieces, [t]]))
    return grid


def construct_profile(A: SupportSpec, weight: WeightFunction,
                      table: TimeMapTable, h_bulk: float = 4e-4,
                      edge_d0: float = 1e-8, edge_ratio: float = 1.02,
                      off_support_h: float = 1e-2) -> EnergyProfile:
    """The unique profile vanishing exactly off A (separation of variables).

    On a component anchored at edge x_a, E(x) = G^-1(log(a(x) / a(x_a))).
    The grid refines geometrically into each vanishing edge so that the
    finite-difference residual of the profile equation stays small up to
    the edge; off A the profile is identically zero.
    """
    A.validate_against(weight)
    gm = _g_map(table)
    xs: list[np.ndarray] = []
    es: list[np.ndarray] = []

    def add_zero_segment(lo: float, hi: float):
        if hi - lo <= 0.0:
            return
        n = max(2, int(math.ceil((hi - lo) / off_support_h)) + 1)
        seg = np.linspace(lo, hi, n)
        xs.append(seg)
        es.append(np.zeros_like(seg))

    cursor = 0.0
    for iv in A.intervals:
        add_zero_segment(cursor, iv.s)
        grid = _component_grid(iv, h_bulk, edge_d0, edge_ratio)
        a_anchor = float(weight.a(iv.anchor))
        z = np.log(np.asarray(weight.a(grid), dtype=float) / a_anchor)
        z = np.maximum(z, 0.0)
        if float(np.max(z)) > gm.g_ceil:
            raise NumericalError(
                "weight ratio exceeds the tabulated range of G; this "
                "should be unreachable for realistic weights")
        e_vals = np.asarray(gm.g_inv(z), dtype=float)
        # the edges vanish exactly by construction
        e_vals[grid == iv.anchor] = 0.0
        if iv.kind == "i":
            e_vals[-1] = 0.0
        xs.append(grid)
        es.append(e_vals)
        cursor = iv.t
    add_zero_segment(cursor, 1.0)

    x = np.concatenate(xs)
    e = np.concatenate(es)
    x, idx = np.unique(x, return_index=True)
    e = e[idx]
    if np.any(e >= table.w_zero):
        raise NumericalError("constructed profile reached W_0")
    return EnergyProfile(x_grid=x, e_values=e, support=A)


def profile_residual(E: EnergyProfile, weight: WeightFunction,
                     table: TimeMapTable) -> float:
    """Max centered-difference residual |dE/dx - (a'/a) K(E)| over the grid.

    K(0) is taken as 0 by continuous extension, so fully vanishing
    stencils have zero residual.  Stencils that mix vanishing and positive
    values (the cells meeting a support edge, where E is C^1 but not C^2)
    are excluded: a centered difference across the kink measures the kink,
    not the equation.
    """
    field = profile_residual_field(E, weight, table)
    return float(np.max(field)) if field.size else 0.0


def profile_residual_field(E: EnergyProfile, weight: WeightFunction,
                           table: TimeMapTable) -> np.ndarray:
    """Pointwise residual of the profile equation (0 at skipped stencils)."""
    x = E.x_grid
    e = E.e_values
    if len(x) < 3:
        return np.zeros(len(x))
    pos = e > 0.0
    mixed = np.zeros(len(x), dtype=bool)
    mixed[1:-1] = (pos[:-2] != pos[1:-1]) | (pos[1:-1] != pos[2:])
    interior = np.ones(len(x), dtype=bool)
    interior[[0, -1]] = False
    keep = interior & ~mixed

    # three-point centered difference, second order on nonuniform grids
    # (reduces to the plain centered formula for uniform spacing)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    de = (hm * hm * e[2:] - hp * hp * e[:-2]
          - (hm * hm - hp * hp) * e[1:-1]) / (hm * hp * (hm + hp))
    slope = np.zeros(len(x))
    slope[1:-1] = de
    ks = np.zeros(len(x))
    ksel = keep & pos
    ks[ksel] = table.K_of(np.maximum(e[ksel], table.xi_floor))
    ks[ksel & (e < table.xi_floor)] = table.K_of(table.xi_floor) * \
        e[ksel & (e < table.xi_floor)] / table.xi_floor
    apa = np.asarray(weight.a_prime(x), dtype=float) / \
        np.asarray(weight.a(x), dtype=float)
    res = np.abs(slope - apa * ks)
    res[~keep] = 0.0
    return res


def integrate_profile_forward(iv: SupportInterval, weight: WeightFunction,
                              table: TimeMapTable, delta: float,
                              n_out: int = 201) -> EnergyProfile:
    """Oracle: integrate E' = (a'/a) K(E) from the anchor with E = delta.

    The regularized start at delta > 0 sidesteps the non-uniqueness at
    E = 0; the result lags the separated-variables profile by G(delta).
    """
    if delta <= 0.0:
        raise DomainError("delta must be positive")

    def rhs(x, y):
        e_val = max(float(y[0]), 0.0)
        k = float(table.K_of(max(e_val, table.xi_floor)))
        if e_val < table.xi_floor:
            k *= e_val / table.xi_floor
        return [float(weight.a_prime(x)) / float(weight.a(x)) * k]

    if iv.kind == "iii":
        span = (iv.t, iv.s)
        xs = np.linspace(iv.t, iv.s, n_out)
    else:
        span = (iv.s, iv.t)
        xs = np.linspace(iv.s, iv.t, n_out)
    sol = solve_ivp(rhs, span, [delta], t_eval=xs, method="RK45",
                    rtol=1e-11, atol=1e-14)
    if not sol.success:
        raise NumericalError(f"profile integration failed: {sol.message}")
    order = np.argsort(sol.t)
    return EnergyProfile(x_grid=sol.t[order], e_values=sol.y[0][order],
                         support=SupportSpec(intervals=(iv,)))
