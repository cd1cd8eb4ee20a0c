import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from plaposc.autonomous import (arch_time, boundary_pair, build_table,
                                heteroclinic_orbit, integrate_orbit,
                                kinetic_avg, time_map)
from plaposc.errors import DomainError, ValidationError
from plaposc.potential import h_pm


def shoot_period(Wd, xi, with_kinetic=False):
    """Poincare-return oracle for the period of the xi-orbit (p = 2)."""
    e = Wd.w_zero - xi
    vp0 = math.sqrt(2.0 * e)

    def rhs(x, y):
        return [y[1], float(Wd.w_prime(y[0])), y[1] ** 2 / 2.0]

    def crossing(x, y):
        return y[0]

    crossing.terminal = False
    crossing.direction = 1
    sol = solve_ivp(rhs, (0.0, 80.0), [0.0, vp0, 0.0], method="DOP853",
                    events=crossing, rtol=1e-12, atol=1e-14,
                    dense_output=True)
    events = sol.t_events[0]
    period = float(events[events > 1e-6][0])
    if not with_kinetic:
        return period
    kinetic = float(sol.sol(period)[2]) / period
    return period, kinetic


def test_time_map_limit_at_top(ac2):
    xi = ac2.w_zero * (1.0 - 1e-6)
    assert abs(time_map(xi, 1.0, ac2) - 2.0 * math.pi) < 1e-3


def test_time_map_limit_general_p(ac3, P3):
    xi = ac3.w_zero * (1.0 - 1e-7)
    # T -> 2 pi_p / C_0^{1/p} with C_0 = 1
    assert abs(time_map(xi, 1.0, ac3) - 2.0 * P3.pi_p) < 1e-4


def test_time_map_scaling_law(ac2):
    rng = np.random.default_rng(3)
    for a in (5.0,):
        for frac in rng.uniform(1e-4, 1.0 - 1e-4, size=10):
            xi = frac * ac2.w_zero
            lhs = time_map(xi, 1.0, ac2)
            rhs = a ** 0.5 * time_map(xi, a, ac2)
            assert abs(lhs - rhs) < 1e-8 * lhs


def test_time_map_vs_shooting(ac2):
    xi = ac2.w_zero / 2.0
    assert abs(time_map(xi, 1.0, ac2) - shoot_period(ac2, xi)) < 1e-6


def test_time_map_domain(ac2):
    with pytest.raises(DomainError):
        time_map(0.0, 1.0, ac2)
    with pytest.raises(DomainError):
        time_map(ac2.w_zero / 2, -1.0, ac2)


def test_kinetic_scaling_law(ac2):
    rng = np.random.default_rng(5)
    a = 3.0
    for frac in rng.uniform(1e-3, 1 - 1e-3, size=8):
        xi = frac * ac2.w_zero
        assert abs(kinetic_avg(xi, 1.0, ac2)
                   - kinetic_avg(xi, a, ac2) / a) < 1e-8


def test_kinetic_small_near_top(ac2):
    assert kinetic_avg(ac2.w_zero * (1 - 1e-4), 1.0, ac2) < 1e-3


def test_kinetic_vs_time_average_oracle(ac2):
    xi = ac2.w_zero / 2.0
    _period, k_oracle = shoot_period(ac2, xi, with_kinetic=True)
    assert abs(kinetic_avg(xi, 1.0, ac2) - k_oracle) < 1e-6


def test_kinetic_vanishes_at_both_ends(ac2):
    w0 = ac2.w_zero
    ks_low = [kinetic_avg(w0 * f, 1.0, ac2) for f in (1e-4, 1e-7, 1e-10)]
    ks_high = [kinetic_avg(w0 * (1 - f), 1.0, ac2)
               for f in (1e-4, 1e-7, 1e-10)]
    assert all(b < a for a, b in zip(ks_low, ks_low[1:]))
    assert all(b < a for a, b in zip(ks_high, ks_high[1:]))


def test_table_monotonicity_and_positivity(table_ac2):
    assert np.all(np.diff(table_ac2.t_values) < 0)
    assert np.all(table_ac2.k_values > 0)


def test_table_small_build_matches_spec_example(ac2):
    table = build_table(ac2, n_nodes=256, floor_rel=1e-9, ceil_gap=1e-7,
                        check_midpoints=5)
    assert np.all(np.diff(table.t_values) < 0)


def test_table_interpolation_midpoints(table_ac2, ac2):
    w0 = ac2.w_zero
    y = np.log(table_ac2.xi_grid / (w0 - table_ac2.xi_grid))
    rng = np.random.default_rng(11)
    for i in rng.integers(1, len(y) - 2, size=12):
        xm = w0 / (1.0 + math.exp(-0.5 * (y[i] + y[i + 1])))
        t_direct = time_map(float(xm), 1.0, ac2)
        k_direct = kinetic_avg(float(xm), 1.0, ac2)
        assert abs(table_ac2.T_of(xm) - t_direct) < 1e-6 * t_direct
        assert abs(table_ac2.K_of(xm) - k_direct) < 1e-6 * k_direct


def test_log_slope_stabilizes(ac2):
    # T(xi) ~ -C* log xi: ratio variation below 5% in the last decade
    xis = np.array([1e-8, 3e-8, 1e-7, 3e-7, 1e-6])
    ratios = np.array([time_map(x, 1.0, ac2) for x in xis]) / (-np.log(xis))
    assert (ratios.max() - ratios.min()) / ratios.mean() < 0.05


def test_heteroclinic_tanh_oracle(ac2):
    het = heteroclinic_orbit(1.0, ac2, 12.0, 4001)
    mask = np.abs(het.x_grid) <= 5.0
    err = np.max(np.abs(het.v_values[mask]
                        - np.tanh(het.x_grid[mask] / math.sqrt(2.0))))
    assert err < 1e-9
    i0 = int(np.argmin(np.abs(het.x_grid)))
    assert abs(het.vprime_values[i0] - 1.0 / math.sqrt(2.0)) < 1e-12
    # linear interpolation between grid nodes limits this comparison
    v_at_one = float(np.interp(1.0, het.x_grid, het.v_values))
    assert abs(v_at_one - math.tanh(1.0 / math.sqrt(2.0))) < 1e-5


def test_heteroclinic_kinetic_integral(ac2):
    het = heteroclinic_orbit(1.0, ac2, 12.0, 2001)
    assert abs(het.kinetic_integral - math.sqrt(2.0) / 3.0) < 1e-9


def test_heteroclinic_monotone_and_zero_energy(ac3):
    het = heteroclinic_orbit(1.0, ac3, 8.0, 1001)
    assert np.all(np.diff(het.v_values) >= 0)
    # energy by definition: -(1/a) L(v') + W(v) with p = 3
    P = ac3.pexp
    lv = np.abs(het.vprime_values) ** P.p / P.p_star
    H = -lv + np.asarray(ac3.w(het.v_values))
    assert np.max(np.abs(H)) < 1e-12


def test_boundary_pair_symmetry(ac2):
    vp, vm = boundary_pair(4.0, 1.0, ac2, 801)
    assert abs(vm.v0 + vp.v0) < 1e-12
    assert abs(vp.v_values[0]) < 1e-10 and abs(vp.v_values[-1]) < 1e-10
    assert np.all(vp.v_values >= -1e-12)
    assert np.all(vm.v_values <= 1e-12)


def test_boundary_pair_exponential_in_M(ac2):
    gaps = []
    for M in (3.0, 4.0, 5.0, 6.0):
        vp, _ = boundary_pair(M, 1.0, ac2, 401)
        gaps.append(1.0 - vp.v0)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    slope = np.polyfit([3.0, 4.0, 5.0, 6.0], np.log(gaps), 1)[0]
    assert slope < -1.0  # log-linear decay


def test_boundary_pair_shooting_oracle(ac2):
    M = 5.0
    vp, _ = boundary_pair(M, 1.0, ac2, 2001)
    e0 = ac2.w_zero - vp.xi

    def rhs(x, y):
        return [y[1], float(ac2.w_prime(y[0]))]

    sol = solve_ivp(rhs, (-M, M), [0.0, math.sqrt(2 * e0)], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    assert abs(float(sol.sol(0.0)[0]) - vp.v0) < 1e-6
    assert abs(float(sol.y[0][-1])) < 1e-6


def test_boundary_pair_below_minimum_rejected(ac2):
    # minimal half-length is pi/2 for the Allen-Cahn quadratic top
    with pytest.raises(DomainError):
        boundary_pair(1.0, 1.0, ac2, 101)


def test_orbit_energy_conservation(ac2):
    xi = 0.6 * ac2.w_zero
    e = ac2.w_zero - xi
    w0m = math.sqrt(2 * e)  # p = 2: w = v'
    x, v, w = integrate_orbit((0.0, 25.0), 0.0, w0m, 1.0, ac2,
                              x_eval=np.linspace(0, 25, 1001))
    H = -np.abs(w) ** 2 / 2.0 + np.asarray(ac2.w(v))
    assert np.max(np.abs(H - xi)) < 1e-8 * (1 + xi)


def test_arch_time_is_half_period_for_even_well(ac2):
    xi = 0.3 * ac2.w_zero
    assert abs(arch_time(xi, 1.0, ac2, +1)
               - time_map(xi, 1.0, ac2) / 2.0) < 1e-10


def test_k_inverse_integrals_converge_and_diverge(ac2, table_ac2):
    from plaposc.limit_profile import divergence_probe, k_antiderivative
    w0 = ac2.w_zero
    # lower end: Cauchy convergence of the partial integrals
    diffs = []
    for delta in (1e-5, 1e-6, 1e-7):
        diffs.append(k_antiderivative(2 * delta, table_ac2)
                     - k_antiderivative(delta, table_ac2))
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert diffs[-1] < 1e-4
    # upper end: each halving of the gap adds a near-constant amount
    g1 = divergence_probe(ac2, 1.0, gap=1e-6)
    g2 = divergence_probe(ac2, 1.0, gap=1e-12)
    g3 = divergence_probe(ac2, 1.0, gap=1e-24)
    assert g3 > g2 > g1
    # logarithmic growth: a constant amount per decade of the gap
    per_decade_1 = (g2 - g1) / 6.0
    per_decade_2 = (g3 - g2) / 12.0
    assert abs(per_decade_2 / per_decade_1 - 1.0) < 0.1
