import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import bisect

from plaposc.errors import DomainError, ValidationError
from plaposc.potential import (WeightFunction, h_pm, make_allen_cahn,
                               make_pendulum, validate_potential)
from plaposc.ptrig import PExponent, phi_p


def test_allen_cahn_values(ac2):
    assert ac2.w(0.0) == 0.25
    assert ac2.w(1.0) == 0.0
    assert ac2.w(-1.0) == 0.0
    assert ac2.c_one == 2.0
    assert ac2.c_zero == 1.0
    assert ac2.w_zero == 0.25


def test_allen_cahn_c1_matches_local_expansion(ac2):
    # (1/4)(1-u^2)^2 = (1-u)^2 (1+u)^2 / 4 ~ (1-u)^2 near u = 1
    d = 1e-5
    ratio = float(ac2.w(1.0 - d)) / ((ac2.c_one / 2.0) * d ** 2)
    assert abs(ratio - 1.0) < 1e-4


def test_pendulum_values(pend2):
    assert pend2.w(1.0) == 0.0
    assert abs(pend2.w(-1.0)) < 1e-12
    assert abs(pend2.w_zero - 2.0 / math.pi) < 1e-10


def test_pendulum_quadrature_oracle(pend2):
    # direct quadrature of the defining integral at a generic point
    from scipy.integrate import quad
    val = quad(lambda s: math.sin(math.pi * s), 0.3, 1.0)[0]
    assert abs(float(pend2.w(0.3)) - val) < 1e-8


def test_h_pm_limits(ac2):
    w0 = ac2.w_zero
    hm, hp = h_pm(w0 * (1 - 1e-10), ac2)
    assert abs(hm) < 1e-4 and abs(hp) < 1e-4
    hm, hp = h_pm(w0 * 1e-10, ac2)
    assert abs(hm + 1.0) < 1e-4 and abs(hp - 1.0) < 1e-4


def test_h_pm_allen_cahn_bisection_oracle(ac2):
    xi = 0.125
    oracle = bisect(lambda u: 0.25 * (1 - u * u) ** 2 - xi, 0.0, 1.0,
                    xtol=1e-14)
    hm, hp = h_pm(xi, ac2)
    assert abs(hp - oracle) < 1e-10
    assert abs(hp - 0.54120) < 1e-4
    assert abs(hm + hp) < 1e-12  # even well


def test_h_pm_domain_error(ac2):
    with pytest.raises(DomainError):
        h_pm(0.3, ac2)  # above W_0 = 0.25
    with pytest.raises(DomainError):
        h_pm(0.0, ac2)


@given(st.floats(1e-6, 1.0 - 1e-6))
@settings(max_examples=200, deadline=None)
def test_h_pm_roundtrip_property(frac):
    Wd = make_allen_cahn(PExponent.from_p(2.0))
    xi = frac * Wd.w_zero
    hm, hp = h_pm(xi, Wd)
    assert -1.0 < hm < 0.0 < hp < 1.0
    assert abs(float(Wd.w(hp)) - xi) < 1e-10
    assert abs(float(Wd.w(hm)) - xi) < 1e-10


def test_h_pm_monotone_in_xi(ac3):
    xis = np.linspace(0.05, 0.95, 19) * ac3.w_zero
    hps = [h_pm(float(x), ac3)[1] for x in xis]
    assert all(b < a for a, b in zip(hps, hps[1:]))


def test_validate_allen_cahn(ac2):
    rep = validate_potential(ac2)
    assert rep.ok and not rep.failures
    assert abs(rep.ratio_at_one - 1.0) < 1e-3 + 2e-3
    assert abs(rep.ratio_at_zero - 1.0) < 1e-3


def test_validate_pendulum_p3(P3):
    rep = validate_potential(make_pendulum(P3))
    assert rep.ok, rep.failures


def test_validate_rejects_tampered_potential(ac2):
    def bad_prime(u):
        u = np.asarray(u, dtype=float)
        flip = np.abs(u - 0.5) < 0.01
        return np.where(flip, -np.asarray(ac2.w_prime(u)),
                        np.asarray(ac2.w_prime(u)))

    bad = dataclasses.replace(ac2, w_prime=bad_prime)
    rep = validate_potential(bad)
    assert not rep.ok
    assert any("(W2)" in f for f in rep.failures)


def test_validate_grid_size_precondition(ac2):
    with pytest.raises(DomainError):
        validate_potential(ac2, grid_size=10)


def test_extension_keeps_w2_on_reals(ac2, P2):
    u = np.linspace(-2.5, 2.5, 2001)
    u = u[np.abs(u) > 1e-3]
    ratio = np.asarray(ac2.w_prime(u)) / phi_p(u, P2)
    neg = u < 0
    pos = u > 0
    assert np.all(np.diff(ratio[neg]) < 0)
    assert np.all(np.diff(ratio[pos]) > 0)


def test_extension_tail_formula(ac3):
    p = 3.0
    for u in (1.5, 2.0, -1.2):
        expected = (ac3.c_one / p) * (abs(u) - 1.0) ** p
        assert abs(float(ac3.w(u)) - expected) < 1e-14


def test_local_exponent_fit(ac3):
    # log-log regression of W near the well and of the deficit near 0
    p = 3.0
    d = np.logspace(-6, -4, 20)
    w_near_one = np.asarray(ac3.w(1.0 - d))
    slope = np.polyfit(np.log(d), np.log(w_near_one), 1)[0]
    assert abs(slope - p) < 1e-3
    dz = np.asarray(ac3.deficit(d))
    slope0 = np.polyfit(np.log(d), np.log(dz), 1)[0]
    assert abs(slope0 - p) < 1e-3


def test_deficit_accuracy_near_zero(ac2):
    for u in (1e-8, 1e-12):
        expected = u * u / 2.0 * (1.0 - u * u / 2.0)
        assert abs(float(ac2.deficit(u)) / expected - 1.0) < 1e-10


def test_weight_positivity_enforced():
    with pytest.raises(ValidationError):
        WeightFunction.from_callables(
            lambda x: np.asarray(x, float) - 0.5,
            lambda x: np.ones_like(np.asarray(x, float)))


def test_weight_from_samples_matches_derivative():
    x = np.linspace(0.0, 1.0, 201)
    w = WeightFunction.from_samples(x, 1.0 + 0.5 * np.sin(2 * x))
    xs = np.linspace(0.05, 0.95, 50)
    assert np.max(np.abs(np.asarray(w.a(xs)) - (1 + 0.5 * np.sin(2 * xs)))) < 1e-6
    assert np.max(np.abs(np.asarray(w.a_prime(xs)) - np.cos(2 * xs))) < 1e-3
