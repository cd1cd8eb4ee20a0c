import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaposc.errors import DomainError
from plaposc.ptrig import (PExponent, big_L, big_L_plus_inv, compute_pi_p,
                           p_atan2, p_cos_sin, p_cosine, p_sine, phi_p,
                           phi_p_inv)


def test_exponent_pair_invariants():
    for p in (1.1, 1.5, 2.0, 3.0, 10.0):
        P = PExponent.from_p(p)
        assert abs(1.0 / P.p + 1.0 / P.p_star - 1.0) < 1e-15
        assert P.pi_p > 0
        expected_gamma = 1.0 / (p - 1.0) if p < 2.0 else 1.0
        assert P.gamma_p == expected_gamma


def test_gamma_branches_agree_at_two():
    lo = PExponent.from_p(2.0 - 1e-12)
    hi = PExponent.from_p(2.0)
    assert abs(lo.gamma_p - 1.0) < 1e-11
    assert hi.gamma_p == 1.0


def test_p_out_of_range_rejected():
    with pytest.raises(DomainError):
        PExponent.from_p(1.05)
    with pytest.raises(DomainError):
        PExponent.from_p(11.0)


def test_phi_p_examples():
    assert phi_p(3.0, PExponent.from_p(2.0)) == 3.0
    assert phi_p(-2.0, PExponent.from_p(3.0)) == -4.0
    assert phi_p(0.0, PExponent.from_p(1.7)) == 0.0


def test_phi_p_inv_examples():
    assert abs(phi_p_inv(-4.0, PExponent.from_p(3.0)) + 2.0) < 1e-14
    assert phi_p_inv(5.0, PExponent.from_p(2.0)) == 5.0
    # the inverse equals phi with the conjugate exponent
    P = PExponent.from_p(1.5)
    assert abs(phi_p_inv(8.0, P) - 64.0) < 1e-12


def test_big_L_examples():
    P2 = PExponent.from_p(2.0)
    assert big_L(3.0, P2) == 4.5
    assert big_L_plus_inv(2.0, P2) == 2.0
    P3 = PExponent.from_p(3.0)
    assert abs(big_L(1.0, P3) - 2.0 / 3.0) < 1e-15
    with pytest.raises(DomainError):
        big_L_plus_inv(-1.0, P2)


def test_big_L_roundtrip_and_parity():
    P = PExponent.from_p(2.5)
    for s in (-3.0, -0.7, 0.2, 4.0):
        assert abs(big_L_plus_inv(big_L(s, P), P) - abs(s)) < 1e-13
        assert big_L(-s, P) == big_L(s, P)
    assert big_L(0.0, P) == 0.0


@given(st.floats(-50.0, 50.0), st.floats(1.1, 10.0))
@settings(max_examples=300, deadline=None)
def test_phi_composition_identity(s, p):
    P = PExponent.from_p(p)
    back = phi_p_inv(phi_p(s, P), P)
    assert abs(back - s) <= 1e-12 * max(1.0, abs(s))


def test_pi_p_value_for_two():
    P = PExponent.from_p(2.0)
    assert abs(P.pi_p - math.pi) < 1e-10


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0, 3.0, 5.0])
def test_pi_p_two_quadratures_agree(p):
    P = PExponent.from_p(p)
    a = compute_pi_p(P, method="substitution")
    b = compute_pi_p(P, method="tanh_sinh")
    assert abs(a - b) < 1e-10 * a


def test_pi_p_three_approx():
    # independent oracle through the Beta-function closed form
    p = 3.0
    closed = 2 * math.pi * (p - 1) ** (1 / p) / (p * math.sin(math.pi / p))
    P = PExponent.from_p(p)
    assert abs(P.pi_p - closed) < 1e-12
    assert abs(P.pi_p - 3.04705) < 1e-4


def test_p_trig_normalization():
    for p in (1.3, 2.0, 4.0):
        P = PExponent.from_p(p)
        c, s = p_cos_sin(0.0, P)
        assert c == 1.0 and s == 0.0
        assert abs(abs(c) ** p / p + abs(s) ** P.p_star / P.p_star
                   - 1.0 / p) < 1e-15


def test_p_cosine_zero_at_quarter_period():
    P = PExponent.from_p(3.0)
    assert abs(p_cosine(P.pi_p / 2.0, P)) < 1e-9
    for k in (1, 2, 3):
        assert abs(p_cosine(P.pi_p / 2.0 + k * P.pi_p, P)) < 1e-8


def test_pythagorean_identity_on_grid():
    for p in (1.5, 2.0, 3.0, 7.0):
        P = PExponent.from_p(p)
        th = np.linspace(0.0, 2.0 * P.pi_p, 4001)
        c, s = p_cos_sin(th, P)
        iv = np.abs(c) ** p / p + np.abs(s) ** P.p_star / P.p_star
        assert np.max(np.abs(iv - 1.0 / p)) < 1e-9


def test_identity_at_theta_one_p3():
    P = PExponent.from_p(3.0)
    c, s = p_cos_sin(1.0, P)
    assert abs(abs(c) ** 3 / 3 + abs(s) ** 1.5 / 1.5 - 1.0 / 3.0) < 1e-9


def test_derivative_relations_finite_difference():
    h = 1e-6
    rng = np.random.default_rng(7)
    for p in (1.5, 2.0, 3.0):
        P = PExponent.from_p(p)
        for theta in rng.uniform(0.05, 2 * P.pi_p - 0.05, size=12):
            cp, sp_ = p_cos_sin(theta + h, P)
            cm, sm = p_cos_sin(theta - h, P)
            c0, s0 = p_cos_sin(theta, P)
            ds = (sp_ - sm) / (2 * h)
            dc = (cp - cm) / (2 * h)
            assert abs(ds - phi_p(c0, P)) < 5e-7
            assert abs(dc + np.sign(s0) * abs(s0) ** (P.p_star - 1.0)) < 5e-7


def test_periodicity():
    for p in (1.5, 3.0):
        P = PExponent.from_p(p)
        th = np.linspace(0.0, 2 * P.pi_p, 101)
        c1, s1 = p_cos_sin(th, P)
        c2, s2 = p_cos_sin(th + 2 * P.pi_p, P)
        assert np.max(np.abs(c1 - c2)) < 1e-11
        assert np.max(np.abs(s1 - s2)) < 1e-11


def test_p2_reduces_to_trig():
    P = PExponent.from_p(2.0)
    th = np.linspace(-5.0, 9.0, 301)
    c, s = p_cos_sin(th, P)
    assert np.max(np.abs(c - np.cos(th))) < 1e-11
    assert np.max(np.abs(s - np.sin(th))) < 1e-11


def test_p_atan2_roundtrip():
    for p in (1.5, 2.0, 3.5):
        P = PExponent.from_p(p)
        th = np.linspace(0.001, 2 * P.pi_p - 0.001, 401)
        c, s = p_cos_sin(th, P)
        back = p_atan2(s, c, P)
        assert np.max(np.abs(back - th)) < 1e-10


def test_p_sine_public_wrapper():
    P = PExponent.from_p(2.0)
    assert abs(p_sine(0.3, P) - math.sin(0.3)) < 1e-11
