import numpy as np
import pytest

from plaposc.errors import DomainError, NumericalError, ValidationError
from plaposc.limit_profile import (EnergyProfile, SupportInterval,
                                   SupportSpec, construct_profile,
                                   divergence_probe, integrate_profile_forward,
                                   k_antiderivative, k_antiderivative_inverse,
                                   profile_residual)
from plaposc.potential import WeightFunction


@pytest.fixture(scope="module")
def linear_weight():
    return WeightFunction.from_callables(
        lambda x: 1.0 + np.asarray(x, float),
        lambda x: np.ones_like(np.asarray(x, float)), "1+x")


@pytest.fixture(scope="module")
def type_ii_support():
    return SupportSpec(intervals=(SupportInterval("ii", 0.0, 1.0),))


def test_g_basics(table_ac2):
    assert k_antiderivative(0.0, table_ac2) == 0.0
    vals = [k_antiderivative(e, table_ac2)
            for e in (1e-6, 1e-3, 0.05, 0.12, 0.2)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(v > 0 for v in vals)


def test_g_domain_errors(table_ac2):
    with pytest.raises(DomainError):
        k_antiderivative(-0.1, table_ac2)
    with pytest.raises(DomainError):
        k_antiderivative(table_ac2.w_zero, table_ac2)
    with pytest.raises(NumericalError):
        k_antiderivative_inverse(1e6, table_ac2)


def test_g_inverse_roundtrip(table_ac2):
    for e in (1e-8, 1e-4, 0.03, 0.18):
        z = k_antiderivative(e, table_ac2)
        back = k_antiderivative_inverse(z, table_ac2)
        assert abs(back - e) < 1e-8 * max(e, 1e-8)


def test_divergence_probe_exceeds_threshold(ac2, table_ac2):
    # the integral of 1/K up to W_0 - gap grows without bound; it passes
    # 10^3 at gaps that remain representable thanks to the deficit form
    base = k_antiderivative(ac2.w_zero - 1e-3, table_ac2)
    for gap in (1e-60, 1e-140, 1e-230):
        total = base + divergence_probe(ac2, 1.0, gap=gap)
        if total > 1e3:
            break
    assert total > 1e3


def test_empty_support_gives_zero_profile(linear_weight, table_ac2):
    A = SupportSpec(intervals=())
    prof = construct_profile(A, linear_weight, table_ac2)
    assert np.all(prof.e_values == 0.0)
    assert profile_residual(prof, linear_weight, table_ac2) == 0.0


def test_constant_weight_rejects_nonempty_support(table_ac2):
    const = WeightFunction.constant(2.0)
    A = SupportSpec(intervals=(SupportInterval("ii", 0.2, 1.0),))
    with pytest.raises(ValidationError):
        construct_profile(A, const, table_ac2)


def test_full_interval_support_rejected():
    with pytest.raises(ValidationError):
        SupportSpec(intervals=(SupportInterval("i", 0.0, 1.0),))


def test_type_i_requires_matching_edges(table_ac2, linear_weight):
    A = SupportSpec(intervals=(SupportInterval("i", 0.2, 0.6),))
    with pytest.raises(ValidationError):
        construct_profile(A, linear_weight, table_ac2)


def test_interval_kind_constraints():
    with pytest.raises(ValidationError):
        SupportInterval("ii", 0.2, 0.9)  # must end at 1
    with pytest.raises(ValidationError):
        SupportInterval("iii", 0.1, 0.9)  # must start at 0
    with pytest.raises(ValidationError):
        SupportInterval("bogus", 0.1, 0.9)


def test_type_ii_profile_residual(linear_weight, type_ii_support, table_ac2):
    prof = construct_profile(type_ii_support, linear_weight, table_ac2)
    assert prof.e_values[0] == 0.0
    assert np.all(prof.e_values >= 0.0)
    assert np.all(prof.e_values < table_ac2.w_zero)
    assert profile_residual(prof, linear_weight, table_ac2) < 1e-6


def test_profile_matches_separated_formula(linear_weight, type_ii_support,
                                           table_ac2):
    prof = construct_profile(type_ii_support, linear_weight, table_ac2)
    for x in (0.25, 0.5, 0.9):
        expected = k_antiderivative_inverse(np.log1p(x), table_ac2)
        assert abs(prof.interp(x) - expected) < 1e-9


def test_forward_integration_oracle(linear_weight, type_ii_support,
                                    table_ac2):
    prof = construct_profile(type_ii_support, linear_weight, table_ac2)
    fwd = integrate_profile_forward(type_ii_support.intervals[0],
                                    linear_weight, table_ac2, delta=1e-8)
    dev = np.max(np.abs(fwd.e_values - prof.interp(fwd.x_grid)))
    assert dev < 1e-4


def test_uniqueness_by_delta_extrapolation(linear_weight, type_ii_support,
                                           table_ac2):
    prof = construct_profile(type_ii_support, linear_weight, table_ac2)
    devs = []
    for delta in (1e-6, 1e-8, 1e-10):
        fwd = integrate_profile_forward(type_ii_support.intervals[0],
                                        linear_weight, table_ac2, delta=delta)
        devs.append(np.max(np.abs(fwd.e_values - prof.interp(fwd.x_grid))))
    assert devs[-1] < 1e-4
    assert devs[-1] <= devs[0]


def test_monotone_profile_where_weight_increases(linear_weight,
                                                 type_ii_support, table_ac2):
    prof = construct_profile(type_ii_support, linear_weight, table_ac2)
    assert np.all(np.diff(prof.e_values) >= -1e-15)


def test_type_iii_profile(table_ac2):
    weight = WeightFunction.from_callables(
        lambda x: 2.0 - np.asarray(x, float),
        lambda x: -np.ones_like(np.asarray(x, float)), "2-x")
    A = SupportSpec(intervals=(SupportInterval("iii", 0.0, 1.0),))
    prof = construct_profile(A, weight, table_ac2)
    assert prof.e_values[-1] == 0.0
    assert prof.e_values[0] > 0.0
    assert profile_residual(prof, weight, table_ac2) < 1e-6


def test_two_block_profile_and_perturbation(table_ac2):
    from tests.conftest import TWO_BLOCK_SUPPORT, two_hump_weight
    weight = two_hump_weight(1.2, 1.0)
    prof = construct_profile(TWO_BLOCK_SUPPORT, weight, table_ac2)
    base = profile_residual(prof, weight, table_ac2)
    assert base < 1e-5
    bumped = prof.e_values.copy()
    inside = (prof.x_grid > 0.2) & (prof.x_grid < 0.3)
    bumped[inside] += 0.01
    bad = EnergyProfile(x_grid=prof.x_grid, e_values=bumped,
                        support=TWO_BLOCK_SUPPORT)
    assert profile_residual(bad, weight, table_ac2) > 10 * 1e-5


def test_zero_profile_residual_convention(table_ac2):
    from tests.conftest import TWO_BLOCK_SUPPORT, two_hump_weight
    weight = two_hump_weight(1.2, 1.0)
    flat = EnergyProfile(x_grid=np.linspace(0, 1, 201),
                         e_values=np.zeros(201), support=TWO_BLOCK_SUPPORT)
    assert profile_residual(flat, weight, table_ac2) == 0.0


def test_profile_stays_below_w0(table_ac2, linear_weight, type_ii_support):
    prof = construct_profile(type_ii_support, linear_weight, table_ac2)
    assert prof.e_values.max() < table_ac2.w_zero
