import numpy as np
import pytest

from plaposc import (Block, PExponent, SupportInterval, SupportSpec,
                     WeightFunction, build_table, construct_profile,
                     make_allen_cahn, make_pendulum, maximize_partition)
from plaposc.bvp_solver import quantile_init, select_counts, zero_density_integral


@pytest.fixture(scope="session")
def P2():
    return PExponent.from_p(2.0)


@pytest.fixture(scope="session")
def P3():
    return PExponent.from_p(3.0)


@pytest.fixture(scope="session")
def P15():
    return PExponent.from_p(1.5)


@pytest.fixture(scope="session")
def ac2(P2):
    return make_allen_cahn(P2)


@pytest.fixture(scope="session")
def ac3(P3):
    return make_allen_cahn(P3)


@pytest.fixture(scope="session")
def pend2(P2):
    return make_pendulum(P2)


@pytest.fixture(scope="session")
def table_ac2(ac2):
    return build_table(ac2)


@pytest.fixture(scope="session")
def table_ac3(ac3):
    return build_table(ac3)


@pytest.fixture(scope="session")
def one_weight():
    return WeightFunction.constant(1.0)


def two_hump_weight(amp: float, scale: float) -> WeightFunction:
    def a(x):
        return scale * (1.0 + amp * np.sin(2 * np.pi * np.asarray(x, float)) ** 2)

    def a_prime(x):
        return scale * amp * 2 * np.pi * np.sin(4 * np.pi * np.asarray(x, float))

    return WeightFunction.from_callables(a, a_prime, "two-hump")


TWO_BLOCK_SUPPORT = SupportSpec(intervals=(SupportInterval("i", 0.1, 0.4),
                                           SupportInterval("i", 0.6, 0.9)))
SWEEP_EPSILONS = (0.05, 0.025, 0.0125)


@pytest.fixture(scope="session")
def sweep_artifacts(request):
    """Three-level broken-geodesic sweeps for p = 2 and p = 3.

    The weight amplitude is calibrated so that the per-block zero-density
    integral is 0.115 = 2.3 x the coarsest eps, keeping the count-rounding
    mismatch strictly decreasing under halving.
    """
    out = {}
    for p in (2.0, 3.0):
        P = PExponent.from_p(p)
        Wd = make_allen_cahn(P)
        table = build_table(Wd)
        probe = two_hump_weight(1.2, 1.0)
        prof_probe = construct_profile(TWO_BLOCK_SUPPORT, probe, table)
        I1 = zero_density_integral(0.1, 0.4, probe, prof_probe, table)
        scale = (0.115 / I1) ** p
        weight = two_hump_weight(1.2, scale)
        profile = construct_profile(TWO_BLOCK_SUPPORT, weight, table)
        sols = []
        for eps in SWEEP_EPSILONS:
            counts = select_counts(eps, [(0.1, 0.4), (0.6, 0.9)],
                                   weight, profile, table)
            blocks = [Block(0.1, 0.4, 0.09, counts[0]),
                      Block(0.6, 0.9, 0.09, counts[1])]
            tau0 = quantile_init(blocks, weight, profile, table)
            _part, sol = maximize_partition(eps, blocks, weight, Wd,
                                            cells_per_eps=20,
                                            initial_tau=tau0)
            sols.append((eps, counts, sol))
        out[p] = dict(P=P, Wd=Wd, table=table, weight=weight,
                      profile=profile, solutions=sols)
    return out
