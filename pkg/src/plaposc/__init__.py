"""plaposc: phase-plane analysis and highly oscillatory solutions of
singularly perturbed p-Laplacian Neumann problems on [0, 1]."""

__version__ = "0.1.0"

from .autonomous import (ArchSolution, Heteroclinic, TimeMapTable, arch_time,
                         boundary_pair, build_table, heteroclinic_orbit,
                         kinetic_avg, time_map)
from .bvp_solver import (Block, BVPSolution, Partition, PieceMinimizer,
                         count_eigenvalues, m_partials, maximize_partition,
                         minimize_piece, prufer_angle, shoot_ivp)
from .limit_profile import (EnergyProfile, SupportInterval, SupportSpec,
                            construct_profile, k_antiderivative,
                            profile_residual)
from .potential import (DoubleWellPotential, WeightFunction, h_pm,
                        make_allen_cahn, make_pendulum, validate_potential)
from .ptrig import (PExponent, big_L, big_L_plus_inv, compute_pi_p,
                    p_cosine, p_sine, phi_p, phi_p_inv)

__all__ = [
    "__version__",
    "PExponent", "phi_p", "phi_p_inv", "big_L", "big_L_plus_inv",
    "compute_pi_p", "p_cosine", "p_sine",
    "DoubleWellPotential", "WeightFunction", "make_allen_cahn",
    "make_pendulum", "h_pm", "validate_potential",
    "TimeMapTable", "time_map", "kinetic_avg", "arch_time", "build_table",
    "Heteroclinic", "heteroclinic_orbit", "ArchSolution", "boundary_pair",
    "SupportSpec", "SupportInterval", "EnergyProfile", "construct_profile",
    "k_antiderivative", "profile_residual",
    "PieceMinimizer", "minimize_piece", "m_partials", "Block", "Partition",
    "BVPSolution", "maximize_partition", "shoot_ivp", "count_eigenvalues",
    "prufer_angle",
]
