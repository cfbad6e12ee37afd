"""Mesoscopic PDE flows and microscopic kinetic Monte Carlo."""
from .pde import (DynamicsError, PDETrajectory, evolve_nonlocal, evolve_line, evolve_rd, front_speed,
                  linear_response, front_position, torus_radius, level_set_radius, circle_data,
                  check_circle_shrinking, write_trajectory, config_hash)
from .lattice import (LatticeTrajectory, LocalRate, DerivedPair, HydroComparison, simulate_glauber_kac,
                      simulate_gk, derive_BD, bernstein_rate, constant_rate, gibbs_weights, gibbs_check,
                      flip_rate_check, hydro_compare_kac, hydro_compare_gk, kac_model_1d, kac_stencil,
                      block_average)
from ._backend import BACKEND, get_backend
