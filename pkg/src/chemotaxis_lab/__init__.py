"""Numerical lab for the 1-D parabolic-elliptic chemotaxis model with singular
sensitivity ``chi u v_x / v`` and logistic source ``u (a - b u)``."""

from .model import Params, Grid1D, make_grid, grid_for_spacing, project_to_modes, synthesize_profile
from .stability import lambda_k, chi_k_star, chi_star, k_star_floor
from .bifurcation import pitchfork_coefficients, local_branch_profile
from .integrator import SimConfig, simulate, rhs, step_rk4
from .continuation import newton_solve, trace_branch, assess_stability
from .galerkin import galerkin_rhs, integrate_galerkin
from .diagnostics import detect_spiky_points, theorem42_audit, window_oscillation, flattening_check

__version__ = "0.1.0"
