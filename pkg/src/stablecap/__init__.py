"""Capacity of polynomials with non-negative coefficients.

Capacity solver, multiplicative scaling, productization of real stable
polynomials, the exact constant L_n(alpha), closed-form bounds and the
spanning-tree TSP instance.
"""

from .bounds import bound_report, main_capacity_lower, two_norm_lower, upper_bounds
from .capsolve import BOUNDARY_UNATTAINED, POSITIVE_ATTAINED, ZERO, CapacityResult, capacity
from .lnalpha import l_n_alpha, lp_min_general, prod_min_at_point
from .matforms import RowStochasticMatrix, permanent, product_poly, sinkhorn
from .polycore import PolyError, SparsePoly, linear_form, marginals, monomial
from .polyscale import run_scaling
from .productize import StabilityViolation, productize
from .srtsp import build_instance, spanning_tree_poly, verify_tsp_bound

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY_UNATTAINED", "POSITIVE_ATTAINED", "ZERO", "CapacityResult", "PolyError",
    "RowStochasticMatrix", "SparsePoly", "StabilityViolation", "bound_report", "build_instance",
    "capacity", "l_n_alpha", "linear_form", "lp_min_general", "main_capacity_lower", "marginals",
    "monomial", "permanent", "prod_min_at_point", "product_poly", "productize", "run_scaling",
    "sinkhorn", "spanning_tree_poly", "two_norm_lower", "upper_bounds", "verify_tsp_bound",
]
