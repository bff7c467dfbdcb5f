"""Exact high-dimensional asymptotics of the rules-and-facts (RAF) model.

A fraction 1 - eps of training labels follows a linear teacher rule,
the remaining fraction eps are random "facts".  This package computes the
asymptotic generalization/memorization trade-off of Bayes-optimal
estimation, kernel ridge regression, support vector machines, and
finite-width random features, and validates the theory with a
finite-size Monte Carlo oracle.
"""

from .bayes import BoSolution, bo_gen_error, bo_rate_constant, solve_bo
from .channel import HingeLoss, SquareLoss, f_out_star, loss_model, z_out_star
from .kernels import (KernelFamily, KernelGeometry, angle, geometry_from_angle,
                      kernel_family, match_family_to_angle, mu_from_activation,
                      mu_from_kernel, optimal_mem_angle)
from .montecarlo import (EmpiricalResult, RafDataset, aggregate, empirical_krr,
                         empirical_rf, empirical_svm, generate_raf_dataset,
                         mc_sweep)
from .numerics import (FixedPointConfig, Quadrature, bisect_root,
                       damped_fixed_point, gauss_hermite)
from .state_eqs import (ErmSpec, OrderParams, RfSpec, RfSolution, gen_error,
                        hinge_interp_threshold, hinge_lambda_opt,
                        hinge_optimal_angle, infinite_lambda_errors,
                        krr_closed_solution, krr_lambda_opt,
                        krr_large_alpha_coeff, krr_opt_errors, mem_error,
                        mem_error_proximal, ridgeless_errors,
                        ridgeless_perceptron_square, solve_kernel_state_eqs,
                        solve_rf_state_eqs)

__version__ = "0.1.0"
