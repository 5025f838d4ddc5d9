"""Asymptotic performance of regularized logistic regression.

Solves the six-equation fixed point that predicts correlation, variance,
MSE and support recovery of the penalized logistic MLE in the proportional
regime, and checks the predictions against Monte Carlo fits.
"""
from .expectations import PriorSpec
from .lab import ExperimentConfig, FistaKnobs, fit_rlr, generate_instance, measure_trial, run_trials
from .prox import RegularizerSpec, moreau_envelope, prox_l1, prox_l2sq, prox_rho, prox_rho_derivative
from .scalar import gauss_hermite, q_function, rho, rho_prime, rho_second
from .solver import (
    FixedPoint,
    ProblemSpec,
    SolverKnobs,
    gamma_map,
    predict_functional,
    predict_support_recovery,
    solve_fixed_point,
    solve_l2_reduced,
    system_map,
    theory_report,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "FistaKnobs", "FixedPoint", "PriorSpec", "ProblemSpec", "RegularizerSpec",
    "SolverKnobs", "fit_rlr", "gamma_map", "gauss_hermite", "generate_instance", "measure_trial",
    "moreau_envelope", "predict_functional", "predict_support_recovery", "prox_l1", "prox_l2sq",
    "prox_rho", "prox_rho_derivative", "q_function", "rho", "rho_prime", "rho_second", "run_trials",
    "solve_fixed_point", "solve_l2_reduced", "system_map", "theory_report",
]
