"""Closed-form equilibria of a multi-topic opinion formation game on a graph.

Agents steer their opinions on ``m`` coupled topics while an adversarial
disturbance acts on each agent.  The package assembles the network
matrices, solves the open-loop Nash/worst-case equilibrium in closed form,
runs a distributed terminal-state estimator, computes the social optimum,
and handles commuting time-varying transition matrices.
"""
from .distributed import (
    closed_loop_simulate,
    distributed_action,
    distributed_disturbance,
    estimator_rhs_local,
    estimator_rhs_stacked,
    integrate_estimator,
)
from .errors import (
    AssumptionWarning,
    DefectiveMatrixError,
    NoUniqueEquilibriumError,
    NotHurwitzError,
    NumericalError,
    OpinionGameError,
    QuadratureError,
    ValidationError,
)
from .experiment import ErrorReport, RunReport, run_baseline, run_experiment
from .graph import (
    OpinionNetwork,
    agent_terms,
    extended_laplacian,
    incidence_matrix,
    stacked_terms,
)
from .linalg import expm_scaled, loewner_leq, psi_integral, spectrum_has_positive_real_parts
from .ltv import (
    CommutativeFamily,
    PiecewisePolynomial,
    extended_eigenpairs,
    ltv_stability_check,
    spectral_transition,
)
from .nash import (
    GameMatrices,
    Scenario,
    TrajectorySet,
    assemble_game,
    discrete_kkt_oracle,
    nash_action,
    nash_trajectory,
    terminal_error,
    worst_case_cost,
    worst_case_disturbance,
)
from .scenario_io import parse_scenario, write_scenario
from .social import SocialMatrices, assemble_social, social_profile, total_terminal_error

__version__ = "0.1.0"
