"""Decay diagnostics for networked MDPs.

This package measures how strongly agents interact (kernel, policy and Q
interaction matrices), certifies polynomial decay of those interactions, and
checks the truncation, performance-difference and closure bounds built on
them.
"""

from lpi_marl.analysis.bounds import (
    ClosureConstants,
    ConvergenceConstants,
    beta_formula,
    closure_constants,
    convergence_constants,
    decay_exponent,
    entropy_lipschitz_check,
    gap_bound,
    improved_policy_constants,
    log_tv_check,
    mw_uniqueness_holds,
    nu_prime,
    p_max_lower_bound,
    performance_difference_bound,
    q_decay_constant,
    tau_threshold,
)
from lpi_marl.analysis.decay import (
    DecayAlgebraReport,
    DecayCertificate,
    decay_algebra_checks,
    decay_check,
    tail_bound_holds,
    tail_sums,
    write_matrix_csv,
)
from lpi_marl.analysis.interaction import (
    InteractionKind,
    InteractionMatrix,
    c_matrix,
    policy_interaction,
    q_interaction,
    second_order_interaction,
)
from lpi_marl.analysis.truncation import (
    ClosureRecord,
    PerformanceDifferenceReport,
    TruncationReport,
    closure_monitor,
    performance_difference,
    policy_tv_sum,
    truncation_error,
)

__all__ = [
    # Interaction matrices
    "InteractionKind",
    "InteractionMatrix",
    "c_matrix",
    "policy_interaction",
    "q_interaction",
    "second_order_interaction",
    # Decay certificates
    "DecayCertificate",
    "DecayAlgebraReport",
    "decay_check",
    "decay_algebra_checks",
    "tail_sums",
    "tail_bound_holds",
    "write_matrix_csv",
    # Bounds
    "ClosureConstants",
    "ConvergenceConstants",
    "tau_threshold",
    "decay_exponent",
    "closure_constants",
    "convergence_constants",
    "gap_bound",
    "nu_prime",
    "q_decay_constant",
    "improved_policy_constants",
    "beta_formula",
    "p_max_lower_bound",
    "mw_uniqueness_holds",
    "performance_difference_bound",
    "entropy_lipschitz_check",
    "log_tv_check",
    # Checks
    "TruncationReport",
    "PerformanceDifferenceReport",
    "ClosureRecord",
    "truncation_error",
    "performance_difference",
    "policy_tv_sum",
    "closure_monitor",
]
