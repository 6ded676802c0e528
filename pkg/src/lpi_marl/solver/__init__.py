"""Exact solvers for small networked MDPs."""

from lpi_marl.solver.dense import DenseModel, dense_model
from lpi_marl.solver.exact import (
    LocalQTable,
    QTable,
    ValueTable,
    bellman_optimal_apply,
    exact_policy_iteration,
    global_q,
    local_policy_value,
    local_q,
    local_qs,
    objective,
    objective_from_values,
    optimal_value,
    policy_value,
    q_from_value,
    solve_optimal,
    write_value_csv,
)
from lpi_marl.solver.mw import MWResult, multiplicative_weights
from lpi_marl.solver.stationary import (
    ChainReport,
    StationaryResult,
    induced_chain_check,
    stationary_distribution,
)

__all__ = [
    "DenseModel",
    "dense_model",
    "ValueTable",
    "QTable",
    "LocalQTable",
    "policy_value",
    "local_policy_value",
    "local_q",
    "local_qs",
    "global_q",
    "q_from_value",
    "bellman_optimal_apply",
    "solve_optimal",
    "optimal_value",
    "exact_policy_iteration",
    "objective",
    "objective_from_values",
    "write_value_csv",
    "MWResult",
    "multiplicative_weights",
    "ChainReport",
    "StationaryResult",
    "induced_chain_check",
    "stationary_distribution",
]
