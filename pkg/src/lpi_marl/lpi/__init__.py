"""Localized Policy Iteration.

Trajectory collection, truncated Q tables, localized TD(0) evaluation,
multiplicative-weights soft policy improvement and the outer loop.
"""

from lpi_marl.lpi.evaluation import (
    EvaluatorRegistry,
    ExactOracleEvaluator,
    LocalizedTD0Evaluator,
    PolicyEvaluation,
    create_evaluator,
    default_registry,
)
from lpi_marl.lpi.improvement import aggregate_q, soft_policy_improvement
from lpi_marl.lpi.runner import METRIC_COLUMNS, IterationMetrics, RunMetrics, lpi_run
from lpi_marl.lpi.td import (
    StepSchedule,
    integrated_autocorrelation,
    localized_td0,
    make_schedule,
    mixing_estimate,
    visitation_frequencies,
)
from lpi_marl.lpi.trajectory import (
    TrajectoryRecord,
    collect_trajectory,
    estimate_regularized_return,
    return_horizon,
)
from lpi_marl.lpi.truncated import (
    TruncatedQ,
    read_truncated_q,
    truncate_q,
    write_truncated_q,
    zero_truncated_q,
)

__all__ = [
    # Trajectories
    "TrajectoryRecord",
    "collect_trajectory",
    "estimate_regularized_return",
    "return_horizon",
    # Truncated Q tables
    "TruncatedQ",
    "truncate_q",
    "zero_truncated_q",
    "write_truncated_q",
    "read_truncated_q",
    # Evaluation
    "PolicyEvaluation",
    "LocalizedTD0Evaluator",
    "ExactOracleEvaluator",
    "EvaluatorRegistry",
    "default_registry",
    "create_evaluator",
    "StepSchedule",
    "make_schedule",
    "localized_td0",
    "visitation_frequencies",
    "integrated_autocorrelation",
    "mixing_estimate",
    # Improvement and the outer loop
    "aggregate_q",
    "soft_policy_improvement",
    "IterationMetrics",
    "RunMetrics",
    "METRIC_COLUMNS",
    "lpi_run",
]
