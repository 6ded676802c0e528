"""Exact entropy-regularized dynamic programming on small instances.

Everything here enumerates the global state (and, where needed, action)
space and refuses to run above the configured cap. Fixed points are found by
value iteration stopped once the sup-norm change is at most ``tol * (1 - gamma)``,
which certifies a sup-norm error of at most ``tol``.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import logsumexp, softmax

from lpi_marl.config import DEFAULT_TOL, EXACT_CAP, MW_BUDGET
from lpi_marl.exceptions import ConvergenceError
from lpi_marl.logging import get_logger
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy, centralized_policy
from lpi_marl.solver.dense import DenseModel, dense_model
from lpi_marl.solver.mw import multiplicative_weights

logger = get_logger(__name__)

# Allowed gap between the n = 1 closed form and the iterative solver.
_CLOSED_FORM_TOL = 1e-8


@dataclass
class ValueTable:
    """Values indexed by flat global state.

    Attributes:
        values: ``(|S|,)`` array
        state_dims: Local state sizes
        metadata: Solver details (iterations, certificates, caveats)
    """

    values: np.ndarray
    state_dims: tuple[int, ...]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, index: int) -> float:
        return float(self.values[index])

    def __len__(self) -> int:
        return int(self.values.size)

    def sup_distance(self, other: ValueTable | np.ndarray) -> float:
        """``max_s |V(s) - V'(s)|``."""
        values = other.values if isinstance(other, ValueTable) else other
        return float(np.max(np.abs(self.values - values)))


@dataclass
class QTable:
    """Q values indexed by (flat global state, flat global action).

    Attributes:
        values: ``(|S|, |A|)`` array
        state_dims: Local state sizes
        action_dims: Local action sizes
        agent: Owning agent for local Q tables, ``None`` for the global Q
    """

    values: np.ndarray
    state_dims: tuple[int, ...]
    action_dims: tuple[int, ...]
    agent: int | None = None

    def tensor(self) -> np.ndarray:
        """View with one axis per local state, then one per local action."""
        return self.values.reshape(self.state_dims + self.action_dims)


LocalQTable = QTable


def _value_budget(first_change: float, gamma: float, tol: float) -> int:
    """Iterations after which a gamma-contraction must have met the stop rule."""
    target = tol * (1.0 - gamma)
    if first_change <= target:
        return 1
    return int(math.ceil(math.log(target / first_change) / math.log(gamma))) + 10


def _policy_fixed_point(
    dense: DenseModel,
    marginals: Sequence[np.ndarray],
    reward: np.ndarray,
    gamma: float,
    tol: float,
) -> tuple[np.ndarray, int]:
    """Solve ``V = reward + gamma * E V(s')`` by iteration."""
    values = reward.copy()
    budget = _value_budget(float(np.max(np.abs(reward))), gamma, tol)
    change = float("inf")
    for iteration in range(1, budget + 1):
        updated = reward + gamma * dense.expected_next_under(marginals, values)
        change = float(np.max(np.abs(updated - values)))
        values = updated
        if change <= tol * (1.0 - gamma):
            return values, iteration
    raise ConvergenceError("Policy evaluation did not converge", budget=budget, residual=change)


def policy_value(
    m: FactoredMDP, zeta: JointPolicy, tol: float = DEFAULT_TOL, cap: int = EXACT_CAP
) -> ValueTable:
    """Entropy-regularized value ``V^zeta`` of a joint policy.

    Raises:
        CapExceededError: If ``|S| * |A|`` exceeds ``cap``
    """
    dense = dense_model(m, cap)
    rows = dense.policy_rows(zeta)
    marginals = dense.marginal_kernels(rows)
    values, iterations = _policy_fixed_point(
        dense, marginals, dense.policy_reward(rows), m.gamma, tol
    )
    return ValueTable(values, m.state_dims, {"iterations": iterations, "tol": tol})


def local_policy_value(
    m: FactoredMDP, zeta: JointPolicy, i: int, tol: float = DEFAULT_TOL, cap: int = EXACT_CAP
) -> ValueTable:
    """Local value ``V_i^zeta`` with the ``-n tau log zeta_i`` entropy term."""
    dense = dense_model(m, cap)
    rows = dense.policy_rows(zeta)
    marginals = dense.marginal_kernels(rows)
    values, iterations = _policy_fixed_point(
        dense, marginals, dense.policy_reward(rows, agent=i), m.gamma, tol
    )
    return ValueTable(values, m.state_dims, {"iterations": iterations, "agent": i, "tol": tol})


def local_q(
    m: FactoredMDP, zeta: JointPolicy, i: int, tol: float = DEFAULT_TOL, cap: int = EXACT_CAP
) -> QTable:
    """Local Q table ``Q_i^zeta(s, a) = r_i(s_i, a_i) + gamma E V_i^zeta(s')``."""
    dense = dense_model(m, cap)
    local_v = local_policy_value(m, zeta, i, tol, cap)
    values = dense.local_reward_table(i) + m.gamma * dense.expected_next(local_v.values)
    return QTable(values, m.state_dims, m.action_dims, agent=i)


def local_qs(
    m: FactoredMDP, zeta: JointPolicy, tol: float = DEFAULT_TOL, cap: int = EXACT_CAP
) -> list[QTable]:
    """Local Q tables of every agent."""
    return [local_q(m, zeta, i, tol, cap) for i in range(m.n)]


def global_q(
    m: FactoredMDP, zeta: JointPolicy, tol: float = DEFAULT_TOL, cap: int = EXACT_CAP
) -> QTable:
    """Global Q table, the mean of the local Q tables."""
    tables = local_qs(m, zeta, tol, cap)
    values = np.mean([t.values for t in tables], axis=0)
    return QTable(values, m.state_dims, m.action_dims)


def q_from_value(m: FactoredMDP, values: np.ndarray, cap: int = EXACT_CAP) -> np.ndarray:
    """``(|S|, |A|)`` table ``r(s, a) + gamma E V(s')``."""
    dense = dense_model(m, cap)
    return dense.reward_table() + m.gamma * dense.expected_next(values)


def bellman_optimal_apply(
    m: FactoredMDP,
    V: ValueTable | np.ndarray,
    tol: float = DEFAULT_TOL,
    cap: int = EXACT_CAP,
    mw_budget: int = MW_BUDGET,
    uniqueness: tuple[float, float] | None = None,
) -> tuple[ValueTable, JointPolicy]:
    """Apply the entropy-regularized Bellman optimal operator.

    Each state's maximization over product policies is solved by
    multiplicative weights with ``eta = 1 / tau`` from the uniform start. For
    a single agent the closed form ``tau * logsumexp(Q / tau)`` is returned
    after cross-checking it against the iterative path.

    Args:
        m: The model
        V: Value table to apply the operator to
        tol: TV-change tolerance of the inner solver
        cap: Enumeration cap
        mw_budget: Inner iterations allowed
        uniqueness: Optional ``(mu, nu_prime)`` used to certify that the
            inner maximizer is unique

    Returns:
        The new value table and the per-state maximizing (centralized) policy

    Raises:
        ConvergenceError: If the inner solver exhausts its budget
    """
    values = V.values if isinstance(V, ValueTable) else np.asarray(V, dtype=float)
    dense = dense_model(m, cap)
    q = q_from_value(m, values, cap)
    metadata: dict[str, Any] = {"tol": tol}

    if m.tau == 0:
        best = np.argmax(q, axis=1)
        joint = dense.actions[best]
        tables = [np.eye(m.action_dims[i])[joint[:, i]] for i in range(m.n)]
        metadata["mw_iterations"] = 0
        return ValueTable(q.max(axis=1), m.state_dims, metadata), centralized_policy(m, tables)

    result = multiplicative_weights(
        q.reshape((dense.n_states,) + m.action_dims), m.tau, tol=tol, budget=mw_budget
    )
    new_values = result.values
    tables = result.policies
    metadata["mw_iterations"] = result.iterations
    if result.rates:
        metadata["mw_rate"] = float(np.median(result.rates))

    if m.n == 1:
        closed = m.tau * logsumexp(q / m.tau, axis=1)
        gap = float(np.max(np.abs(closed - new_values)))
        metadata["closed_form_gap"] = gap
        if gap > _CLOSED_FORM_TOL:
            logger.warning(f"Closed-form and iterative Bellman values differ by {gap:.3e}")
        new_values = closed
        tables = [softmax(q / m.tau, axis=1)]

    if uniqueness is not None:
        from lpi_marl.analysis.bounds import mw_uniqueness_holds

        mu, nu_prime = uniqueness
        metadata["certified_unique"] = mw_uniqueness_holds(
            m.tau, mu, nu_prime, m.a_max, m.n
        )
    else:
        metadata["certified_unique"] = None
    if metadata["certified_unique"] is not True and m.n > 1:
        metadata["caveat"] = "maximizer is the multiplicative-weights limit from the uniform start"

    return ValueTable(new_values, m.state_dims, metadata), centralized_policy(m, tables)


def solve_optimal(
    m: FactoredMDP,
    tol: float = DEFAULT_TOL,
    cap: int = EXACT_CAP,
    mw_budget: int = MW_BUDGET,
) -> tuple[ValueTable, JointPolicy]:
    """Optimal value ``V*`` by value iteration, plus the maximizing policy.

    Raises:
        ConvergenceError: If value iteration or an inner solve runs out of budget
    """
    values = np.zeros(m.n_states)
    applied, policy = bellman_optimal_apply(m, values, tol, cap, mw_budget)
    budget = _value_budget(applied.sup_distance(values), m.gamma, tol)
    change = float("inf")
    for iteration in range(1, budget + 1):
        change = applied.sup_distance(values)
        values = applied.values
        if change <= tol * (1.0 - m.gamma):
            applied, policy = bellman_optimal_apply(m, values, tol, cap, mw_budget)
            result = ValueTable(values, m.state_dims, {"iterations": iteration, "tol": tol})
            result.metadata.update({k: v for k, v in applied.metadata.items() if k != "tol"})
            return result, policy
        applied, policy = bellman_optimal_apply(m, values, tol, cap, mw_budget)
        logger.debug(f"Value iteration {iteration}: change {change:.3e}")
    raise ConvergenceError("Value iteration did not converge", budget=budget, residual=change)


def optimal_value(
    m: FactoredMDP,
    tol: float = DEFAULT_TOL,
    cap: int = EXACT_CAP,
    mw_budget: int = MW_BUDGET,
) -> ValueTable:
    """Fixed point of the regularized Bellman optimal operator."""
    return solve_optimal(m, tol, cap, mw_budget)[0]


def exact_policy_iteration(
    m: FactoredMDP,
    zeta0: JointPolicy,
    M: int,
    tol: float = DEFAULT_TOL,
    cap: int = EXACT_CAP,
    mw_budget: int = MW_BUDGET,
    v_star: ValueTable | None = None,
    on_iterate: Callable[[int, JointPolicy, ValueTable], None] | None = None,
) -> tuple[JointPolicy, list[float]]:
    """Exact policy iteration from ``zeta0``.

    Alternates exact evaluation and the Bellman maximizer for ``M`` rounds.
    ``on_iterate(m, zeta_m, V^{zeta_m})`` is called for every iterate,
    including the initial one.

    Returns:
        The final policy and ``[||V^{zeta^m} - V*||_inf for m = 0..M]``
    """
    if v_star is None:
        v_star = optimal_value(m, tol, cap, mw_budget)
    zeta = zeta0
    value = policy_value(m, zeta, tol, cap)
    trace = [value.sup_distance(v_star)]
    if on_iterate is not None:
        on_iterate(0, zeta, value)
    for step in range(M):
        _, zeta = bellman_optimal_apply(m, value, tol, cap, mw_budget)
        value = policy_value(m, zeta, tol, cap)
        trace.append(value.sup_distance(v_star))
        if on_iterate is not None:
            on_iterate(step + 1, zeta, value)
        logger.debug(f"Exact PI round {step + 1}: gap {trace[-1]:.3e}")
    return zeta, trace


def objective(
    m: FactoredMDP, zeta: JointPolicy, tol: float = DEFAULT_TOL, cap: int = EXACT_CAP
) -> float:
    """``J(zeta) = E_{s ~ rho} V^zeta(s)``."""
    return objective_from_values(m, policy_value(m, zeta, tol, cap), cap)


def objective_from_values(m: FactoredMDP, V: ValueTable, cap: int = EXACT_CAP) -> float:
    """``E_{s ~ rho} V(s)`` for an already computed value table."""
    return float(m.rho.probabilities(m.state_dims, cap) @ V.values)


def write_value_csv(V: ValueTable, path: str | Path) -> None:
    """Dump ``state_index,value`` rows."""
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["state_index", "value"])
        for index, value in enumerate(V.values):
            writer.writerow([index, repr(float(value))])
