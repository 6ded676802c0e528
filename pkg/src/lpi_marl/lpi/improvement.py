"""Soft policy improvement from truncated Q tables.

Agent ``i`` scores its actions with the locally aggregated table

    Q^i(s_K, a_K) = (1 / n) * sum_{j in K} Q_j([extend(s_K)]_{N_j^beta}, [extend(a_K)]_{N_j^beta})

where ``K`` is its kappa-hop neighborhood and ``extend`` fills every slot
outside ``K`` with the default state or action. The kappa-hop policies are
then updated synchronously by multiplicative weights,

    pi_i^{p+1}(a_i | s_K) ∝ pi_i^p(a_i | s_K)^{1 - eta tau} exp(eta E Q^i(s_K, a_K)),

where the expectation is over ``a_j ~ pi_j^p`` for the other members of
``K``, computed exactly by enumeration.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from lpi_marl.config import IMPROVEMENT_CAP
from lpi_marl.exceptions import CapExceededError, ConfigurationError, ModelError
from lpi_marl.logging import get_logger
from lpi_marl.lpi.truncated import TruncatedQ
from lpi_marl.mdp import FactoredMDP, extend
from lpi_marl.policy import JointPolicy, policy_from_tables
from lpi_marl.solver.mw import expected_q_for_agent, mw_step, uniform_log_policy

logger = get_logger(__name__)

# eta * tau may exceed 1 by rounding only.
_ETA_TAU_SLACK = 1e-12


def _check_tables(m: FactoredMDP, tables: Sequence[TruncatedQ]) -> None:
    if len(tables) != m.n:
        raise ModelError(f"Expected {m.n} truncated Q tables, got {len(tables)}")
    for j, table in enumerate(tables):
        if table.agent != j:
            raise ModelError(f"Truncated Q table {j} belongs to agent {table.agent}")


def aggregate_q(
    m: FactoredMDP,
    i: int,
    tables: Sequence[TruncatedQ],
    kappa: int,
    states: Sequence[int],
    actions: Sequence[int],
) -> float:
    """Locally aggregated Q value of agent ``i`` at one neighborhood tuple.

    Args:
        m: The model (supplies defaults and the graph)
        i: Agent whose aggregate is evaluated
        tables: Truncated Q table of every agent
        kappa: Aggregation radius
        states: States of the kappa-hop members of ``i``, in member order
        actions: Actions of the same members (``a_i`` included)

    Returns:
        ``(1 / n) * sum_{j in N_i^kappa} Q_j`` at the default-extended tuples
    """
    _check_tables(m, tables)
    members = m.graph.neighborhood(i, kappa).members
    s = np.asarray([extend(m, members, states)], dtype=np.int64)
    a = np.asarray([extend(m, members, actions, actions=True)], dtype=np.int64)
    total = sum(float(tables[j].lookup(s, a)[0]) for j in members)
    return total / m.n


@dataclass
class _AgentBlock:
    """Precomputed aggregate and neighbor row maps of one agent."""

    members: tuple[int, ...]
    position: int
    aggregate: np.ndarray
    neighbor_rows: dict[int, np.ndarray]


def _aggregate_block(
    m: FactoredMDP, i: int, tables: Sequence[TruncatedQ], kappa: int, cap: int
) -> _AgentBlock:
    members = m.graph.neighborhood(i, kappa).members
    others = [j for j in members if j != i]
    product = int(np.prod([m.action_dims[j] for j in others])) if others else 1
    if product > cap:
        raise CapExceededError(f"Neighbor action product of agent {i}", product, cap)

    local_states = m.subset_codec(members).all_tuples()
    local_actions = m.subset_codec(members, actions=True).all_tuples()
    cols = list(members)
    states = np.tile(np.asarray(m.default_state, dtype=np.int64), (local_states.shape[0], 1))
    states[:, cols] = local_states
    actions = np.tile(np.asarray(m.default_action, dtype=np.int64), (local_actions.shape[0], 1))
    actions[:, cols] = local_actions

    aggregate = np.zeros((states.shape[0], actions.shape[0]))
    for j in members:
        table = tables[j]
        rows = table.state_codec.encode_many(states[:, list(table.members)])
        acts = table.action_codec.encode_many(actions[:, list(table.members)])
        aggregate += table.table[np.ix_(rows, acts)]
    aggregate /= m.n
    shape = (states.shape[0],) + tuple(m.action_dims[j] for j in members)

    neighbor_rows = {}
    for j in others:
        observed = m.graph.neighborhood(j, kappa).members
        neighbor_rows[j] = m.subset_codec(observed).encode_many(states[:, list(observed)])
    return _AgentBlock(members, members.index(i), aggregate.reshape(shape), neighbor_rows)


def soft_policy_improvement(
    m: FactoredMDP,
    tables: Sequence[TruncatedQ],
    kappa: int,
    eta: float,
    tau: float,
    p_max: int,
    cap: int = IMPROVEMENT_CAP,
) -> JointPolicy:
    """Improve the uniform kappa-hop policy for ``p_max`` synchronous steps.

    Args:
        m: The model
        tables: Truncated Q table of every agent
        kappa: Radius of the improved policies
        eta: Step size
        tau: Entropy weight
        p_max: Number of multiplicative-weights steps
        cap: Largest enumerated neighbor action product per agent

    Returns:
        The kappa-hop policy after ``p_max`` steps

    Raises:
        ConfigurationError: If ``eta * tau > 1``
        CapExceededError: If an agent's neighbor action product exceeds ``cap``
    """
    if eta <= 0 or tau <= 0:
        raise ConfigurationError("Soft improvement needs eta > 0 and tau > 0", field="eta")
    if eta * tau > 1.0 + _ETA_TAU_SLACK:
        raise ConfigurationError(f"eta * tau = {eta * tau:.6g} exceeds 1", field="eta")
    if kappa < 0 or p_max < 0:
        raise ConfigurationError("kappa and p_max must be non-negative", field="kappa")
    _check_tables(m, tables)

    blocks = [_aggregate_block(m, i, tables, kappa, cap) for i in range(m.n)]
    log_pis = [
        uniform_log_policy(block.aggregate.shape[0], m.action_dims[i])
        for i, block in enumerate(blocks)
    ]
    for _ in range(p_max):
        policies = [np.exp(lp) for lp in log_pis]
        updated = []
        for i, block in enumerate(blocks):
            member_policies = [
                np.ones((block.aggregate.shape[0], m.action_dims[j]))
                if j == i
                else policies[j][block.neighbor_rows[j]]
                for j in block.members
            ]
            expected = expected_q_for_agent(block.aggregate, member_policies, block.position)
            updated.append(mw_step(log_pis[i], expected, eta, tau))
        log_pis = updated

    probabilities = []
    for lp in log_pis:
        table = np.exp(lp)
        probabilities.append(table / table.sum(axis=1, keepdims=True))
    logger.debug(f"Soft improvement: kappa={kappa}, {p_max} steps, eta*tau={eta * tau:.4g}")
    return policy_from_tables(m, kappa, probabilities)
