"""Stationary distribution of the chain induced by a policy.

The chain structure (closed classes, transient states, aperiodicity) is read
off the support graph of the induced state transition matrix with networkx.
The distribution itself is found by power iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from lpi_marl.config import DEFAULT_TOL, EXACT_CAP
from lpi_marl.exceptions import ChainStructureError, ConvergenceError
from lpi_marl.logging import get_logger
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy
from lpi_marl.solver.dense import dense_model

logger = get_logger(__name__)


@dataclass
class ChainReport:
    """Structure of an induced state chain.

    Attributes:
        closed_classes: Sorted state lists of every closed communicating class
        transient: States outside every closed class
        aperiodic: Whether every closed class is aperiodic
    """

    closed_classes: list[list[int]]
    transient: list[int]
    aperiodic: bool

    @property
    def irreducible(self) -> bool:
        return len(self.closed_classes) == 1 and not self.transient

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic


@dataclass
class StationaryResult:
    """Stationary law of the induced chain.

    Attributes:
        state: ``(|S|,)`` stationary state distribution
        state_action: ``(|S|, |A|)`` stationary state-action distribution
        cell_marginals: Per agent, ``(|S_{N_i^beta}|, |A_{N_i^beta}|)`` marginals
        xi: Smallest marginal probability over agents and beta-hop cells
        beta: Radius of the marginals
        iterations: Power iterations performed
        report: Chain structure
    """

    state: np.ndarray
    state_action: np.ndarray
    cell_marginals: list[np.ndarray]
    xi: float
    beta: int
    iterations: int
    report: ChainReport


def _transition_matrix(m: FactoredMDP, zeta: JointPolicy, cap: int) -> np.ndarray:
    dense = dense_model(m, cap)
    return dense.state_transition_matrix(dense.marginal_kernels(dense.policy_rows(zeta)))


def _chain_report(matrix: np.ndarray) -> ChainReport:
    graph = nx.from_numpy_array(matrix > 0, create_using=nx.DiGraph)
    closed = sorted(sorted(int(s) for s in c) for c in nx.attracting_components(graph))
    inside = {s for c in closed for s in c}
    transient = [s for s in range(matrix.shape[0]) if s not in inside]
    aperiodic = all(nx.is_aperiodic(graph.subgraph(c)) for c in closed)
    return ChainReport(closed_classes=closed, transient=transient, aperiodic=aperiodic)


def induced_chain_check(
    m: FactoredMDP, zeta: JointPolicy, cap: int = EXACT_CAP
) -> ChainReport:
    """Closed classes, transient states and periodicity of the induced chain."""
    return _chain_report(_transition_matrix(m, zeta, cap))


def _validate(report: ChainReport, allow_transient: bool) -> None:
    if len(report.closed_classes) > 1:
        sizes = [len(c) for c in report.closed_classes]
        raise ChainStructureError(
            f"Induced chain is reducible: {len(sizes)} closed classes of sizes {sizes}",
            states=report.closed_classes[0],
        )
    if report.transient and not allow_transient:
        closed = report.closed_classes[0]
        raise ChainStructureError(
            f"Induced chain is reducible: closed class of {len(closed)} states "
            f"(first {closed[:8]}) with {len(report.transient)} transient states",
            states=closed,
        )
    if not report.aperiodic:
        raise ChainStructureError(
            "Induced chain is periodic", states=report.closed_classes[0]
        )


def cell_marginals(
    m: FactoredMDP, state_action: np.ndarray, beta: int
) -> list[np.ndarray]:
    """Marginals of a global state-action law over each agent's beta-hop cells."""
    n = m.n
    tensor = state_action.reshape(m.state_dims + m.action_dims)
    marginals = []
    for i in range(n):
        members = m.graph.neighborhood(i, beta).members
        keep = set(members) | {n + j for j in members}
        axes = tuple(k for k in range(2 * n) if k not in keep)
        reduced = tensor.sum(axis=axes)
        states = int(np.prod([m.state_dims[j] for j in members]))
        marginals.append(reduced.reshape(states, -1))
    return marginals


def stationary_distribution(
    m: FactoredMDP,
    zeta: JointPolicy,
    beta: int = 0,
    tol: float = DEFAULT_TOL,
    cap: int = EXACT_CAP,
    budget: int = 100_000,
    allow_transient: bool = False,
) -> StationaryResult:
    """Stationary state-action distribution and ``xi(beta)``.

    Args:
        m: The model
        zeta: Policy inducing the chain
        beta: Radius of the cell marginals used for ``xi``
        tol: L1 residual at which power iteration stops
        cap: Enumeration cap (applies to ``|S| * |A|`` and ``|S|^2``)
        budget: Power iterations allowed
        allow_transient: Accept a single aperiodic closed class with
            transient states around it

    Raises:
        ChainStructureError: If the chain is reducible or periodic
        ConvergenceError: If power iteration runs out of budget
    """
    dense = dense_model(m, cap)
    rows = dense.policy_rows(zeta)
    matrix = dense.state_transition_matrix(dense.marginal_kernels(rows))
    report = _chain_report(matrix)
    _validate(report, allow_transient)

    state = np.full(dense.n_states, 1.0 / dense.n_states)
    residual = float("inf")
    for iteration in range(1, budget + 1):
        updated = state @ matrix
        residual = float(np.abs(updated - state).sum())
        state = updated
        if residual <= tol:
            break
    else:
        raise ConvergenceError("Power iteration did not converge", budget=budget, residual=residual)
    state = state / state.sum()

    state_action = state[:, None] * dense.joint_policy_table(rows)
    marginals = cell_marginals(m, state_action, beta)
    xi = min(float(mg.min()) for mg in marginals)
    logger.debug(f"Stationary distribution after {iteration} iterations, xi({beta}) = {xi:.3e}")
    return StationaryResult(
        state=state,
        state_action=state_action,
        cell_marginals=marginals,
        xi=xi,
        beta=beta,
        iterations=iteration,
        report=report,
    )
