"""Interaction-strength matrices.

Every entry is an exhaustive supremum: the tensor of the object being
measured is reshaped so the perturbed agent's coordinate comes first, and the
largest difference between two of its values is taken over every context.
The number of (context, value, value) tuples enumerated per entry is capped.

Example:
    ```python
    from lpi_marl.analysis import c_matrix, decay_check

    C = c_matrix(mdp)
    print(C.entries.sum(axis=1).max())
    print(decay_check(C, mu=1.0).nu)
    ```
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from lpi_marl.config import DIAGNOSTIC_CAP
from lpi_marl.exceptions import CapExceededError, ModelError
from lpi_marl.graph import NetworkGraph
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy
from lpi_marl.solver.exact import QTable


class InteractionKind(Enum):
    """What an interaction matrix measures."""

    C = "C"
    POLICY = "policy"
    Q = "q"
    SECOND_ORDER = "second-order"


@dataclass
class InteractionMatrix:
    """Nonnegative ``n x n`` matrix tied to a graph.

    Attributes:
        entries: ``(n, n)`` array
        kind: What the entries measure
        graph: Graph whose distances weight the decay sums
    """

    entries: np.ndarray
    kind: InteractionKind
    graph: NetworkGraph

    def __post_init__(self) -> None:
        """Validate the entries after initialization."""
        entries = np.asarray(self.entries, dtype=float)
        n = self.graph.n
        if entries.shape != (n, n):
            raise ModelError(f"Interaction matrix has shape {entries.shape}, expected ({n}, {n})")
        if np.any(entries < 0):
            raise ModelError("Interaction matrix entries must be nonnegative")
        self.entries = entries

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def dist(self) -> np.ndarray:
        return self.graph.dist

    @property
    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)


def _guard(values: int, contexts: int, cap: int, what: str) -> None:
    size = contexts * values * values
    if size > cap:
        raise CapExceededError(what, size, cap)


def _max_tv(block: np.ndarray) -> float:
    """Largest TV between two slices along axis 0 of a ``(values, contexts, outcomes)`` block."""
    if block.shape[0] < 2:
        return 0.0
    diff = np.abs(block[:, None] - block[None, :]).sum(axis=-1)
    return 0.5 * float(diff.max())


def _max_spread(block: np.ndarray) -> float:
    """Largest absolute difference along axis 0 of a ``(values, contexts)`` block."""
    if block.shape[0] < 2:
        return 0.0
    return float(np.ptp(block, axis=0).max())


def c_matrix(m: FactoredMDP, cap: int = DIAGNOSTIC_CAP) -> InteractionMatrix:
    """Transition-kernel sensitivity matrix.

    ``C_ij`` is the largest TV between agent ``i``'s next-state laws when
    neighbor ``j``'s state changes (own action held fixed), and ``C_ii`` the
    largest TV when agent ``i``'s own state and action both change. Entries
    for non-neighbors are zero.

    Raises:
        CapExceededError: If an entry needs more than ``cap`` comparisons
    """
    n = m.n
    entries = np.zeros((n, n))
    for i in range(n):
        members = list(m.graph.neighbors(i))
        dims = tuple(m.state_dims[j] for j in members)
        size_a = m.action_dims[i]
        size_s = m.state_dims[i]
        tensor = m.kernels[i].reshape(dims + (size_a, size_s))
        action_axis = len(members)
        for pos, j in enumerate(members):
            if j == i:
                moved = np.moveaxis(tensor, (pos, action_axis), (0, 1))
                values = dims[pos] * size_a
            else:
                moved = np.moveaxis(tensor, pos, 0)
                values = dims[pos]
            block = moved.reshape(values, -1, size_s)
            _guard(values, block.shape[1], cap, f"C[{i},{j}] perturbations")
            entries[i, j] = _max_tv(block)
    return InteractionMatrix(entries, InteractionKind.C, m.graph)


def policy_interaction(
    zeta: JointPolicy, graph: NetworkGraph, cap: int = DIAGNOSTIC_CAP
) -> InteractionMatrix:
    """Policy sensitivity matrix ``Z^zeta``.

    ``Z_ij`` is the largest TV between agent ``i``'s action laws at two global
    states differing only in agent ``j``'s coordinate. Agents a policy does
    not observe contribute exact zeros.
    """
    n = zeta.n
    entries = np.zeros((n, n))
    for part in zeta.parts:
        i = part.agent
        tensor = part.table.reshape(part.state_dims + (part.action_size,))
        for pos, j in enumerate(part.members):
            values = part.state_dims[pos]
            block = np.moveaxis(tensor, pos, 0).reshape(values, -1, part.action_size)
            _guard(values, block.shape[1], cap, f"Z[{i},{j}] perturbations")
            entries[i, j] = _max_tv(block)
    return InteractionMatrix(entries, InteractionKind.POLICY, graph)


def _pair_block(tensor: np.ndarray, n: int, j: int) -> np.ndarray:
    """``(|S_j| |A_j|, contexts)`` view of a state-action tensor around agent ``j``."""
    moved = np.moveaxis(tensor, (j, n + j), (0, 1))
    values = moved.shape[0] * moved.shape[1]
    return moved.reshape(values, -1)


def q_interaction(
    qs: Sequence[QTable], graph: NetworkGraph, cap: int = DIAGNOSTIC_CAP
) -> InteractionMatrix:
    """Q sensitivity matrix ``Z^Q`` of local Q tables.

    ``Z_ij`` is the largest change of ``Q_i`` when agent ``j``'s state and
    action change together, everything else fixed.
    """
    n = graph.n
    if len(qs) != n:
        raise ModelError(f"Expected {n} local Q tables, got {len(qs)}")
    entries = np.zeros((n, n))
    for i, q in enumerate(qs):
        tensor = q.tensor()
        for j in range(n):
            block = _pair_block(tensor, n, j)
            _guard(block.shape[0], block.shape[1], cap, f"Z^Q[{i},{j}] perturbations")
            entries[i, j] = _max_spread(block)
    return InteractionMatrix(entries, InteractionKind.Q, graph)


def second_order_interaction(
    q: QTable, graph: NetworkGraph, cap: int = DIAGNOSTIC_CAP
) -> InteractionMatrix:
    """Second-order interaction matrix ``H^Q`` of a global Q table.

    ``H_ij`` is the largest mixed difference
    ``[Q(z_i, z_j) - Q(z_i', z_j)] - [Q(z_i, z_j') - Q(z_i', z_j')]`` with
    ``z = (s, a)`` and all other coordinates fixed. The diagonal is zero.
    """
    n = graph.n
    tensor = q.tensor()
    entries = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            moved = np.moveaxis(tensor, (i, n + i, j, n + j), (0, 1, 2, 3))
            vi = moved.shape[0] * moved.shape[1]
            vj = moved.shape[2] * moved.shape[3]
            block = moved.reshape(vi, vj, -1)
            size = block.shape[2] * vi * vi * vj * vj
            if size > cap:
                raise CapExceededError(f"H[{i},{j}] perturbations", size, cap)
            first = block[:, None] - block[None, :]
            entries[i, j] = entries[j, i] = float(np.ptp(first, axis=2).max())
    return InteractionMatrix(entries, InteractionKind.SECOND_ORDER, graph)
