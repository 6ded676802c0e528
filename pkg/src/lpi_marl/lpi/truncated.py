"""Truncated local Q tables.

Agent ``i``'s truncated table is indexed by the states and actions of its
``beta``-hop neighborhood only. Exact tables are truncated either at the
default tuple outside the neighborhood or by averaging uniformly over it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from lpi_marl.config import EXACT_CAP, TruncationWeights
from lpi_marl.exceptions import ModelError, SchemaError
from lpi_marl.mdp import FactoredMDP, GlobalIndexCodec
from lpi_marl.solver.dense import dense_model
from lpi_marl.solver.exact import QTable

TRUNCATED_Q_HEADER = "# lpi-truncated-q v1"


@dataclass(frozen=True, eq=False)
class TruncatedQ:
    """Q table of one agent over its ``radius``-hop state-action cells.

    Attributes:
        agent: Agent id
        radius: Hop radius beta
        members: Sorted ids of the neighborhood
        state_dims: Local state sizes of ``members``
        action_dims: Local action sizes of ``members``
        table: ``(|S_{N_i^beta}|, |A_{N_i^beta}|)`` values
    """

    agent: int
    radius: int
    members: tuple[int, ...]
    state_dims: tuple[int, ...]
    action_dims: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        """Validate the table after initialization."""
        table = np.array(self.table, dtype=float)
        expected = (self.state_codec.size, self.action_codec.size)
        if table.shape != expected:
            raise ModelError(
                f"Truncated Q of agent {self.agent} has shape {table.shape}, expected {expected}"
            )
        if not np.all(np.isfinite(table)):
            raise ModelError(f"Truncated Q of agent {self.agent} has non-finite entries")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @cached_property
    def state_codec(self) -> GlobalIndexCodec:
        return GlobalIndexCodec(self.state_dims)

    @cached_property
    def action_codec(self) -> GlobalIndexCodec:
        return GlobalIndexCodec(self.action_dims)

    def lookup(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Values at ``(k, n)`` arrays of global states and actions."""
        members = list(self.members)
        rows = self.state_codec.encode_many(np.asarray(states)[:, members])
        cols = self.action_codec.encode_many(np.asarray(actions)[:, members])
        return self.table[rows, cols]

    def expand(self, m: FactoredMDP, cap: int = EXACT_CAP) -> np.ndarray:
        """``(|S|, |A|)`` table of the truncated values at every global state-action."""
        dense = dense_model(m, cap)
        members = list(self.members)
        rows = self.state_codec.encode_many(dense.states[:, members])
        cols = self.action_codec.encode_many(dense.actions[:, members])
        return self.table[np.ix_(rows, cols)]


def zero_truncated_q(m: FactoredMDP, i: int, radius: int) -> TruncatedQ:
    """All-zero table for agent ``i``."""
    members = m.graph.neighborhood(i, radius).members
    state_dims = tuple(m.state_dims[j] for j in members)
    action_dims = tuple(m.action_dims[j] for j in members)
    shape = (int(np.prod(state_dims)), int(np.prod(action_dims)))
    return TruncatedQ(i, radius, members, state_dims, action_dims, np.zeros(shape))


def truncate_q(
    m: FactoredMDP,
    q: QTable,
    radius: int,
    weights: TruncationWeights | str = TruncationWeights.DEFAULT,
) -> TruncatedQ:
    """Truncate an exact local Q table to its agent's ``radius``-hop cells.

    Args:
        m: The model
        q: Local Q table (must carry its agent id)
        radius: Neighborhood radius beta
        weights: ``default`` evaluates at the default state and action outside
            the neighborhood; ``uniform`` averages over every outside value
    """
    if q.agent is None:
        raise ModelError("Only local Q tables can be truncated")
    weights = TruncationWeights.from_string(weights)
    n = m.n
    members = m.graph.neighborhood(q.agent, radius).members
    tensor = q.tensor()
    if weights is TruncationWeights.DEFAULT:
        assert m.default_state is not None and m.default_action is not None
        index = tuple(
            slice(None) if k % n in members else
            (m.default_state[k] if k < n else m.default_action[k - n])
            for k in range(2 * n)
        )
        reduced = tensor[index]
    else:
        outside = tuple(k for k in range(2 * n) if k % n not in members)
        reduced = tensor.mean(axis=outside) if outside else tensor
    state_dims = tuple(m.state_dims[j] for j in members)
    action_dims = tuple(m.action_dims[j] for j in members)
    table = np.asarray(reduced).reshape(int(np.prod(state_dims)), int(np.prod(action_dims)))
    return TruncatedQ(q.agent, radius, members, state_dims, action_dims, table)


def _csv(values: tuple[int, ...]) -> str:
    return ",".join(map(str, values))


def write_truncated_q(tables: list[TruncatedQ], path: str | Path) -> None:
    """Write truncated tables as flat text.

    One header line per agent, then ``<agent> <state index> <action index> <value>``
    for every cell.
    """
    lines = [TRUNCATED_Q_HEADER]
    for t in tables:
        lines.append(
            f"# agent {t.agent} radius {t.radius} members {_csv(t.members)} "
            f"sizes {_csv(t.state_dims)} actions {_csv(t.action_dims)}"
        )
    for t in tables:
        for s_index, row in enumerate(t.table):
            lines.extend(f"{t.agent} {s_index} {a_index} {float(v)!r}" for a_index, v in enumerate(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_truncated_q(path: str | Path) -> list[TruncatedQ]:
    """Read tables written by ``write_truncated_q``.

    Raises:
        SchemaError: If the file is not a truncated-Q checkpoint
    """
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != TRUNCATED_Q_HEADER:
        raise SchemaError(f"{path} is not a truncated-Q checkpoint")

    headers: dict[int, tuple[int, tuple[int, ...], tuple[int, ...], tuple[int, ...]]] = {}
    cells: dict[int, dict[tuple[int, int], float]] = {}
    for lineno, line in enumerate(text[1:], start=2):
        fields = line.split()
        if not fields:
            continue
        try:
            if fields[0] == "#":
                headers[int(fields[2])] = (
                    int(fields[4]),
                    tuple(int(x) for x in fields[6].split(",")),
                    tuple(int(x) for x in fields[8].split(",")),
                    tuple(int(x) for x in fields[10].split(",")),
                )
            else:
                agent, s_index, a_index = int(fields[0]), int(fields[1]), int(fields[2])
                cells.setdefault(agent, {})[(s_index, a_index)] = float(fields[3])
        except (IndexError, ValueError) as e:
            raise SchemaError(f"{path}:{lineno}: malformed line '{line}'") from e

    tables = []
    for agent in sorted(headers):
        radius, members, state_dims, action_dims = headers[agent]
        shape = (int(np.prod(state_dims)), int(np.prod(action_dims)))
        agent_cells = cells.get(agent, {})
        if len(agent_cells) != shape[0] * shape[1]:
            raise SchemaError(
                f"{path}: agent {agent} has {len(agent_cells)} cells, expected {shape[0] * shape[1]}"
            )
        table = np.zeros(shape)
        try:
            for (s_index, a_index), value in agent_cells.items():
                table[s_index, a_index] = value
        except IndexError as e:
            raise SchemaError(f"{path}: agent {agent} has a cell outside {shape}") from e
        tables.append(TruncatedQ(agent, radius, members, state_dims, action_dims, table))
    return tables
