"""Tabular kappa-hop policies.

Agent ``i``'s policy is a table with one probability row per state of its
``kappa``-hop neighborhood (members sorted ascending, mixed-radix indexed).
A joint policy is the product of the agents' rows; a policy whose radius is
at least the graph diameter is a centralized policy.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import entr

from lpi_marl.config import PROB_TOL, RENORM_TOL
from lpi_marl.exceptions import ModelError, RegularityError, SchemaError
from lpi_marl.mdp import FactoredMDP, GlobalIndexCodec

POLICY_HEADER = "# lpi-policy v1"


@dataclass(frozen=True, eq=False)
class KHopPolicy:
    """One agent's localized policy.

    Attributes:
        agent: Agent id
        radius: Hop radius kappa
        members: Sorted ids of the agents the policy observes
        state_dims: Local state sizes of ``members``
        table: ``(|S_{N_i^kappa}|, |A_i|)`` probability rows
    """

    agent: int
    radius: int
    members: tuple[int, ...]
    state_dims: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        """Validate the table after initialization."""
        table = np.array(self.table, dtype=float)
        if self.agent not in self.members:
            raise ModelError(f"Policy of agent {self.agent} must observe the agent itself")
        if table.ndim != 2 or table.shape[0] != self.codec.size:
            raise ModelError(
                f"Policy table of agent {self.agent} has shape {table.shape}, "
                f"expected ({self.codec.size}, |A_i|)"
            )
        if np.any(table < 0) or np.any(~np.isfinite(table)):
            raise ModelError(f"Policy table of agent {self.agent} has invalid entries")
        error = float(np.max(np.abs(table.sum(axis=1) - 1.0)))
        if error > RENORM_TOL:
            raise ModelError(f"Policy rows of agent {self.agent} do not sum to 1 ({error:.2e})")
        if error > PROB_TOL:
            table = table / table.sum(axis=1, keepdims=True)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @cached_property
    def codec(self) -> GlobalIndexCodec:
        return GlobalIndexCodec(self.state_dims)

    @property
    def action_size(self) -> int:
        return int(self.table.shape[1])

    def row_index(self, s: Sequence[int]) -> int:
        """Row index for a global state."""
        return self.codec.encode([s[j] for j in self.members])

    def row_indices(self, states: np.ndarray) -> np.ndarray:
        """Row indices for an ``(m, n)`` array of global states."""
        return self.codec.encode_many(np.asarray(states)[:, list(self.members)])

    def row(self, s: Sequence[int]) -> np.ndarray:
        """Action distribution at a global state."""
        return self.table[self.row_index(s)]

    def with_table(self, table: np.ndarray) -> KHopPolicy:
        """Create a copy with a different table."""
        return KHopPolicy(self.agent, self.radius, self.members, self.state_dims, table)


@dataclass(frozen=True, eq=False)
class JointPolicy:
    """Product policy made of one ``KHopPolicy`` per agent."""

    parts: tuple[KHopPolicy, ...]

    def __post_init__(self) -> None:
        """Validate agent ordering after initialization."""
        object.__setattr__(self, "parts", tuple(self.parts))
        for i, part in enumerate(self.parts):
            if part.agent != i:
                raise ModelError(f"Policy part {i} belongs to agent {part.agent}")

    @property
    def n(self) -> int:
        return len(self.parts)

    @property
    def radii(self) -> tuple[int, ...]:
        return tuple(p.radius for p in self.parts)

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(p.action_size for p in self.parts)

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter(self.parts)

    def __getitem__(self, i: int) -> KHopPolicy:
        return self.parts[i]

    def rows(self, s: Sequence[int]) -> list[np.ndarray]:
        """Per-agent action distributions at ``s``."""
        return [p.row(s) for p in self.parts]

    def prob(self, s: Sequence[int], a: Sequence[int]) -> float:
        """Joint probability ``prod_i zeta_i(a_i | s)``."""
        return float(np.prod([p.row(s)[a[i]] for i, p in enumerate(self.parts)]))

    def log_prob(self, s: Sequence[int], a: Sequence[int]) -> float:
        """Joint log-probability."""
        return float(sum(np.log(p.row(s)[a[i]]) for i, p in enumerate(self.parts)))

    def global_tables(self, states: np.ndarray) -> list[np.ndarray]:
        """Per-agent ``(m, |A_i|)`` rows at each of the given global states."""
        return [p.table[p.row_indices(states)] for p in self.parts]


def _khop(m: FactoredMDP, i: int, radius: int, table: np.ndarray) -> KHopPolicy:
    members = m.graph.neighborhood(i, radius).members
    return KHopPolicy(
        agent=i,
        radius=radius,
        members=members,
        state_dims=tuple(m.state_dims[j] for j in members),
        table=table,
    )


def uniform_policy(m: FactoredMDP, radius: int) -> JointPolicy:
    """Uniform ``radius``-hop policy for every agent."""
    parts = []
    for i in range(m.n):
        members = m.graph.neighborhood(i, radius).members
        rows = int(np.prod([m.state_dims[j] for j in members]))
        size = m.action_dims[i]
        parts.append(_khop(m, i, radius, np.full((rows, size), 1.0 / size)))
    return JointPolicy(tuple(parts))


def policy_from_tables(m: FactoredMDP, radius: int, tables: Sequence[np.ndarray]) -> JointPolicy:
    """Wrap per-agent row tables indexed by ``radius``-hop neighborhood states."""
    return JointPolicy(tuple(_khop(m, i, radius, np.asarray(t)) for i, t in enumerate(tables)))


def centralized_policy(m: FactoredMDP, tables: Sequence[np.ndarray]) -> JointPolicy:
    """Wrap per-agent ``(|S|, |A_i|)`` tables indexed by global state."""
    return policy_from_tables(m, m.graph.diameter, tables)


def sample_action(zeta: JointPolicy, s: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    """Draw a joint action, one uniform per agent in ascending order."""
    draws = rng.random(zeta.n)
    action = []
    for part, u in zip(zeta.parts, draws):
        cdf = np.cumsum(part.row(s))
        action.append(min(int(np.searchsorted(cdf, u, side="right")), part.action_size - 1))
    return tuple(action)


def truncate_policy(zeta: JointPolicy, radius: int, m: FactoredMDP) -> JointPolicy:
    """Restrict each agent's policy to its ``radius``-hop neighborhood.

    Row ``x`` of agent ``i``'s output is the input row at the global state
    that agrees with ``x`` on the neighborhood and with the default state
    elsewhere.
    """
    parts = []
    for i, source in enumerate(zeta.parts):
        members = m.graph.neighborhood(i, radius).members
        local = m.subset_codec(members).all_tuples()
        states = np.tile(np.asarray(m.default_state, dtype=np.int64), (local.shape[0], 1))
        states[:, list(members)] = local
        parts.append(_khop(m, i, radius, source.table[source.row_indices(states)]))
    return JointPolicy(tuple(parts))


def policy_entropy(row: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy with ``0 log 0 = 0``."""
    return float(entr(np.asarray(row, dtype=float)).sum())


def tv_distance(p: Sequence[float] | np.ndarray, q: Sequence[float] | np.ndarray) -> float:
    """Total variation distance between two distributions."""
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


def row_regularity(rows: np.ndarray) -> float:
    """Largest log-ratio between two entries of the same row.

    Raises:
        RegularityError: If any entry is zero
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if np.any(rows <= 0):
        raise RegularityError("Policy row has a zero entry; not sigma-regular for any finite sigma")
    logs = np.log(rows)
    return float(np.max(logs.max(axis=1) - logs.min(axis=1)))


def sigma_regularity(zeta: JointPolicy) -> float:
    """Smallest sigma for which every row of ``zeta`` is sigma-regular."""
    return max(row_regularity(part.table) for part in zeta.parts)


# ---------------------------------------------------------------------------
# Flat text checkpoints
# ---------------------------------------------------------------------------


def write_policy(zeta: JointPolicy, path: str | Path) -> None:
    """Write a policy as flat text.

    One header line per agent, then one line per row:
    ``<agent> <state index> <p_0> ... <p_{A-1}>``.
    """
    lines = [POLICY_HEADER]
    for part in zeta.parts:
        lines.append(
            f"# agent {part.agent} radius {part.radius} "
            f"members {','.join(map(str, part.members))} "
            f"sizes {','.join(map(str, part.state_dims))} actions {part.action_size}"
        )
    for part in zeta.parts:
        for index, row in enumerate(part.table):
            values = " ".join(repr(float(p)) for p in row)
            lines.append(f"{part.agent} {index} {values}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_policy(path: str | Path) -> JointPolicy:
    """Read a policy written by ``write_policy``.

    Raises:
        SchemaError: If the file is not a policy checkpoint
    """
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != POLICY_HEADER:
        raise SchemaError(f"{path} is not a policy checkpoint")

    headers: dict[int, dict[str, object]] = {}
    rows: dict[int, dict[int, list[float]]] = {}
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        try:
            if fields[0] == "#":
                agent = int(fields[2])
                headers[agent] = {
                    "radius": int(fields[4]),
                    "members": tuple(int(x) for x in fields[6].split(",")),
                    "sizes": tuple(int(x) for x in fields[8].split(",")),
                    "actions": int(fields[10]),
                }
            else:
                rows.setdefault(int(fields[0]), {})[int(fields[1])] = [float(x) for x in fields[2:]]
        except (IndexError, ValueError) as e:
            raise SchemaError(f"{path}:{lineno}: malformed line '{line}'") from e

    parts = []
    for agent in sorted(headers):
        header = headers[agent]
        sizes = header["sizes"]
        assert isinstance(sizes, tuple)
        count = int(np.prod(sizes))
        agent_rows = rows.get(agent, {})
        if sorted(agent_rows) != list(range(count)):
            raise SchemaError(f"{path}: agent {agent} has {len(agent_rows)} rows, expected {count}")
        table = np.array([agent_rows[k] for k in range(count)])
        if table.shape[1] != header["actions"]:
            raise SchemaError(f"{path}: agent {agent} rows do not have {header['actions']} entries")
        parts.append(
            KHopPolicy(
                agent=agent,
                radius=int(header["radius"]),  # type: ignore[call-overload]
                members=header["members"],  # type: ignore[arg-type]
                state_dims=sizes,
                table=table,
            )
        )
    return JointPolicy(tuple(parts))
