"""Undirected interaction graphs and hop neighborhoods.

Agents are dense integer ids ``0..n-1``. All-pairs hop distances are computed
once at construction (breadth-first search per node via networkx) and the
graph is immutable afterwards, so a single instance can be shared by every
worker of a sweep.

Example:
    ```python
    from lpi_marl.graph import build_graph, f_kappa, neighborhood

    g = build_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    neighborhood(g, 2, 1).members   # (1, 2, 3)
    f_kappa(g, 1)                   # 3
    ```
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import networkx as nx
import numpy as np

from lpi_marl.exceptions import ConfigurationError, ModelError

UNREACHABLE = -1


class GraphKind(Enum):
    """Graph families addressable from experiment configs."""

    LINE = "line"
    CYCLE = "cycle"
    STAR = "star"
    EDGES = "edges"

    @classmethod
    def from_string(cls, value: str) -> GraphKind:
        """Parse graph kind from string."""
        value = value.lower().strip()
        try:
            return cls(value)
        except ValueError:
            valid = [k.value for k in cls]
            raise ConfigurationError(f"Invalid graph kind '{value}'. Valid kinds: {valid}") from None


@dataclass(frozen=True)
class Neighborhood:
    """Agents within ``radius`` hops of ``center``.

    Attributes:
        center: The agent the neighborhood is centered on
        radius: Hop radius
        members: Sorted member ids, always containing ``center``
    """

    center: int
    radius: int
    members: tuple[int, ...]

    def __contains__(self, agent: object) -> bool:
        return agent in self.members

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def position(self, agent: int) -> int:
        """Index of ``agent`` inside ``members``."""
        return self.members.index(agent)

    def complement(self, n: int) -> tuple[int, ...]:
        """Agents outside the neighborhood."""
        inside = set(self.members)
        return tuple(j for j in range(n) if j not in inside)


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Connected undirected graph with precomputed hop distances.

    Attributes:
        n: Number of agents
        edges: Normalized edges ``(i, j)`` with ``i < j``
        dist: ``(n, n)`` integer hop-distance table
    """

    n: int
    edges: frozenset[tuple[int, int]]
    dist: np.ndarray = field(repr=False)

    @cached_property
    def diameter(self) -> int:
        """Largest hop distance between two agents."""
        return int(self.dist.max())

    @cached_property
    def _neighborhoods(self) -> dict[tuple[int, int], Neighborhood]:
        return {}

    def neighborhood(self, i: int, radius: int) -> Neighborhood:
        """Cached ``radius``-hop neighborhood of agent ``i``."""
        key = (i, min(radius, self.diameter))
        cached = self._neighborhoods.get(key)
        if cached is None:
            members = tuple(int(j) for j in np.flatnonzero(self.dist[i] <= key[1]))
            cached = Neighborhood(center=i, radius=key[1], members=members)
            self._neighborhoods[key] = cached
        if cached.radius == radius:
            return cached
        return Neighborhood(center=i, radius=radius, members=cached.members)

    def neighbors(self, i: int) -> tuple[int, ...]:
        """One-hop neighborhood of ``i`` (including ``i``)."""
        return self.neighborhood(i, 1).members

    def to_networkx(self) -> nx.Graph:
        """Equivalent networkx graph."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(sorted(self.edges))
        return graph

    def describe(self) -> dict[str, object]:
        """Plain description for manifests."""
        return {"n": self.n, "edges": [list(e) for e in sorted(self.edges)]}


def build_graph(n: int, edges: Iterable[Sequence[int]]) -> NetworkGraph:
    """Build a connected graph and its all-pairs hop distances.

    Args:
        n: Number of agents
        edges: Unordered agent pairs

    Returns:
        The immutable graph

    Raises:
        ModelError: On out-of-range endpoints, self-loops, duplicate edges
            or a disconnected graph
    """
    if n < 1:
        raise ModelError(f"Graph needs at least one agent, got n={n}")

    normalized: set[tuple[int, int]] = set()
    for edge in edges:
        if len(edge) != 2:
            raise ModelError(f"Edge {tuple(edge)} must have exactly two endpoints")
        i, j = int(edge[0]), int(edge[1])
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"Edge ({i}, {j}) has an endpoint outside [0, {n})")
        if i == j:
            raise ModelError(f"Self-loop on agent {i}")
        pair = (min(i, j), max(i, j))
        if pair in normalized:
            raise ModelError(f"Duplicate edge {pair}")
        normalized.add(pair)

    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(normalized)
    if not nx.is_connected(graph):
        components = [sorted(c) for c in nx.connected_components(graph)]
        raise ModelError(f"Graph is disconnected; components: {components}")

    dist = np.full((n, n), UNREACHABLE, dtype=np.int64)
    for source, lengths in nx.all_pairs_shortest_path_length(graph):
        for target, length in lengths.items():
            dist[source, target] = length

    dist.setflags(write=False)
    return NetworkGraph(n=n, edges=frozenset(normalized), dist=dist)


def neighborhood(g: NetworkGraph, i: int, radius: int) -> Neighborhood:
    """The ``radius``-hop neighborhood of agent ``i``.

    Raises:
        ModelError: If ``i`` is out of range or ``radius`` is negative
    """
    if not 0 <= i < g.n:
        raise ModelError(f"Agent {i} outside [0, {g.n})")
    if radius < 0:
        raise ModelError(f"Radius must be non-negative, got {radius}")
    return g.neighborhood(i, radius)


def f_kappa(g: NetworkGraph, radius: int) -> int:
    """Size of the largest ``radius``-hop neighborhood."""
    if radius < 0:
        raise ModelError(f"Radius must be non-negative, got {radius}")
    return max(len(g.neighborhood(i, radius)) for i in range(g.n))


def diameter(g: NetworkGraph) -> int:
    """Largest hop distance in ``g``."""
    return g.diameter


def line_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def cycle_edges(n: int) -> list[tuple[int, int]]:
    if n < 3:
        return line_edges(n)
    return line_edges(n) + [(n - 1, 0)]


def star_edges(n: int) -> list[tuple[int, int]]:
    return [(0, j) for j in range(1, n)]


def graph_from_spec(
    kind: str | GraphKind,
    n: int,
    edges: Iterable[Sequence[int]] | None = None,
) -> NetworkGraph:
    """Build a graph from a config description.

    Args:
        kind: ``line``, ``cycle``, ``star`` or ``edges``
        n: Number of agents
        edges: Explicit edge list, required for ``edges``

    Returns:
        The graph
    """
    kind = GraphKind.from_string(kind) if isinstance(kind, str) else kind
    if kind is GraphKind.EDGES:
        if edges is None:
            raise ConfigurationError("Graph kind 'edges' requires an edge list", field="edges")
        return build_graph(n, edges)
    if edges is not None:
        raise ConfigurationError(f"Graph kind '{kind.value}' does not take an edge list")
    builders = {
        GraphKind.LINE: line_edges,
        GraphKind.CYCLE: cycle_edges,
        GraphKind.STAR: star_edges,
    }
    return build_graph(n, builders[kind](n))
