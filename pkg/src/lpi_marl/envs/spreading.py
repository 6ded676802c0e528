"""Spreading process on a network.

Each agent's local state packs two binary flags, ``s1`` (reached by the
spreading process) and ``s2`` (protected), into the index ``2 * s1 + s2``.
Its binary action asks for protection.

Transitions pass through intermediate flags:

- ``s1`` becomes a candidate when the agent or any neighbor has ``s1 = 1``,
  and a candidate stays reached with probability ``1 - p1``.
- ``s2`` becomes a candidate when already protected, or with probability
  ``p_eff`` when the agent acts; a candidate stays protected with
  probability ``1 - p2``.

Agents are penalized when reached but unprotected, and pay ``c`` for acting.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from lpi_marl.config import EXACT_CAP
from lpi_marl.exceptions import ConfigurationError
from lpi_marl.graph import NetworkGraph, graph_from_spec
from lpi_marl.mdp import (
    AgentSpace,
    FactoredMDP,
    GlobalIndexCodec,
    InitialDistribution,
    State,
    initial_from_dict,
)

LOCAL_STATES = 4
LOCAL_ACTIONS = 2


def local_index(s1: int, s2: int) -> int:
    return 2 * s1 + s2


def flags(index: int) -> tuple[int, int]:
    """``(s1, s2)`` of a local state index."""
    return index // 2, index % 2


@dataclass(frozen=True)
class SpreadingParams:
    """Parameters of the spreading process.

    Attributes:
        n: Number of agents
        p1: Probability that a reached candidate drops back to unreached
        p2: Probability that a protected candidate loses protection
        c: Cost of the protection action
        p_eff: Probability that the protection action takes effect
    """

    n: int = 8
    p1: float = 0.6
    p2: float = 0.7
    c: float = 0.3
    p_eff: float = 0.4

    def __post_init__(self) -> None:
        """Validate parameters after initialization."""
        if self.n < 1:
            raise ConfigurationError(f"n must be positive, got {self.n}", field="n")
        for name in ("p1", "p2", "p_eff"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {value}", field=name)
        if not 0.0 <= self.c <= 1.0:
            raise ConfigurationError(f"c must lie in [0, 1], got {self.c}", field="c")


class SingleSourceInitial(InitialDistribution):
    """One uniformly chosen agent is reached; protection flags are uniform.

    Samples draw the source agent first, then every agent's ``s2``.
    """

    def __init__(self, n: int) -> None:
        self.n = n

    def sample(self, rng: np.random.Generator) -> State:
        source = int(rng.integers(self.n))
        s2 = rng.integers(0, 2, size=self.n)
        return tuple(local_index(int(j == source), int(s2[j])) for j in range(self.n))

    def probabilities(self, dims: Sequence[int], cap: int = EXACT_CAP) -> np.ndarray:
        size = self._check_cap(dims, cap)
        codec = GlobalIndexCodec(dims)
        probs = np.zeros(size)
        weight = 1.0 / (self.n * 2**self.n)
        for source in range(self.n):
            for s2 in itertools.product((0, 1), repeat=self.n):
                state = [local_index(int(j == source), s2[j]) for j in range(self.n)]
                probs[codec.encode(state)] += weight
        return probs

    def describe(self) -> dict[str, Any]:
        return {"kind": "single-source", "n": self.n}


def spreading_kernel(p: SpreadingParams, neighbors: Sequence[int], i: int) -> np.ndarray:
    """``(4^|N_i|, 2, 4)`` kernel of agent ``i`` with one-hop members ``neighbors``."""
    members = list(neighbors)
    codec = GlobalIndexCodec([LOCAL_STATES] * len(members))
    own = members.index(i)
    tuples = codec.all_tuples()
    reached = (tuples // 2).max(axis=1) > 0
    protected = tuples[:, own] % 2 == 1

    kernel = np.zeros((codec.size, LOCAL_ACTIONS, LOCAL_STATES))
    p_s1 = np.where(reached, 1.0 - p.p1, 0.0)
    for a in range(LOCAL_ACTIONS):
        candidate = np.where(protected, 1.0, p.p_eff if a == 1 else 0.0)
        p_s2 = candidate * (1.0 - p.p2)
        for s1, s2 in itertools.product((0, 1), repeat=2):
            first = p_s1 if s1 else 1.0 - p_s1
            second = p_s2 if s2 else 1.0 - p_s2
            kernel[:, a, local_index(s1, s2)] = first * second
    return kernel


def spreading_rewards(p: SpreadingParams) -> np.ndarray:
    """``(4, 2)`` local rewards ``r_s(s1, s2) + 1 - c a``."""
    rewards = np.zeros((LOCAL_STATES, LOCAL_ACTIONS))
    for index in range(LOCAL_STATES):
        state_reward = 0.0 if flags(index) == (1, 0) else 1.0
        for a in range(LOCAL_ACTIONS):
            rewards[index, a] = state_reward + 1.0 - p.c * a
    return rewards


def _initial(rho: InitialDistribution | Mapping[str, Any] | None, n: int) -> InitialDistribution:
    if rho is None:
        return SingleSourceInitial(n)
    if isinstance(rho, InitialDistribution):
        return rho
    if str(rho.get("kind", "")) == "single-source":
        return SingleSourceInitial(n)
    return initial_from_dict(rho, [LOCAL_STATES] * n)


def spreading_env(
    p: SpreadingParams,
    gamma: float,
    tau: float,
    rho: InitialDistribution | Mapping[str, Any] | None = None,
    graph: NetworkGraph | None = None,
) -> FactoredMDP:
    """Build the spreading process, on a line of ``p.n`` agents by default.

    Missing neighbors at the ends of the line count as unreached.
    """
    graph = graph_from_spec("line", p.n) if graph is None else graph
    if graph.n != p.n:
        raise ConfigurationError(f"Graph has {graph.n} agents, params say {p.n}", field="n")
    rewards = spreading_rewards(p)
    return FactoredMDP(
        graph=graph,
        spaces=tuple(AgentSpace(LOCAL_STATES, LOCAL_ACTIONS) for _ in range(p.n)),
        kernels=tuple(spreading_kernel(p, graph.neighbors(i), i) for i in range(p.n)),
        rewards=tuple(rewards for _ in range(p.n)),
        gamma=gamma,
        tau=tau,
        rho=_initial(rho, p.n),
        r_bar=2.0,
        name=f"spreading-n{p.n}",
    )
