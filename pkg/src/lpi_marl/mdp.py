"""Factored networked MDPs.

Each agent ``i`` owns a finite local state space ``S_i`` and action space
``A_i``. Its next local state depends only on the states of its one-hop
neighborhood and its own action, so the global kernel factors as

    P(s' | s, a) = prod_i P_i(s'_i | s_{N_i}, a_i)

and the global reward is the mean of local rewards ``r_i(s_i, a_i)``.

Kernels are dense arrays of shape ``(|S_{N_i}|, |A_i|, |S_i|)`` where the
first axis is the mixed-radix index of the neighborhood state over the sorted
member list. Global states and actions are tuples of local indices; flat
global indices use the same mixed-radix order with agent 0 most significant.

Example:
    ```python
    import numpy as np
    from lpi_marl.graph import graph_from_spec
    from lpi_marl.mdp import AgentSpace, FactoredMDP, UniformInitial, sample_step

    g = graph_from_spec("line", 2)
    coin = np.full((4, 1, 2), 0.5)
    m = FactoredMDP(
        graph=g,
        spaces=(AgentSpace(2, 1), AgentSpace(2, 1)),
        kernels=(coin, coin),
        rewards=(np.zeros((2, 1)), np.ones((2, 1))),
        gamma=0.9,
        tau=0.1,
        rho=UniformInitial((2, 2)),
    )
    s1 = sample_step(m, (0, 0), (0, 0), np.random.default_rng(0))
    ```
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from lpi_marl.config import EXACT_CAP, PROB_TOL, RENORM_TOL
from lpi_marl.exceptions import CapExceededError, ModelError
from lpi_marl.graph import NetworkGraph, graph_from_spec
from lpi_marl.logging import get_logger

logger = get_logger(__name__)

State = tuple[int, ...]
Action = tuple[int, ...]


@dataclass(frozen=True)
class AgentSpace:
    """Finite local state and action space of one agent.

    Attributes:
        state_size: Number of local states (>= 1)
        action_size: Number of local actions (>= 1)
    """

    state_size: int
    action_size: int

    def __post_init__(self) -> None:
        """Validate sizes after initialization."""
        if self.state_size < 1 or self.action_size < 1:
            raise ModelError(
                f"Agent spaces must be non-empty, got {self.state_size} states "
                f"and {self.action_size} actions"
            )


class GlobalIndexCodec:
    """Mixed-radix codec between tuples over an agent subset and flat indices.

    The first coordinate is the most significant digit. An empty subset has a
    single (empty) tuple with index 0.
    """

    def __init__(self, dims: Sequence[int]) -> None:
        self.dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in self.dims):
            raise ModelError(f"Codec dimensions must be positive, got {self.dims}")
        strides = np.ones(len(self.dims), dtype=np.int64)
        for k in range(len(self.dims) - 2, -1, -1):
            strides[k] = strides[k + 1] * self.dims[k + 1]
        self.strides = strides
        self.size = int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1
        self._dims_array = np.asarray(self.dims, dtype=np.int64)

    def encode(self, values: Sequence[int]) -> int:
        """Flat index of one tuple."""
        if len(values) != len(self.dims):
            raise ModelError(f"Tuple {tuple(values)} does not match dimensions {self.dims}")
        index = 0
        for value, dim, stride in zip(values, self.dims, self.strides):
            if not 0 <= value < dim:
                raise ModelError(f"Tuple {tuple(values)} out of range for dimensions {self.dims}")
            index += int(value) * int(stride)
        return index

    def encode_many(self, values: np.ndarray) -> np.ndarray:
        """Flat indices of the rows of an ``(m, k)`` integer array."""
        values = np.asarray(values, dtype=np.int64)
        if not self.dims:
            return np.zeros(values.shape[0], dtype=np.int64)
        return values @ self.strides

    def decode(self, index: int) -> tuple[int, ...]:
        """Tuple with the given flat index."""
        if not 0 <= index < self.size:
            raise ModelError(f"Index {index} outside [0, {self.size})")
        return tuple(int(v) for v in (index // self.strides) % self._dims_array)

    def decode_many(self, indices: np.ndarray) -> np.ndarray:
        """``(m, k)`` tuples for an array of flat indices."""
        indices = np.asarray(indices, dtype=np.int64)
        if not self.dims:
            return np.zeros((indices.shape[0], 0), dtype=np.int64)
        return (indices[:, None] // self.strides[None, :]) % self._dims_array[None, :]

    def all_tuples(self) -> np.ndarray:
        """Every tuple in index order, as a ``(size, k)`` array."""
        return self.decode_many(np.arange(self.size, dtype=np.int64))

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"GlobalIndexCodec(dims={self.dims})"


# ---------------------------------------------------------------------------
# Initial distributions
# ---------------------------------------------------------------------------


class InitialDistribution(ABC):
    """Initial global-state distribution rho."""

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> State:
        """Draw one global state."""
        ...

    @abstractmethod
    def probabilities(self, dims: Sequence[int], cap: int = EXACT_CAP) -> np.ndarray:
        """Dense probability vector over flat global state indices."""
        ...

    @abstractmethod
    def describe(self) -> dict[str, Any]:
        """Plain description for manifests and MDP files."""
        ...

    @staticmethod
    def _check_cap(dims: Sequence[int], cap: int) -> int:
        size = int(np.prod(dims, dtype=np.int64)) if len(dims) else 1
        if size > cap:
            raise CapExceededError("initial distribution states", size, cap)
        return size


class DenseInitial(InitialDistribution):
    """Explicit probability vector over flat global state indices."""

    def __init__(self, dims: Sequence[int], probs: Sequence[float] | np.ndarray) -> None:
        self.codec = GlobalIndexCodec(dims)
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (self.codec.size,):
            raise ModelError(f"rho has {probs.size} entries, expected {self.codec.size}")
        self.probs = _normalized(probs, "rho")
        self._cdf = np.cumsum(self.probs)

    def sample(self, rng: np.random.Generator) -> State:
        index = int(np.searchsorted(self._cdf, rng.random(), side="right"))
        return self.codec.decode(min(index, self.codec.size - 1))

    def probabilities(self, dims: Sequence[int], cap: int = EXACT_CAP) -> np.ndarray:
        self._check_cap(dims, cap)
        return self.probs.copy()

    def describe(self) -> dict[str, Any]:
        return {"kind": "dense", "probs": self.probs.tolist()}


class UniformInitial(InitialDistribution):
    """Uniform over all global states."""

    def __init__(self, dims: Sequence[int]) -> None:
        self.dims = tuple(int(d) for d in dims)

    def sample(self, rng: np.random.Generator) -> State:
        return tuple(int(v) for v in rng.integers(0, self.dims))

    def probabilities(self, dims: Sequence[int], cap: int = EXACT_CAP) -> np.ndarray:
        size = self._check_cap(dims, cap)
        return np.full(size, 1.0 / size)

    def describe(self) -> dict[str, Any]:
        return {"kind": "uniform"}


class PointMassInitial(InitialDistribution):
    """All mass on one global state."""

    def __init__(self, state: Sequence[int]) -> None:
        self.state = tuple(int(v) for v in state)

    def sample(self, rng: np.random.Generator) -> State:
        return self.state

    def probabilities(self, dims: Sequence[int], cap: int = EXACT_CAP) -> np.ndarray:
        size = self._check_cap(dims, cap)
        probs = np.zeros(size)
        probs[GlobalIndexCodec(dims).encode(self.state)] = 1.0
        return probs

    def describe(self) -> dict[str, Any]:
        return {"kind": "point", "state": list(self.state)}


class ProductInitial(InitialDistribution):
    """Independent per-agent marginals."""

    def __init__(self, marginals: Sequence[Sequence[float]]) -> None:
        self.marginals = [
            _normalized(np.asarray(p, dtype=float), f"rho marginal {i}")
            for i, p in enumerate(marginals)
        ]

    def sample(self, rng: np.random.Generator) -> State:
        draws = rng.random(len(self.marginals))
        return tuple(
            min(int(np.searchsorted(np.cumsum(p), u, side="right")), p.size - 1)
            for p, u in zip(self.marginals, draws)
        )

    def probabilities(self, dims: Sequence[int], cap: int = EXACT_CAP) -> np.ndarray:
        self._check_cap(dims, cap)
        probs = np.ones(1)
        for p in self.marginals:
            probs = np.outer(probs, p).ravel()
        return probs

    def describe(self) -> dict[str, Any]:
        return {"kind": "product", "marginals": [p.tolist() for p in self.marginals]}


def initial_from_dict(data: Mapping[str, Any], dims: Sequence[int]) -> InitialDistribution:
    """Build an initial distribution from its ``describe()`` form."""
    kind = str(data.get("kind", "uniform"))
    if kind == "uniform":
        return UniformInitial(dims)
    if kind == "point":
        return PointMassInitial(data["state"])
    if kind == "dense":
        return DenseInitial(dims, data["probs"])
    if kind == "product":
        return ProductInitial(data["marginals"])
    raise ModelError(f"Unknown initial distribution kind '{kind}'")


# ---------------------------------------------------------------------------
# The model
# ---------------------------------------------------------------------------


def _normalized(probs: np.ndarray, what: str, axis: int = -1) -> np.ndarray:
    """Check rows sum to one; renormalize rows that are off by at most RENORM_TOL."""
    if np.any(~np.isfinite(probs)) or np.any(probs < 0):
        raise ModelError(f"{what} has negative or non-finite entries")
    sums = probs.sum(axis=axis, keepdims=True)
    error = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
    if error <= PROB_TOL:
        return probs
    if error <= RENORM_TOL:
        logger.debug(f"Renormalizing {what} (row-sum error {error:.2e})")
        return probs / sums
    raise ModelError(f"{what} rows do not sum to 1 (max error {error:.3e})")


@dataclass(frozen=True, eq=False)
class FactoredMDP:
    """Networked MDP with factored transitions and additive rewards.

    Attributes:
        graph: Interaction graph
        spaces: Per-agent state/action sizes
        kernels: Per-agent arrays ``(|S_{N_i}|, |A_i|, |S_i|)``
        rewards: Per-agent arrays ``(|S_i|, |A_i|)`` with entries in ``[0, r_bar]``
        gamma: Discount factor in (0, 1)
        tau: Entropy weight (``0`` gives the unregularized problem)
        rho: Initial distribution
        default_state: Filler for coordinates outside a neighborhood
        default_action: Filler for actions outside a neighborhood
        r_bar: Reward upper bound; the largest reward when not given
    """

    graph: NetworkGraph
    spaces: tuple[AgentSpace, ...]
    kernels: tuple[np.ndarray, ...]
    rewards: tuple[np.ndarray, ...]
    gamma: float
    tau: float
    rho: InitialDistribution
    default_state: State | None = None
    default_action: Action | None = None
    r_bar: float | None = None
    name: str = field(default="factored-mdp")

    def __post_init__(self) -> None:
        """Validate and normalize tables after initialization."""
        n = self.graph.n
        object.__setattr__(self, "spaces", tuple(self.spaces))
        if len(self.spaces) != n or len(self.kernels) != n or len(self.rewards) != n:
            raise ModelError(f"Expected {n} agent spaces, kernels and reward tables")
        if not 0 < self.gamma < 1:
            raise ModelError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.tau < 0:
            raise ModelError(f"tau must be non-negative, got {self.tau}")

        kernels = []
        for i in range(n):
            expected = (
                self.neighborhood_codec(i).size,
                self.spaces[i].action_size,
                self.spaces[i].state_size,
            )
            kernel = np.array(self.kernels[i], dtype=float)
            if kernel.shape != expected:
                raise ModelError(f"Kernel of agent {i} has shape {kernel.shape}, expected {expected}")
            kernel = _normalized(kernel, f"kernel of agent {i}")
            kernel.setflags(write=False)
            kernels.append(kernel)
        object.__setattr__(self, "kernels", tuple(kernels))

        rewards = []
        for i in range(n):
            expected = (self.spaces[i].state_size, self.spaces[i].action_size)
            reward = np.array(self.rewards[i], dtype=float)
            if reward.shape != expected:
                raise ModelError(f"Rewards of agent {i} have shape {reward.shape}, expected {expected}")
            reward.setflags(write=False)
            rewards.append(reward)
        object.__setattr__(self, "rewards", tuple(rewards))

        largest = max(float(r.max()) for r in rewards)
        smallest = min(float(r.min()) for r in rewards)
        r_bar = largest if self.r_bar is None else float(self.r_bar)
        if smallest < 0 or largest > r_bar + PROB_TOL:
            raise ModelError(f"Rewards must lie in [0, {r_bar}], found [{smallest}, {largest}]")
        object.__setattr__(self, "r_bar", r_bar)

        for attr, dims in (("default_state", self.state_dims), ("default_action", self.action_dims)):
            value = getattr(self, attr)
            value = tuple(0 for _ in dims) if value is None else tuple(int(v) for v in value)
            GlobalIndexCodec(dims).encode(value)
            object.__setattr__(self, attr, value)

        if isinstance(self.rho, DenseInitial) and self.rho.codec.dims != self.state_dims:
            raise ModelError("rho dimensions do not match the state space")

    # -- sizes and codecs ----------------------------------------------------

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def state_dims(self) -> tuple[int, ...]:
        return tuple(sp.state_size for sp in self.spaces)

    @cached_property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(sp.action_size for sp in self.spaces)

    @property
    def a_max(self) -> int:
        """Largest local action space."""
        return max(self.action_dims)

    @cached_property
    def state_codec(self) -> GlobalIndexCodec:
        return GlobalIndexCodec(self.state_dims)

    @cached_property
    def action_codec(self) -> GlobalIndexCodec:
        return GlobalIndexCodec(self.action_dims)

    @property
    def n_states(self) -> int:
        return self.state_codec.size

    @property
    def n_actions(self) -> int:
        return self.action_codec.size

    def subset_codec(self, members: Sequence[int], actions: bool = False) -> GlobalIndexCodec:
        """Codec over the states (or actions) of an agent subset."""
        dims = self.action_dims if actions else self.state_dims
        return GlobalIndexCodec([dims[j] for j in members])

    @cached_property
    def _neighborhood_codecs(self) -> tuple[GlobalIndexCodec, ...]:
        return tuple(
            GlobalIndexCodec([self.spaces[j].state_size for j in self.graph.neighbors(i)])
            for i in range(self.graph.n)
        )

    def neighborhood_codec(self, i: int) -> GlobalIndexCodec:
        """Codec of the one-hop neighborhood state indexing agent ``i``'s kernel."""
        return self._neighborhood_codecs[i]

    def kernel_row(self, i: int, s: Sequence[int], a_i: int) -> np.ndarray:
        """``P_i(. | s_{N_i}, a_i)`` for a global state ``s``."""
        members = self.graph.neighbors(i)
        index = self.neighborhood_codec(i).encode([s[j] for j in members])
        return self.kernels[i][index, a_i]

    def describe(self) -> dict[str, Any]:
        """Manifest entry for the instance."""
        return {
            "name": self.name,
            "n": self.n,
            "state_dims": list(self.state_dims),
            "action_dims": list(self.action_dims),
            "gamma": self.gamma,
            "tau": self.tau,
            "r_bar": self.r_bar,
            "default_state": list(self.default_state or ()),
            "default_action": list(self.default_action or ()),
            "rho": self.rho.describe(),
            "graph": self.graph.describe(),
        }


def _check_global(m: FactoredMDP, values: Sequence[int], actions: bool = False) -> None:
    (m.action_codec if actions else m.state_codec).encode(values)


def global_transition_prob(
    m: FactoredMDP, s: Sequence[int], a: Sequence[int], s_next: Sequence[int]
) -> float:
    """Probability of moving from ``s`` to ``s_next`` under joint action ``a``."""
    _check_global(m, s)
    _check_global(m, a, actions=True)
    _check_global(m, s_next)
    prob = 1.0
    for i in range(m.n):
        prob *= float(m.kernel_row(i, s, a[i])[s_next[i]])
        if prob == 0.0:
            break
    return prob


def sample_step(
    m: FactoredMDP, s: Sequence[int], a: Sequence[int], rng: np.random.Generator
) -> State:
    """Draw the next global state, one uniform per agent in ascending order."""
    draws = rng.random(m.n)
    next_state = []
    for i in range(m.n):
        cdf = np.cumsum(m.kernel_row(i, s, a[i]))
        value = int(np.searchsorted(cdf, draws[i], side="right"))
        next_state.append(min(value, m.spaces[i].state_size - 1))
    return tuple(next_state)


def local_rewards(m: FactoredMDP, s: Sequence[int], a: Sequence[int]) -> np.ndarray:
    """Vector of ``r_i(s_i, a_i)``."""
    return np.array([m.rewards[i][s[i], a[i]] for i in range(m.n)])


def global_reward(m: FactoredMDP, s: Sequence[int], a: Sequence[int]) -> float:
    """Mean of local rewards."""
    _check_global(m, s)
    _check_global(m, a, actions=True)
    return float(local_rewards(m, s, a).mean())


def extend(
    m: FactoredMDP,
    subset: Iterable[int],
    partial: Sequence[int],
    actions: bool = False,
) -> State:
    """Complete a tuple on ``subset`` into a global tuple using the defaults.

    Args:
        m: The model (supplies the default state / action)
        subset: Agents whose coordinates are given, in the order of ``partial``
        partial: Values on ``subset``
        actions: Extend an action tuple instead of a state tuple

    Returns:
        The global tuple
    """
    subset = list(subset)
    if len(subset) != len(partial):
        raise ModelError(f"Partial tuple {tuple(partial)} does not match subset {subset}")
    default = m.default_action if actions else m.default_state
    assert default is not None
    full = list(default)
    dims = m.action_dims if actions else m.state_dims
    for j, value in zip(subset, partial):
        if not 0 <= value < dims[j]:
            raise ModelError(f"Value {value} out of range for agent {j}")
        full[j] = int(value)
    return tuple(full)


def restrict(subset: Iterable[int], values: Sequence[int]) -> tuple[int, ...]:
    """Coordinates of a global tuple on ``subset``."""
    return tuple(int(values[j]) for j in subset)


# ---------------------------------------------------------------------------
# MDP files
# ---------------------------------------------------------------------------


def mdp_from_dict(data: Mapping[str, Any], name: str = "file") -> FactoredMDP:
    """Build an MDP from the nested mapping stored in MDP files."""
    try:
        graph_block = dict(data["graph"])
        graph = graph_from_spec(graph_block["kind"], int(graph_block["n"]), graph_block.get("edges"))
        agents = list(data["agents"])
        spaces = tuple(AgentSpace(int(a["states"]), int(a["actions"])) for a in agents)
        dims = [sp.state_size for sp in spaces]
        return FactoredMDP(
            graph=graph,
            spaces=spaces,
            kernels=tuple(np.asarray(a["kernel"], dtype=float) for a in agents),
            rewards=tuple(np.asarray(a["rewards"], dtype=float) for a in agents),
            gamma=float(data["gamma"]),
            tau=float(data["tau"]),
            rho=initial_from_dict(data.get("rho", {"kind": "uniform"}), dims),
            default_state=data.get("default_state"),
            default_action=data.get("default_action"),
            r_bar=data.get("r_bar"),
            name=name,
        )
    except KeyError as e:
        raise ModelError(f"MDP description is missing key {e}") from e


def mdp_to_dict(m: FactoredMDP, cap: int = EXACT_CAP) -> dict[str, Any]:
    """Nested mapping form of an MDP, inverse of ``mdp_from_dict``."""
    rho = m.rho.describe()
    if rho["kind"] not in {"uniform", "point", "dense", "product"}:
        rho = {"kind": "dense", "probs": m.rho.probabilities(m.state_dims, cap).tolist()}
    return {
        "gamma": m.gamma,
        "tau": m.tau,
        "r_bar": m.r_bar,
        "graph": {"kind": "edges", **m.graph.describe()},
        "agents": [
            {
                "states": m.spaces[i].state_size,
                "actions": m.spaces[i].action_size,
                "rewards": m.rewards[i].tolist(),
                "kernel": m.kernels[i].tolist(),
            }
            for i in range(m.n)
        ],
        "rho": rho,
        "default_state": list(m.default_state or ()),
        "default_action": list(m.default_action or ()),
    }


def load_mdp(path: str | Path) -> FactoredMDP:
    """Load an MDP from a YAML file."""
    path = Path(path)
    try:
        with path.open() as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ModelError(f"Cannot read MDP file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ModelError(f"{path} does not contain an MDP mapping")
    return mdp_from_dict(data, name=path.stem)


def dump_mdp(m: FactoredMDP, path: str | Path) -> None:
    """Write an MDP as YAML."""
    with Path(path).open("w") as f:
        yaml.safe_dump(mdp_to_dict(m), f, sort_keys=False)
