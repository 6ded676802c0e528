"""Trajectory collection and Monte Carlo returns.

A single global trajectory is simulated and every agent's ``beta``-hop view
is sliced out of it, so overlapping views always agree. Model and policy are
packed into padded arrays first so the sequential loop can be compiled.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from lpi_marl.exceptions import ModelError
from lpi_marl.lpi._accel import jit
from lpi_marl.mdp import FactoredMDP, GlobalIndexCodec
from lpi_marl.policy import JointPolicy

# Discounted weight below which the return horizon is cut.
HORIZON_WEIGHT = 1e-4


def _pad_members(groups: Sequence[tuple[int, ...]], dims: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(g) for g in groups)
    members = np.zeros((len(groups), width), dtype=np.int64)
    strides = np.zeros((len(groups), width), dtype=np.int64)
    for i, group in enumerate(groups):
        codec = GlobalIndexCodec([dims[j] for j in group])
        members[i, : len(group)] = group
        strides[i, : len(group)] = codec.strides
    return members, strides


@dataclass
class RolloutTables:
    """Padded arrays describing a model and a policy.

    Attributes:
        state_sizes: ``(n,)`` local state sizes
        action_sizes: ``(n,)`` local action sizes
        policy_cdf: ``(n, rows, A_max)`` cumulative policy rows
        policy_log: ``(n, rows, A_max)`` log-probabilities
        policy_members: ``(n, k)`` observed agents, with matching ``policy_strides``
        kernel_cdf: ``(n, rows, A_max, S_max)`` cumulative transition rows
        kernel_members: ``(n, k)`` neighbors, with matching ``kernel_strides``
        rewards: ``(n, S_max, A_max)`` local rewards
    """

    state_sizes: np.ndarray
    action_sizes: np.ndarray
    policy_cdf: np.ndarray
    policy_log: np.ndarray
    policy_members: np.ndarray
    policy_strides: np.ndarray
    kernel_cdf: np.ndarray
    kernel_members: np.ndarray
    kernel_strides: np.ndarray
    rewards: np.ndarray

    @classmethod
    def build(cls, m: FactoredMDP, zeta: JointPolicy) -> RolloutTables:
        n = m.n
        s_max, a_max = max(m.state_dims), m.a_max
        p_rows = max(p.table.shape[0] for p in zeta.parts)
        policy_cdf = np.ones((n, p_rows, a_max))
        policy_log = np.zeros((n, p_rows, a_max))
        for i, part in enumerate(zeta.parts):
            rows, size = part.table.shape
            policy_cdf[i, :rows, :size] = np.cumsum(part.table, axis=1)
            with np.errstate(divide="ignore"):
                policy_log[i, :rows, :size] = np.log(part.table)
        k_rows = max(k.shape[0] for k in m.kernels)
        kernel_cdf = np.ones((n, k_rows, a_max, s_max))
        rewards = np.zeros((n, s_max, a_max))
        for i, kernel in enumerate(m.kernels):
            rows, size_a, size_s = kernel.shape
            kernel_cdf[i, :rows, :size_a, :size_s] = np.cumsum(kernel, axis=2)
            rewards[i, :size_s, :size_a] = m.rewards[i]
        p_members, p_strides = _pad_members([p.members for p in zeta.parts], m.state_dims)
        k_members, k_strides = _pad_members([m.graph.neighbors(i) for i in range(n)], m.state_dims)
        return cls(
            state_sizes=np.asarray(m.state_dims, dtype=np.int64),
            action_sizes=np.asarray(m.action_dims, dtype=np.int64),
            policy_cdf=policy_cdf,
            policy_log=policy_log,
            policy_members=p_members,
            policy_strides=p_strides,
            kernel_cdf=kernel_cdf,
            kernel_members=k_members,
            kernel_strides=k_strides,
            rewards=rewards,
        )


@jit
def _draw(cdf: np.ndarray, u: float, size: int) -> int:
    value = 0
    while value < size - 1 and u >= cdf[value]:
        value += 1
    return value


@jit
def _simulate(
    s0: np.ndarray,
    u_action: np.ndarray,
    u_state: np.ndarray,
    state_sizes: np.ndarray,
    action_sizes: np.ndarray,
    policy_cdf: np.ndarray,
    policy_members: np.ndarray,
    policy_strides: np.ndarray,
    kernel_cdf: np.ndarray,
    kernel_members: np.ndarray,
    kernel_strides: np.ndarray,
    rewards: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    T, n = u_action.shape
    states = np.zeros((T, n), dtype=np.int64)
    actions = np.zeros((T, n), dtype=np.int64)
    rew = np.zeros((T, n))
    current = s0.copy()
    for t in range(T):
        states[t] = current
        for i in range(n):
            row = 0
            for k in range(policy_members.shape[1]):
                row += current[policy_members[i, k]] * policy_strides[i, k]
            actions[t, i] = _draw(policy_cdf[i, row], u_action[t, i], action_sizes[i])
            rew[t, i] = rewards[i, current[i], actions[t, i]]
        nxt = np.zeros(n, dtype=np.int64)
        for i in range(n):
            row = 0
            for k in range(kernel_members.shape[1]):
                row += current[kernel_members[i, k]] * kernel_strides[i, k]
            nxt[i] = _draw(kernel_cdf[i, row, actions[t, i]], u_state[t, i], state_sizes[i])
        current = nxt
    return states, actions, rew


@dataclass
class TrajectoryRecord:
    """One global trajectory and the agents' ``beta``-hop views of it.

    Attributes:
        states: ``(T, n)`` global states ``s(0..T-1)``
        actions: ``(T, n)`` global actions
        rewards: ``(T, n)`` local rewards ``r_i(s_i(t), a_i(t))``
        beta: Radius of the per-agent views
        members: Per agent, the sorted ``beta``-hop neighborhood
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    beta: int
    members: list[tuple[int, ...]]
    state_dims: tuple[int, ...] = field(default=())
    action_dims: tuple[int, ...] = field(default=())
    dist: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.states.shape[0])

    @property
    def n(self) -> int:
        return int(self.states.shape[1])

    def view(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Agent ``i``'s neighborhood states ``(T, k)``, actions ``(T, k)`` and rewards ``(T,)``."""
        cols = list(self.members[i])
        return self.states[:, cols], self.actions[:, cols], self.rewards[:, i]

    def neighborhood(self, i: int, radius: int | None = None) -> tuple[int, ...]:
        """Agent ``i``'s recorded members within ``radius`` (the record radius by default)."""
        if radius is None or radius == self.beta:
            return self.members[i]
        if radius > self.beta or self.dist is None:
            raise ModelError(f"Trajectory recorded with radius {self.beta} has no radius-{radius} view")
        return tuple(j for j in self.members[i] if self.dist[i, j] <= radius)

    def codecs(self, i: int, radius: int | None = None) -> tuple[GlobalIndexCodec, GlobalIndexCodec]:
        """State and action codecs of agent ``i``'s cells."""
        cols = self.neighborhood(i, radius)
        return (
            GlobalIndexCodec([self.state_dims[j] for j in cols]),
            GlobalIndexCodec([self.action_dims[j] for j in cols]),
        )

    def cells(self, i: int, radius: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Flat neighborhood state and action indices of agent ``i`` at every step."""
        cols = list(self.neighborhood(i, radius))
        s_codec, a_codec = self.codecs(i, radius)
        return s_codec.encode_many(self.states[:, cols]), a_codec.encode_many(self.actions[:, cols])


def collect_trajectory(
    m: FactoredMDP,
    zeta: JointPolicy,
    T: int,
    rng: np.random.Generator,
    beta: int = 0,
) -> TrajectoryRecord:
    """Simulate ``T`` steps from ``s(0) ~ rho`` under ``zeta``.

    Randomness is drawn in a fixed order: the initial state, then a ``(T, n)``
    block of action uniforms, then a ``(T, n)`` block of transition uniforms.
    """
    if T < 1:
        raise ModelError(f"Trajectory length must be at least 1, got {T}")
    s0 = np.asarray(m.rho.sample(rng), dtype=np.int64)
    u_action = rng.random((T, m.n))
    u_state = rng.random((T, m.n))
    tables = RolloutTables.build(m, zeta)
    states, actions, rewards = _simulate(
        s0,
        u_action,
        u_state,
        tables.state_sizes,
        tables.action_sizes,
        tables.policy_cdf,
        tables.policy_members,
        tables.policy_strides,
        tables.kernel_cdf,
        tables.kernel_members,
        tables.kernel_strides,
        tables.rewards,
    )
    return TrajectoryRecord(
        states=states,
        actions=actions,
        rewards=rewards,
        beta=beta,
        members=[m.graph.neighborhood(i, beta).members for i in range(m.n)],
        state_dims=m.state_dims,
        action_dims=m.action_dims,
        dist=m.graph.dist,
    )


def return_horizon(gamma: float, weight: float = HORIZON_WEIGHT) -> int:
    """Steps after which the discount factor falls below ``weight``."""
    return int(math.ceil(math.log(weight) / math.log(gamma)))


def _batch_draw(cdf: np.ndarray, u: np.ndarray, size: int) -> np.ndarray:
    return np.minimum((u[:, None] >= cdf).sum(axis=1), size - 1)


def estimate_regularized_return(
    m: FactoredMDP,
    zeta: JointPolicy,
    episodes: int,
    rng: np.random.Generator,
    horizon: int | None = None,
) -> float:
    """Monte Carlo estimate of ``E sum_t gamma^t (r(s, a) - tau log zeta(a | s))``.

    All episodes are simulated together, one vectorized step at a time.
    """
    horizon = return_horizon(m.gamma) if horizon is None else horizon
    tables = RolloutTables.build(m, zeta)
    n = m.n
    states = np.array([m.rho.sample(rng) for _ in range(episodes)], dtype=np.int64).reshape(episodes, n)
    total = np.zeros(episodes)
    discount = 1.0
    for _ in range(horizon):
        u_action = rng.random((episodes, n))
        u_state = rng.random((episodes, n))
        actions = np.zeros((episodes, n), dtype=np.int64)
        stage = np.zeros(episodes)
        for i in range(n):
            rows = (states[:, tables.policy_members[i]] * tables.policy_strides[i]).sum(axis=1)
            actions[:, i] = _batch_draw(tables.policy_cdf[i, rows], u_action[:, i], m.action_dims[i])
            stage += tables.rewards[i, states[:, i], actions[:, i]] / n
            stage -= m.tau * tables.policy_log[i, rows, actions[:, i]]
        nxt = np.zeros_like(states)
        for i in range(n):
            rows = (states[:, tables.kernel_members[i]] * tables.kernel_strides[i]).sum(axis=1)
            cdf = tables.kernel_cdf[i, rows, actions[:, i]]
            nxt[:, i] = _batch_draw(cdf, u_state[:, i], m.state_dims[i])
        total += discount * stage
        discount *= m.gamma
        states = nxt
    return float(total.mean())
