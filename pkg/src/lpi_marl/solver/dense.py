"""Enumerated dynamics shared by the exact solvers.

Global kernels are never materialized as ``(|S|, |A|, |S|)`` arrays. Each
agent keeps a tensor ``K_i[s, a_i, s'_i]`` and expectations of a value table
over the next state are contracted one agent at a time.
"""

from __future__ import annotations

from collections.abc import Sequence
from functools import lru_cache

import numpy as np
from scipy.special import entr

from lpi_marl.config import EXACT_CAP
from lpi_marl.exceptions import CapExceededError
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy

# Upper bound on intermediate tensor entries per contraction chunk.
_CHUNK_ENTRIES = 2**22


class DenseModel:
    """Fully enumerated view of a small ``FactoredMDP``.

    Attributes:
        mdp: The underlying model
        states: ``(|S|, n)`` every global state in index order
        actions: ``(|A|, n)`` every global action in index order
        kernels: Per-agent ``(|S|, |A_i|, |S_i|)`` local transition tensors
        local_rewards: Per-agent ``(|S|, |A_i|)`` reward of own action at each state
    """

    def __init__(self, mdp: FactoredMDP, cap: int = EXACT_CAP) -> None:
        size = mdp.n_states * mdp.n_actions
        if size > cap:
            raise CapExceededError("global state-action pairs", size, cap)
        self.mdp = mdp
        self.cap = cap
        self.states = mdp.state_codec.all_tuples()
        self.actions = mdp.action_codec.all_tuples()
        self.kernels: list[np.ndarray] = []
        self.local_rewards: list[np.ndarray] = []
        for i in range(mdp.n):
            members = list(mdp.graph.neighbors(i))
            rows = mdp.neighborhood_codec(i).encode_many(self.states[:, members])
            self.kernels.append(mdp.kernels[i][rows])
            self.local_rewards.append(mdp.rewards[i][self.states[:, i]])
        for arr in (*self.kernels, *self.local_rewards):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.mdp.n

    @property
    def n_states(self) -> int:
        return int(self.states.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.actions.shape[0])

    @property
    def state_dims(self) -> tuple[int, ...]:
        return self.mdp.state_dims

    @property
    def action_dims(self) -> tuple[int, ...]:
        return self.mdp.action_dims

    # -- rewards ---------------------------------------------------------------

    def local_reward_table(self, i: int) -> np.ndarray:
        """``(|S|, |A|)`` table of ``r_i(s_i, a_i)``."""
        return self.local_rewards[i][:, self.actions[:, i]]

    def reward_table(self) -> np.ndarray:
        """``(|S|, |A|)`` global reward (mean of local rewards)."""
        total = np.zeros((self.n_states, self.n_actions))
        for i in range(self.n):
            total += self.local_reward_table(i)
        return total / self.n

    # -- policies --------------------------------------------------------------

    def policy_rows(self, zeta: JointPolicy) -> list[np.ndarray]:
        """Per-agent ``(|S|, |A_i|)`` action distributions at every state."""
        return zeta.global_tables(self.states)

    def joint_policy_table(self, rows: Sequence[np.ndarray]) -> np.ndarray:
        """``(|S|, |A|)`` joint probabilities ``prod_i zeta_i(a_i | s)``."""
        joint = np.ones((self.n_states, 1))
        for row in rows:
            joint = (joint[:, :, None] * row[:, None, :]).reshape(self.n_states, -1)
        return joint

    def marginal_kernels(self, rows: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Per-agent ``(|S|, |S_i|)`` next-state laws with the action averaged out."""
        return [np.einsum("ba,bas->bs", row, k) for row, k in zip(rows, self.kernels)]

    def policy_reward(self, rows: Sequence[np.ndarray], agent: int | None = None) -> np.ndarray:
        """Expected entropy-regularized reward at each state.

        With ``agent`` set this is the local version
        ``E r_i + n tau H(zeta_i(. | s))``; otherwise the global
        ``mean_i E r_i + tau sum_i H(zeta_i(. | s))``.
        """
        tau = self.mdp.tau
        if agent is not None:
            row = rows[agent]
            expected = (row * self.local_rewards[agent]).sum(axis=1)
            return expected + self.n * tau * entr(row).sum(axis=1)
        total = np.zeros(self.n_states)
        for i, row in enumerate(rows):
            total += (row * self.local_rewards[i]).sum(axis=1) / self.n
            total += tau * entr(row).sum(axis=1)
        return total

    # -- expectations over the next state ----------------------------------------

    def _chunk(self, per_state: int) -> int:
        return max(1, _CHUNK_ENTRIES // max(per_state, 1))

    def expected_next(self, values: np.ndarray) -> np.ndarray:
        """``(|S|, |A|)`` table of ``E[V(s') | s, a]``."""
        dims_s = self.state_dims
        dims_a = self.action_dims
        per_state = max(
            int(np.prod(dims_a[: i + 1])) * int(np.prod(dims_s[i + 1 :])) for i in range(self.n)
        )
        chunk = self._chunk(per_state)
        out = np.empty((self.n_states, self.n_actions))
        for lo in range(0, self.n_states, chunk):
            hi = min(lo + chunk, self.n_states)
            batch = hi - lo
            tensor = np.broadcast_to(
                values.reshape(1, 1, dims_s[0], -1), (batch, 1, dims_s[0], values.size // dims_s[0])
            )
            for i in range(self.n):
                step = np.einsum("bas,bpsr->bpar", self.kernels[i][lo:hi], tensor, optimize=True)
                if i + 1 < self.n:
                    tensor = step.reshape(batch, -1, dims_s[i + 1], step.shape[-1] // dims_s[i + 1])
                else:
                    tensor = step
            out[lo:hi] = tensor.reshape(batch, self.n_actions)
        return out

    def expected_next_under(self, marginals: Sequence[np.ndarray], values: np.ndarray) -> np.ndarray:
        """``(|S|,)`` vector of ``E[V(s')]`` when ``s'_i ~ marginals[i][s]`` independently."""
        dims_s = self.state_dims
        chunk = self._chunk(self.n_states)
        out = np.empty(self.n_states)
        for lo in range(0, self.n_states, chunk):
            hi = min(lo + chunk, self.n_states)
            batch = hi - lo
            tensor = np.broadcast_to(
                values.reshape(1, dims_s[0], -1), (batch, dims_s[0], values.size // dims_s[0])
            )
            for i in range(self.n):
                step = np.einsum("bs,bsr->br", marginals[i][lo:hi], tensor, optimize=True)
                if i + 1 < self.n:
                    tensor = step.reshape(batch, dims_s[i + 1], -1)
                else:
                    tensor = step
            out[lo:hi] = tensor.reshape(batch)
        return out

    def state_transition_matrix(self, marginals: Sequence[np.ndarray]) -> np.ndarray:
        """Dense ``(|S|, |S|)`` chain induced by per-agent marginal kernels.

        Raises:
            CapExceededError: If ``|S|^2`` exceeds the model cap
        """
        size = self.n_states * self.n_states
        if size > self.cap:
            raise CapExceededError("induced chain entries", size, self.cap)
        matrix = np.ones((self.n_states, 1))
        for marginal in marginals:
            matrix = (matrix[:, :, None] * marginal[:, None, :]).reshape(self.n_states, -1)
        return matrix


@lru_cache(maxsize=8)
def dense_model(mdp: FactoredMDP, cap: int = EXACT_CAP) -> DenseModel:
    """Cached ``DenseModel`` for ``mdp``.

    Raises:
        CapExceededError: If ``|S| * |A|`` exceeds ``cap``
    """
    return DenseModel(mdp, cap)
