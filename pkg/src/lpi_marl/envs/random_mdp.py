"""Random factored MDPs with a bounded kernel interaction.

Every local kernel is a mixture

    P_i = lam * D_i(. | s_{N_i}, a_i) + (1 - lam) * q_i

of a random neighbor- and action-dependent kernel ``D_i`` and a fixed random
distribution ``q_i``. The interaction matrix scales with ``lam``, which is
chosen by bisection so that every row sum of ``C`` stays within the budget.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from lpi_marl.analysis.interaction import c_matrix
from lpi_marl.config import DIAGNOSTIC_CAP
from lpi_marl.exceptions import ConfigurationError, ConvergenceError
from lpi_marl.graph import NetworkGraph, graph_from_spec
from lpi_marl.logging import get_logger
from lpi_marl.mdp import AgentSpace, FactoredMDP, UniformInitial

logger = get_logger(__name__)

BISECTION_STEPS = 64


@dataclass(frozen=True)
class RandomMDPParams:
    """Parameters of the random generator.

    Attributes:
        n: Number of agents
        graph: Graph kind (``line``, ``cycle``, ``star`` or ``edges``)
        edges: Explicit edges for the ``edges`` kind
        state_size: Local state count of every agent
        action_size: Local action count of every agent
        epsilon_c: Budget for ``max_i sum_j C_ij``
        r_bar: Rewards are uniform in ``[0, r_bar]``
        gamma: Discount factor
        tau: Entropy weight
        seed: Generator seed
    """

    n: int = 2
    graph: str = "line"
    edges: list[tuple[int, int]] | None = field(default=None)
    state_size: int = 2
    action_size: int = 2
    epsilon_c: float = 0.125
    r_bar: float = 1.0
    gamma: float = 0.5
    tau: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate parameters after initialization."""
        if self.n < 1:
            raise ConfigurationError(f"n must be positive, got {self.n}", field="n")
        if self.state_size < 1 or self.action_size < 1:
            raise ConfigurationError("Local spaces must be non-empty", field="state_size")
        if self.epsilon_c < 0:
            raise ConfigurationError(f"epsilon_c must be non-negative, got {self.epsilon_c}", field="epsilon_c")
        if not self.r_bar > 0:
            raise ConfigurationError(f"r_bar must be positive, got {self.r_bar}", field="r_bar")


def _mixture(
    dependent: Sequence[np.ndarray], base: Sequence[np.ndarray], lam: float
) -> tuple[np.ndarray, ...]:
    return tuple(lam * d + (1.0 - lam) * b[None, None, :] for d, b in zip(dependent, base))


def random_factored_mdp(
    p: RandomMDPParams,
    graph: NetworkGraph | None = None,
    cap: int = DIAGNOSTIC_CAP,
) -> FactoredMDP:
    """Draw a random instance whose kernel interaction meets ``p.epsilon_c``.

    Args:
        p: Generator parameters
        graph: Interaction graph; built from ``p.graph`` when omitted
        cap: Cap of the interaction-matrix checks

    Raises:
        ConvergenceError: If bisection cannot meet the budget
    """
    graph = graph_from_spec(p.graph, p.n, p.edges) if graph is None else graph
    rng = np.random.default_rng(p.seed)
    spaces = tuple(AgentSpace(p.state_size, p.action_size) for _ in range(graph.n))
    dependent = []
    base = []
    for i in range(graph.n):
        rows = p.state_size ** len(graph.neighbors(i))
        dependent.append(rng.dirichlet(np.ones(p.state_size), size=(rows, p.action_size)))
        base.append(rng.dirichlet(np.ones(p.state_size)))
    rewards = tuple(rng.uniform(0.0, p.r_bar, size=(p.state_size, p.action_size)) for _ in range(graph.n))

    def build(lam: float) -> FactoredMDP:
        return FactoredMDP(
            graph=graph,
            spaces=spaces,
            kernels=_mixture(dependent, base, lam),
            rewards=rewards,
            gamma=p.gamma,
            tau=p.tau,
            rho=UniformInitial(tuple(sp.state_size for sp in spaces)),
            r_bar=p.r_bar,
            name=f"random-n{graph.n}-seed{p.seed}",
        )

    def interaction(lam: float) -> float:
        return float(c_matrix(build(lam), cap).row_sums.max())

    if p.epsilon_c == 0:
        lam = 0.0
    elif interaction(1.0) <= p.epsilon_c:
        lam = 1.0
    else:
        lo, hi = 0.0, 1.0
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if interaction(mid) <= p.epsilon_c:
                lo = mid
            else:
                hi = mid
        lam = lo
    m = build(lam)
    achieved = float(c_matrix(m, cap).row_sums.max())
    if achieved > p.epsilon_c:
        raise ConvergenceError(
            f"Kernel interaction {achieved:.6g} exceeds budget {p.epsilon_c}",
            budget=BISECTION_STEPS,
            residual=achieved - p.epsilon_c,
        )
    logger.debug(f"Random MDP seed {p.seed}: lambda={lam:.6g}, max row sum of C={achieved:.6g}")
    return m
