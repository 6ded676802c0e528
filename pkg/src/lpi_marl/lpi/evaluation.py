"""Policy evaluation subroutines and their registry.

An evaluator turns the current joint policy (and, for sample-based
evaluators, the trajectory it generated) into one truncated Q table per
agent. Evaluators are looked up by name so experiment files can select them.

Example:
    ```python
    from lpi_marl.lpi.evaluation import default_registry

    evaluator = default_registry().create("localized-td0", schedule="constant", alpha=0.1)
    tables = evaluator.evaluate(m, zeta, beta=1, trajectory=traj)
    ```
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable, Iterator
from typing import Any

import numpy as np

from lpi_marl.config import DEFAULT_TOL, EXACT_CAP, EvaluatorKind, ScheduleKind, TruncationWeights
from lpi_marl.exceptions import ConfigurationError
from lpi_marl.logging import get_logger
from lpi_marl.lpi.td import (
    StepSchedule,
    localized_td0,
    make_schedule,
    mixing_estimate,
    visitation_frequencies,
)
from lpi_marl.lpi.trajectory import TrajectoryRecord
from lpi_marl.lpi.truncated import TruncatedQ, truncate_q
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy
from lpi_marl.solver.exact import local_qs

logger = get_logger(__name__)


class PolicyEvaluation(ABC):
    """Abstract base class for policy evaluation subroutines.

    Implementations document the exactness they claim: a table family is
    ``(sigma, nu', mu)``-exact when, for every ``sigma``-regular policy, the
    error of the truncated tables decays like ``c / (beta + 1)^mu``.
    """

    name: str = ""
    needs_trajectory: bool = True

    @abstractmethod
    def evaluate(
        self,
        m: FactoredMDP,
        zeta: JointPolicy,
        beta: int,
        trajectory: TrajectoryRecord | None = None,
    ) -> list[TruncatedQ]:
        """Evaluate ``zeta`` into one ``beta``-hop table per agent.

        Args:
            m: The model
            zeta: Policy being evaluated
            beta: Radius of the returned tables
            trajectory: Samples generated by ``zeta`` (sample-based evaluators)

        Returns:
            Truncated Q tables ordered by agent
        """
        ...

    @abstractmethod
    def describe(self) -> dict[str, Any]:
        """Settings of the evaluator for manifests."""
        ...


class LocalizedTD0Evaluator(PolicyEvaluation):
    """beta-hop localized TD(0) on the shared trajectory.

    Claims exactness with ``mu`` matching the decay of the Q interaction
    matrix once the induced chain mixes; the constant depends on the
    visitation floor ``xi`` of the trajectory.
    """

    name = EvaluatorKind.LOCALIZED_TD0.value
    needs_trajectory = True

    def __init__(self, schedule: ScheduleKind | str = ScheduleKind.CONSTANT, **params: Any) -> None:
        self.kind = ScheduleKind.from_string(schedule)
        self.xi = params.pop("xi", None)
        self.report_mixing = bool(params.pop("report_mixing", False))
        self.last_mixing: list[float] = []
        self.params = params
        if self.kind is not ScheduleKind.POLYNOMIAL or "H" in params or self.xi is not None:
            # Validate now when the schedule does not depend on the trajectory
            make_schedule(self.kind, params, 0.5, self.xi)

    def schedule(self, m: FactoredMDP, trajectory: TrajectoryRecord) -> StepSchedule:
        """Step schedule for one evaluation.

        The polynomial kind without ``H`` or ``xi`` uses the smallest visited
        frequency of any agent's cells as its ``xi`` estimate.
        """
        xi = self.xi
        if self.kind is ScheduleKind.POLYNOMIAL and xi is None and "H" not in self.params:
            xi = _min_cell_frequency(trajectory)
        return make_schedule(self.kind, self.params, m.gamma, xi)

    def evaluate(
        self,
        m: FactoredMDP,
        zeta: JointPolicy,
        beta: int,
        trajectory: TrajectoryRecord | None = None,
    ) -> list[TruncatedQ]:
        if trajectory is None:
            raise ConfigurationError("Localized TD(0) needs a trajectory", field="eval_kind")
        schedule = self.schedule(m, trajectory)
        if self.report_mixing:
            self.last_mixing = [mixing_estimate(trajectory, i) for i in range(m.n)]
            logger.info(
                "Mixing estimate per agent: " + ", ".join(f"{t:.3g}" for t in self.last_mixing)
            )
        return [
            localized_td0(
                trajectory, zeta[i], beta, m.gamma, m.tau, m.n, schedule, m.default_state
            )
            for i in range(m.n)
        ]

    def describe(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "schedule": self.kind.value, **self.params}
        if self.xi is not None:
            out["xi"] = self.xi
        if self.report_mixing:
            out["report_mixing"] = True
        return out


class ExactOracleEvaluator(PolicyEvaluation):
    """Exact local Q tables, truncated to ``beta`` hops.

    Exact for every ``beta`` at least the graph diameter; below that the
    error is bounded by the tail sums of the Q interaction matrix.
    """

    name = EvaluatorKind.EXACT_ORACLE.value
    needs_trajectory = False

    def __init__(
        self,
        weights: TruncationWeights | str = TruncationWeights.DEFAULT,
        tol: float = DEFAULT_TOL,
        cap: int = EXACT_CAP,
    ) -> None:
        self.weights = TruncationWeights.from_string(weights)
        if not tol > 0:
            raise ConfigurationError(f"tol must be positive, got {tol}", field="tol")
        self.tol = float(tol)
        self.cap = int(cap)

    def evaluate(
        self,
        m: FactoredMDP,
        zeta: JointPolicy,
        beta: int,
        trajectory: TrajectoryRecord | None = None,
    ) -> list[TruncatedQ]:
        return [truncate_q(m, q, beta, self.weights) for q in local_qs(m, zeta, self.tol, self.cap)]

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "weights": self.weights.value, "tol": self.tol, "cap": self.cap}


EvaluatorFactory = Callable[..., PolicyEvaluation]


class EvaluatorRegistry:
    """Registry of policy evaluation factories addressed by name.

    Example:
        ```python
        registry = EvaluatorRegistry()
        registry.register("exact-oracle", ExactOracleEvaluator)
        evaluator = registry.create("exact-oracle", weights="uniform")
        ```
    """

    def __init__(self) -> None:
        """Initialize an empty registry."""
        self._factories: dict[str, EvaluatorFactory] = {}

    def register(self, name: str, factory: EvaluatorFactory) -> EvaluatorRegistry:
        """Add a factory to the registry.

        Returns:
            Self for method chaining

        Raises:
            ConfigurationError: If the name is already taken
        """
        if name in self._factories:
            raise ConfigurationError(f"Evaluator '{name}' already exists in registry")
        self._factories[name] = factory
        return self

    def create(self, name: str | EvaluatorKind, **params: Any) -> PolicyEvaluation:
        """Build an evaluator by name.

        Raises:
            ConfigurationError: If the name is unknown or the parameters are rejected
        """
        key = name.value if isinstance(name, EvaluatorKind) else str(name)
        if key not in self._factories:
            raise ConfigurationError(
                f"Evaluator '{key}' not found. Valid values: {self.names()}", field="eval_kind"
            )
        try:
            return self._factories[key](**params)
        except TypeError as e:
            raise ConfigurationError(f"Bad parameters for evaluator '{key}': {e}", field="eval_params") from e

    def names(self) -> list[str]:
        """Registered evaluator names."""
        return list(self._factories.keys())

    def __iter__(self) -> Iterator[str]:
        return iter(self._factories)

    def __len__(self) -> int:
        return len(self._factories)

    def __contains__(self, name: object) -> bool:
        return name in self._factories


def default_registry() -> EvaluatorRegistry:
    """Registry with the built-in evaluators."""
    return (
        EvaluatorRegistry()
        .register(LocalizedTD0Evaluator.name, LocalizedTD0Evaluator)
        .register(ExactOracleEvaluator.name, ExactOracleEvaluator)
    )


def create_evaluator(kind: EvaluatorKind | str, params: dict[str, Any] | None = None) -> PolicyEvaluation:
    """Build a built-in evaluator from a config block."""
    evaluator = default_registry().create(EvaluatorKind.from_string(kind), **dict(params or {}))
    logger.debug(f"Evaluator {evaluator.describe()}")
    return evaluator


def _min_cell_frequency(trajectory: TrajectoryRecord) -> float:
    return float(np.min([visitation_frequencies(trajectory, i).min() for i in range(trajectory.n)]))
