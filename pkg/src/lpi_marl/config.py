"""Configuration management for LPI-MARL."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from lpi_marl.exceptions import ConfigurationError

# Probability rows must sum to one within this tolerance.
PROB_TOL = 1e-12
# Rows off by at most this much are renormalized instead of rejected.
RENORM_TOL = 1e-9

DEFAULT_TOL = 1e-9
EXACT_CAP = 2**20
DIAGNOSTIC_CAP = 2**16
IMPROVEMENT_CAP = 2**16
MW_BUDGET = 10_000


class _NamedEnum(Enum):
    """Enum parsable from its string value."""

    @classmethod
    def from_string(cls, value: str | _NamedEnum) -> Any:
        """Parse an enum member from its string value."""
        if isinstance(value, cls):
            return value
        text = str(value).lower().strip().replace("_", "-")
        try:
            return cls(text)
        except ValueError:
            valid = [m.value for m in cls]
            raise ConfigurationError(
                f"Invalid {cls.__name__} '{value}'. Valid values: {valid}"
            ) from None


class EvaluatorKind(_NamedEnum):
    """Policy evaluation subroutine used inside the LPI loop."""

    LOCALIZED_TD0 = "localized-td0"
    EXACT_ORACLE = "exact-oracle"


class ScheduleKind(_NamedEnum):
    """TD(0) step-size schedule."""

    CONSTANT = "constant"
    ANNEALED = "annealed"
    POLYNOMIAL = "polynomial"


class TruncationWeights(_NamedEnum):
    """Weights used to collapse a full local Q table onto a beta-hop table."""

    DEFAULT = "default"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class ExactSettings:
    """Settings shared by the exact (enumerating) solvers.

    Attributes:
        tol: Certified sup-norm tolerance of value fixed points
        cap: Maximum number of enumerated global state-action pairs
        mw_budget: Multiplicative-weights iterations allowed per Bellman application
    """

    tol: float = DEFAULT_TOL
    cap: int = EXACT_CAP
    mw_budget: int = MW_BUDGET

    def __post_init__(self) -> None:
        """Validate settings after initialization."""
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}", field="tol")
        if self.cap < 1:
            raise ConfigurationError(f"cap must be positive, got {self.cap}", field="cap")
        if self.mw_budget < 1:
            raise ConfigurationError(
                f"mw_budget must be positive, got {self.mw_budget}", field="mw_budget"
            )


@dataclass(frozen=True)
class DiagnosticSettings:
    """Settings for the exhaustive interaction-matrix sups.

    Attributes:
        cap: Maximum enumerated perturbation tuples per matrix entry
    """

    cap: int = DIAGNOSTIC_CAP

    def __post_init__(self) -> None:
        """Validate settings after initialization."""
        if self.cap < 1:
            raise ConfigurationError(f"cap must be positive, got {self.cap}", field="cap")


@dataclass(frozen=True)
class LPIConfig:
    """Hyper-parameters of one Localized Policy Iteration run.

    Attributes:
        kappa: Policy radius
        beta: Evaluation (truncated Q) radius
        eta: Multiplicative-weights step size
        p_max: Inner improvement steps per outer iteration
        M: Outer iterations
        T: Recorded trajectory length per outer iteration
        seed: Generator seed
        tau: Entropy weight; when set it must agree with the MDP
        eval_kind: Policy evaluation subroutine
        eval_params: Schedule / truncation settings forwarded to the evaluator
        mc_episodes: Rollouts used to estimate the regularized return
        exact_metrics: Whether to compute exact J and value gaps when under the cap
        improvement_cap: Cap on the enumerated neighbour action product
        exact: Settings of the exact solver used for exact metrics
    """

    kappa: int = 1
    beta: int = 1
    eta: float = 0.05
    p_max: int = 10
    M: int = 50
    T: int = 2000
    seed: int = 0
    tau: float | None = None
    eval_kind: EvaluatorKind = EvaluatorKind.LOCALIZED_TD0
    eval_params: dict[str, Any] = field(default_factory=dict)
    mc_episodes: int = 32
    exact_metrics: bool = True
    improvement_cap: int = IMPROVEMENT_CAP
    exact: ExactSettings = field(default_factory=ExactSettings)

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        object.__setattr__(self, "eval_kind", EvaluatorKind.from_string(self.eval_kind))
        for name in ("kappa", "beta", "p_max", "M", "seed"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative", field=name)
        if self.T < 1:
            raise ConfigurationError(f"T must be at least 1, got {self.T}", field="T")
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be positive, got {self.eta}", field="eta")
        if self.tau is not None and not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}", field="tau")
        if self.mc_episodes < 1:
            raise ConfigurationError("mc_episodes must be at least 1", field="mc_episodes")

    @property
    def kappa_exceeds_beta(self) -> bool:
        """True when the policy radius is larger than the evaluation radius."""
        return self.kappa > self.beta

    def with_kappa(self, kappa: int, beta: int | None = None) -> LPIConfig:
        """Create a copy with a different policy radius (and optionally beta)."""
        return dataclasses.replace(self, kappa=kappa, beta=kappa if beta is None else beta)

    def with_seed(self, seed: int) -> LPIConfig:
        """Create a copy with a different seed."""
        return dataclasses.replace(self, seed=seed)

    def with_exact_cap(self, cap: int) -> LPIConfig:
        """Create a copy with a different exact-metrics enumeration cap."""
        return dataclasses.replace(self, exact=dataclasses.replace(self.exact, cap=cap))

    def to_dict(self) -> dict[str, Any]:
        """Flatten into plain values for manifests."""
        data = dataclasses.asdict(self)
        data["eval_kind"] = self.eval_kind.value
        return data
