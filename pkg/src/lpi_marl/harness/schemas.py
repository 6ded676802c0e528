"""Pydantic schemas of experiment files.

Unknown keys are rejected everywhere so a typo never silently falls back to
a default.
"""

from __future__ import annotations

import itertools
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from lpi_marl.config import (
    DEFAULT_TOL,
    DIAGNOSTIC_CAP,
    EXACT_CAP,
    IMPROVEMENT_CAP,
    MW_BUDGET,
    EvaluatorKind,
    ExactSettings,
    LPIConfig,
)
from lpi_marl.graph import GraphKind


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# =============================================================================
# Blocks
# =============================================================================


class EnvironmentBlock(_Strict):
    """Which environment to build and its discount / entropy weight."""

    name: Literal["spreading", "random", "file"] = "spreading"
    params: dict[str, Any] = Field(default_factory=dict)
    gamma: float = Field(default=0.95, gt=0.0, lt=1.0)
    tau: float = Field(default=0.05, gt=0.0)
    rho: dict[str, Any] | None = None


class GraphBlock(_Strict):
    """Interaction graph; ``n`` falls back to the environment parameters."""

    kind: str = "line"
    n: int | None = Field(default=None, ge=1)
    edges: list[tuple[int, int]] | None = None

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, value: str) -> str:
        valid = [k.value for k in GraphKind]
        if value not in valid:
            raise ValueError(f"unknown graph kind '{value}', valid values: {valid}")
        return value


class LPIBlock(_Strict):
    """Hyper-parameters forwarded to ``LPIConfig``."""

    kappa: int = Field(default=1, ge=0)
    beta: int | None = Field(default=None, ge=0)
    eta: float = Field(default=0.05, gt=0.0)
    p_max: int = Field(default=10, ge=0)
    M: int = Field(default=50, ge=0)
    T: int = Field(default=2000, ge=1)
    eval_kind: str = EvaluatorKind.LOCALIZED_TD0.value
    eval_params: dict[str, Any] = Field(default_factory=lambda: {"schedule": "constant", "alpha": 0.1})
    mc_episodes: int = Field(default=32, ge=1)
    improvement_cap: int = Field(default=IMPROVEMENT_CAP, ge=1)

    @field_validator("eval_kind")
    @classmethod
    def _known_evaluator(cls, value: str) -> str:
        valid = [k.value for k in EvaluatorKind]
        if value not in valid:
            raise ValueError(f"unknown evaluator '{value}', valid values: {valid}")
        return value


class ExactBlock(_Strict):
    """Settings of the enumerating solvers."""

    tol: float = Field(default=DEFAULT_TOL, gt=0.0)
    cap: int = Field(default=EXACT_CAP, ge=1)
    mw_budget: int = Field(default=MW_BUDGET, ge=1)

    def settings(self) -> ExactSettings:
        return ExactSettings(tol=self.tol, cap=self.cap, mw_budget=self.mw_budget)


class DiagnosticsBlock(_Strict):
    """Settings of ``diagnose``."""

    cap: int = Field(default=DIAGNOSTIC_CAP, ge=1)
    mu: float = Field(default=1.0, ge=0.0)
    policy: Literal["uniform", "optimal"] = "uniform"
    truncation_weights: Literal["default", "uniform"] = "default"


class SweepBlock(_Strict):
    """Grid of runs; empty lists fall back to the single configured value."""

    kappas: list[int] = Field(default_factory=list)
    beta_equals_kappa: bool = True
    taus: list[float] = Field(default_factory=list)
    ns: list[int] = Field(default_factory=list)
    seeds: list[int] = Field(default_factory=lambda: [0])
    workers: int = Field(default=0, ge=0)

    @field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("at least one seed is required")
        if len(set(value)) != len(value):
            raise ValueError(f"seeds must be distinct, got {value}")
        return value


class OutputBlock(_Strict):
    """Where results go and whether exact metrics are computed."""

    directory: str | None = None
    oracle: bool = True


# =============================================================================
# Experiment
# =============================================================================


class SweepPoint(BaseModel):
    """One run of a sweep."""

    model_config = ConfigDict(frozen=True)

    kappa: int
    beta: int
    tau: float
    n: int | None
    seed: int

    @property
    def group(self) -> tuple[int, int, float, int | None]:
        """Coordinates shared by all seeds of a sweep point."""
        return (self.kappa, self.beta, self.tau, self.n)

    def tag(self, with_seed: bool = True) -> str:
        """File-name fragment naming the point."""
        n = "file" if self.n is None else str(self.n)
        text = f"k{self.kappa}_b{self.beta}_tau{self.tau:g}_n{n}"
        return f"{text}_seed{self.seed}" if with_seed else text


class ExperimentConfig(_Strict):
    """A complete experiment file."""

    name: str = "experiment"
    environment: EnvironmentBlock = Field(default_factory=EnvironmentBlock)
    graph: GraphBlock = Field(default_factory=GraphBlock)
    lpi: LPIBlock = Field(default_factory=LPIBlock)
    exact: ExactBlock = Field(default_factory=ExactBlock)
    diagnostics: DiagnosticsBlock = Field(default_factory=DiagnosticsBlock)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _consistent(self) -> ExperimentConfig:
        if self.graph.kind == "edges" and self.graph.edges is None:
            raise ValueError("graph kind 'edges' needs an edge list")
        if self.environment.name == "file" and "path" not in self.environment.params:
            raise ValueError("the file environment needs params.path")
        return self

    @property
    def base_n(self) -> int | None:
        """Agent count when no ``n`` sweep is given (``None`` for file environments)."""
        if self.environment.name == "file":
            return None
        if self.graph.n is not None:
            return self.graph.n
        return int(self.environment.params.get("n", 8 if self.environment.name == "spreading" else 2))

    def points(self) -> list[SweepPoint]:
        """Every sweep point in deterministic order (seed varies fastest)."""
        kappas = self.sweep.kappas or [self.lpi.kappa]
        taus = self.sweep.taus or [self.environment.tau]
        ns: list[int | None] = list(self.sweep.ns) or [self.base_n]
        points = []
        for n, tau, kappa, seed in itertools.product(ns, taus, kappas, self.sweep.seeds):
            if self.sweep.beta_equals_kappa and self.sweep.kappas:
                beta = kappa
            else:
                beta = kappa if self.lpi.beta is None else self.lpi.beta
            points.append(SweepPoint(kappa=kappa, beta=beta, tau=tau, n=n, seed=seed))
        return points

    def lpi_config(self, point: SweepPoint) -> LPIConfig:
        """Library configuration of one run."""
        return LPIConfig(
            kappa=point.kappa,
            beta=point.beta,
            eta=self.lpi.eta,
            p_max=self.lpi.p_max,
            M=self.lpi.M,
            T=self.lpi.T,
            seed=point.seed,
            tau=point.tau,
            eval_kind=self.lpi.eval_kind,
            eval_params=dict(self.lpi.eval_params),
            mc_episodes=self.lpi.mc_episodes,
            exact_metrics=self.output.oracle,
            improvement_cap=self.lpi.improvement_cap,
            exact=self.exact.settings(),
        )
