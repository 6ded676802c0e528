"""The Localized Policy Iteration outer loop.

Each outer iteration collects one trajectory under the current kappa-hop
policy, evaluates it into beta-hop truncated Q tables and replaces the policy
by the soft improvement of those tables.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from lpi_marl.analysis.bounds import beta_formula, convergence_constants, p_max_lower_bound
from lpi_marl.analysis.interaction import c_matrix
from lpi_marl.config import LPIConfig
from lpi_marl.exceptions import CapExceededError, CertificationError, ConfigurationError, RegularityError
from lpi_marl.graph import f_kappa
from lpi_marl.logging import get_logger
from lpi_marl.lpi.evaluation import PolicyEvaluation, create_evaluator
from lpi_marl.lpi.improvement import soft_policy_improvement
from lpi_marl.lpi.trajectory import collect_trajectory, estimate_regularized_return
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy, sigma_regularity, uniform_policy
from lpi_marl.solver.exact import ValueTable, objective_from_values, optimal_value, policy_value

logger = get_logger(__name__)

METRIC_COLUMNS = ("iteration", "regularized_return", "sigma", "exact_objective", "value_gap")


@dataclass
class IterationMetrics:
    """Measurements of one LPI iterate.

    Attributes:
        iteration: Outer iteration (0 is the initial uniform policy)
        regularized_return: Monte Carlo estimate of the total regularized reward
        sigma: Regularity constant of the iterate (inf if a row has a zero)
        exact_objective: ``J`` of the iterate when the instance is small enough
        value_gap: ``||V - V*||_inf`` when the instance is small enough
        wall_clock: Seconds spent producing the iterate
    """

    iteration: int
    regularized_return: float
    sigma: float
    exact_objective: float | None = None
    value_gap: float | None = None
    wall_clock: float = 0.0

    def as_row(self) -> dict[str, Any]:
        """Values keyed by ``METRIC_COLUMNS``."""
        return {name: getattr(self, name) for name in METRIC_COLUMNS}


@dataclass
class RunMetrics:
    """All measurements of one LPI run, one row per iterate (``M + 1`` rows)."""

    rows: list[IterationMetrics] = field(default_factory=list)
    manifest: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def returns(self) -> np.ndarray:
        return np.array([r.regularized_return for r in self.rows])

    @property
    def final_return(self) -> float:
        return self.rows[-1].regularized_return

    @property
    def has_exact(self) -> bool:
        return any(r.exact_objective is not None for r in self.rows)


def _sigma(zeta: JointPolicy) -> float:
    try:
        return sigma_regularity(zeta)
    except RegularityError:
        return math.inf


def _log_localization_constants(m: FactoredMDP, cfg: LPIConfig, diagnostic_cap: int) -> None:
    """Log the radius and inner-step counts the convergence result asks for.

    The evaluation constant ``c_pe`` cannot be observed, so the constants are
    reported for ``c_pe = nu'``.
    """
    try:
        interaction = float(c_matrix(m, diagnostic_cap).row_sums.max())
        constants = convergence_constants(
            m.tau, m.gamma, float(m.r_bar or 0.0), m.a_max, interaction, m.n
        )
    except (CapExceededError, CertificationError) as e:
        logger.debug(f"Localization constants unavailable: {e}")
        return
    mu, npr = constants.mu, constants.nu_prime
    if not math.isfinite(mu) or mu <= 0 or npr <= 0:
        logger.info(f"Localization constants: mu={mu:.4g} gives no finite radius for tau={m.tau}")
        return
    beta = beta_formula(cfg.kappa, f_kappa(m.graph, cfg.kappa), npr, npr, mu)
    p_min = p_max_lower_bound(cfg.kappa, npr, npr, mu)
    logger.info(
        f"Localization constants: mu={mu:.4g}, sigma bound={constants.sigma:.4g}, "
        f"beta formula={beta:.4g}, p_max lower bound={p_min:.4g}"
    )
    if cfg.p_max < p_min:
        logger.info(f"p_max={cfg.p_max} is below the suggested {math.ceil(p_min)}")


def lpi_run(
    m: FactoredMDP,
    cfg: LPIConfig,
    evaluator: PolicyEvaluation | None = None,
    diagnostic_cap: int | None = None,
) -> tuple[JointPolicy, RunMetrics]:
    """Run Localized Policy Iteration.

    Args:
        m: The model
        cfg: Hyper-parameters; ``cfg.tau`` must match ``m.tau`` when given
        evaluator: Policy evaluation subroutine; built from ``cfg.eval_kind``
            and ``cfg.eval_params`` when omitted
        diagnostic_cap: Cap of the kernel interaction matrix behind the logged
            localization constants (``cfg.improvement_cap`` when omitted)

    Returns:
        The final kappa-hop policy and ``M + 1`` rows of metrics
    """
    if cfg.tau is not None and not math.isclose(cfg.tau, m.tau, rel_tol=0.0, abs_tol=1e-12):
        raise ConfigurationError(f"cfg.tau={cfg.tau} does not match the model's tau={m.tau}", field="tau")
    if cfg.kappa_exceeds_beta:
        logger.warning(
            f"kappa={cfg.kappa} exceeds beta={cfg.beta}; aggregation queries fall outside the tables"
        )
    if evaluator is None:
        evaluator = create_evaluator(cfg.eval_kind, cfg.eval_params)
    if diagnostic_cap is None:
        diagnostic_cap = cfg.improvement_cap
    _log_localization_constants(m, cfg, diagnostic_cap)

    trajectory_seed, return_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    trajectory_rng = np.random.default_rng(trajectory_seed)
    return_rng = np.random.default_rng(return_seed)

    exact = cfg.exact_metrics and m.n_states * m.n_actions <= cfg.exact.cap
    v_star: ValueTable | None = None
    if exact:
        v_star = optimal_value(m, cfg.exact.tol, cfg.exact.cap, cfg.exact.mw_budget)

    def measure(iteration: int, zeta: JointPolicy, elapsed: float) -> IterationMetrics:
        row = IterationMetrics(
            iteration=iteration,
            regularized_return=estimate_regularized_return(m, zeta, cfg.mc_episodes, return_rng),
            sigma=_sigma(zeta),
            wall_clock=elapsed,
        )
        if v_star is not None:
            value = policy_value(m, zeta, cfg.exact.tol, cfg.exact.cap)
            row.exact_objective = objective_from_values(m, value, cfg.exact.cap)
            row.value_gap = value.sup_distance(v_star)
        return row

    logger.info(
        f"LPI on {m.name}: n={m.n}, kappa={cfg.kappa}, beta={cfg.beta}, "
        f"M={cfg.M}, evaluator={evaluator.name}, seed={cfg.seed}"
    )
    zeta = uniform_policy(m, cfg.kappa)
    metrics = RunMetrics(
        manifest={
            "config": cfg.to_dict(),
            "model": m.describe(),
            "evaluator": evaluator.describe(),
            "exact_metrics": exact,
        }
    )
    metrics.rows.append(measure(0, zeta, 0.0))
    for k in range(1, cfg.M + 1):
        start = time.perf_counter()
        trajectory = None
        if evaluator.needs_trajectory:
            trajectory = collect_trajectory(m, zeta, cfg.T, trajectory_rng, beta=cfg.beta)
        tables = evaluator.evaluate(m, zeta, cfg.beta, trajectory)
        zeta = soft_policy_improvement(
            m, tables, cfg.kappa, cfg.eta, m.tau, cfg.p_max, cfg.improvement_cap
        )
        row = measure(k, zeta, time.perf_counter() - start)
        metrics.rows.append(row)
        logger.debug(f"LPI iteration {k}: return {row.regularized_return:.4f}, sigma {row.sigma:.4g}")

    logger.info(f"LPI finished: final return {metrics.final_return:.4f}")
    return zeta, metrics
