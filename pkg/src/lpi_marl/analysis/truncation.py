"""Empirical checks of truncation and performance-difference bounds.

Both checks compare an exactly computed left-hand side with a bound whose
constants are certified from interaction matrices of the same instance.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from lpi_marl.analysis.bounds import performance_difference_bound
from lpi_marl.analysis.decay import decay_check, tail_sums
from lpi_marl.analysis.interaction import policy_interaction, q_interaction
from lpi_marl.config import DEFAULT_TOL, DIAGNOSTIC_CAP, EXACT_CAP
from lpi_marl.exceptions import CertificationError, RegularityError
from lpi_marl.logging import get_logger
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy, sigma_regularity
from lpi_marl.solver.dense import dense_model
from lpi_marl.solver.exact import QTable, ValueTable, local_qs, policy_value

# Avoid circular imports
if TYPE_CHECKING:
    from lpi_marl.lpi.truncated import TruncatedQ

logger = get_logger(__name__)

_SLACK = 1e-12


@dataclass
class TruncationReport:
    """Truncation error against its certified bounds.

    Attributes:
        beta: Truncation radius
        mu: Decay exponent
        nu: Certified decay constant of the Q interaction matrix
        empirical: ``max_i max_{s,a} |Q_i(s, a) - Q_i^trunc(s, a)|``
        tail_bound: ``max_i sum_{dist(i,j) > beta} Z^Q_ij``
        certified_bound: ``nu / (beta + 1)^mu``
        per_agent: Empirical error of each agent
    """

    beta: int
    mu: float
    nu: float
    empirical: float
    tail_bound: float
    certified_bound: float
    per_agent: list[float]

    @property
    def holds(self) -> bool:
        return self.empirical <= self.certified_bound + _SLACK and (
            self.empirical <= self.tail_bound + _SLACK
        )


def truncation_error(
    m: FactoredMDP,
    q_full: Sequence[QTable],
    q_trunc: Sequence[TruncatedQ],
    beta: int,
    mu: float,
    cap: int = EXACT_CAP,
    diagnostic_cap: int = DIAGNOSTIC_CAP,
) -> TruncationReport:
    """Compare truncated tables with the full local Q tables they came from."""
    per_agent = [
        float(np.max(np.abs(full.values - trunc.expand(m, cap))))
        for full, trunc in zip(q_full, q_trunc)
    ]
    z = q_interaction(q_full, m.graph, diagnostic_cap)
    certificate = decay_check(z, mu)
    return TruncationReport(
        beta=beta,
        mu=mu,
        nu=certificate.nu,
        empirical=max(per_agent),
        tail_bound=float(tail_sums(z, beta).max()),
        certified_bound=certificate.tail_bound(beta),
        per_agent=per_agent,
    )


@dataclass
class PerformanceDifferenceReport:
    """Value difference of two policies against its bound.

    Attributes:
        lhs: ``||V^zeta - V^zeta_tilde||_inf``
        rhs: Bound plus ``4 tol``
        sigma: Regularity constant used
        nu_prime: Q decay constant used
        tv_sum: ``sum_i sup_s TV(zeta_tilde_i(. | s), zeta_i(. | s))``
    """

    lhs: float
    rhs: float
    sigma: float
    nu_prime: float
    tv_sum: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def policy_tv_sum(m: FactoredMDP, zeta: JointPolicy, other: JointPolicy, cap: int = EXACT_CAP) -> float:
    """``sum_i max_s TV(zeta_i(. | s), other_i(. | s))`` over every global state."""
    dense = dense_model(m, cap)
    rows = dense.policy_rows(zeta)
    other_rows = dense.policy_rows(other)
    return float(
        sum(0.5 * np.abs(a - b).sum(axis=1).max() for a, b in zip(rows, other_rows))
    )


def performance_difference(
    m: FactoredMDP,
    zeta: JointPolicy,
    zeta_tilde: JointPolicy,
    sigma: float | None = None,
    nu_prime: float | None = None,
    tol: float = DEFAULT_TOL,
    cap: int = EXACT_CAP,
    diagnostic_cap: int = DIAGNOSTIC_CAP,
) -> PerformanceDifferenceReport:
    """Check the performance-difference bound for two policies.

    Args:
        m: The model
        zeta: First policy
        zeta_tilde: Policy whose local Q tables supply the decay constant
        sigma: Regularity constant; certified from both policies when omitted
        nu_prime: Q decay constant; certified as the largest row or column sum
            of ``Z^Q`` of ``zeta_tilde`` when omitted
        tol: Tolerance of the exact evaluations
        cap: Enumeration cap of the exact solver
        diagnostic_cap: Perturbation cap of the interaction matrices

    Raises:
        CertificationError: If a policy is not sigma-regular, or a supplied
            constant is below the certified one
    """
    try:
        certified_sigma = max(sigma_regularity(zeta), sigma_regularity(zeta_tilde))
    except RegularityError as e:
        raise CertificationError(f"Performance difference needs sigma-regular policies: {e}") from e
    if sigma is None:
        sigma = certified_sigma
    elif sigma < certified_sigma - _SLACK:
        raise CertificationError(f"sigma={sigma} is below the certified {certified_sigma}")

    certified_nu = decay_check(
        q_interaction(local_qs(m, zeta_tilde, tol, cap), m.graph, diagnostic_cap), 0.0
    ).nu
    if nu_prime is None:
        nu_prime = certified_nu
    elif nu_prime < certified_nu - _SLACK:
        raise CertificationError(f"nu'={nu_prime} is below the certified {certified_nu}")

    lhs = policy_value(m, zeta, tol, cap).sup_distance(policy_value(m, zeta_tilde, tol, cap))
    tv_sum = policy_tv_sum(m, zeta, zeta_tilde, cap)
    bound = performance_difference_bound(m.gamma, m.tau, sigma, nu_prime, m.n, tv_sum)
    return PerformanceDifferenceReport(
        lhs=lhs, rhs=bound + 4 * tol, sigma=sigma, nu_prime=nu_prime, tv_sum=tv_sum
    )


@dataclass
class ClosureRecord:
    """Decay and regularity of one exact policy-iteration iterate."""

    iteration: int
    nu: float
    sigma: float
    holds: bool


def closure_monitor(
    m: FactoredMDP,
    mu: float,
    nu_bound: float,
    sigma_bound: float,
    records: list[ClosureRecord],
    diagnostic_cap: int = DIAGNOSTIC_CAP,
) -> Callable[[int, JointPolicy, ValueTable], None]:
    """Callback for ``exact_policy_iteration`` recording whether each iterate
    stays within ``(nu_bound, mu)``-decay and ``sigma_bound``-regularity."""

    def record(iteration: int, zeta: JointPolicy, _value: ValueTable) -> None:
        nu = decay_check(policy_interaction(zeta, m.graph, diagnostic_cap), mu).nu
        sigma = sigma_regularity(zeta)
        holds = nu <= nu_bound + _SLACK and sigma <= sigma_bound + _SLACK
        if not holds:
            logger.warning(
                f"Iterate {iteration} leaves the closed class: nu={nu:.4g}, sigma={sigma:.4g}"
            )
        records.append(ClosureRecord(iteration, nu, sigma, holds))

    return record
