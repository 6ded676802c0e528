"""Closed-form constants of the localization results and their property predicates.

All formulas assume ``gamma < 0.8`` wherever ``4 - 5 gamma`` appears.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from lpi_marl.exceptions import CertificationError
from lpi_marl.policy import policy_entropy, row_regularity, tv_distance

# Factor in the entropy-weight threshold for the closure and gap results.
CLOSURE_FACTOR = 6.0
# Factor in the entropy-weight threshold for the learning-convergence result.
CONVERGENCE_FACTOR = 40.0

_SLACK = 1e-12


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 0.8:
        raise CertificationError(f"Decay constants need 0 < gamma < 0.8, got {gamma}")


def _ratio(gamma: float) -> float:
    return (4.0 - 3.0 * gamma) / (4.0 - 5.0 * gamma)


def tau_threshold(r_bar: float, gamma: float, a_max: int, factor: float = CLOSURE_FACTOR) -> float:
    """Smallest entropy weight the decay results allow: ``factor r_bar (4-3g)/(4-5g) A^2 e``."""
    _check_gamma(gamma)
    return factor * r_bar * _ratio(gamma) * a_max**2 * math.e


def decay_exponent(
    tau: float,
    gamma: float,
    r_bar: float,
    a_max: int,
    interaction: float,
    factor: float = CLOSURE_FACTOR,
) -> float:
    """Decay exponent ``mu`` implied by the entropy weight and the kernel interaction.

    Args:
        tau: Entropy weight
        gamma: Discount factor
        r_bar: Reward bound
        a_max: Largest local action space
        interaction: ``max_i sum_j C_ij``
        factor: 6 for the closure / gap results, 40 for learning convergence

    Returns:
        ``min(log2(tau / threshold), log2(1 / (2 interaction)))``
    """
    threshold = tau_threshold(r_bar, gamma, a_max, factor)
    # zero rewards put no lower limit on tau
    if threshold <= 0:
        first = math.inf
    else:
        first = math.log2(tau / threshold) if tau > 0 else -math.inf
    if interaction <= 0:
        return first
    return min(first, math.log2(1.0 / (2.0 * interaction)))


@dataclass(frozen=True)
class ClosureConstants:
    """Class of policies preserved by exact policy improvement.

    Attributes:
        nu: Policy decay constant (1/2)
        mu: Decay exponent
        sigma: Regularity bound ``r_bar (4-3g) / ((4-5g) n tau)``
    """

    nu: float
    mu: float
    sigma: float


def closure_constants(
    tau: float, gamma: float, r_bar: float, a_max: int, interaction: float, n: int
) -> ClosureConstants:
    mu = decay_exponent(tau, gamma, r_bar, a_max, interaction)
    sigma = r_bar * _ratio(gamma) / (n * tau) if tau > 0 else math.inf
    return ClosureConstants(nu=0.5, mu=mu, sigma=sigma)


def gap_bound(r_bar: float, gamma: float, kappa: int, mu: float) -> float:
    """Optimality gap allowed for the truncated optimal ``kappa``-hop policy."""
    _check_gamma(gamma)
    return r_bar * _ratio(gamma) / (1.0 - gamma) / (kappa + 1) ** mu


def nu_prime(r_bar: float, gamma: float) -> float:
    """Q decay constant ``(4-3g)/(4-5g) r_bar`` of policies in the closed class."""
    _check_gamma(gamma)
    return _ratio(gamma) * r_bar


def q_decay_constant(r_bar: float, gamma: float, n: int, tau: float, sigma: float) -> float:
    """``r_bar + gamma (r_bar + n tau sigma) / (4 (1 - gamma))``.

    Bounds the Q decay constant of a sigma-regular policy with decay constant
    at most 1/2 when ``2^mu sum_j C_ij <= 1/2``.
    """
    return r_bar + gamma * (r_bar + n * tau * sigma) / (4.0 * (1.0 - gamma))


def improved_policy_constants(
    nu_q: float, mu: float, tau: float, n: int, a_max: int
) -> tuple[float, float]:
    """Regularity and decay of the improvement of ``(nu_q, mu)``-decay Q tables.

    Returns:
        ``(sigma', nu'')``

    Raises:
        CertificationError: If ``tau < 3 * 2^(mu+1) nu_q A^2 e``
    """
    if tau < 3.0 * 2.0 ** (mu + 1) * nu_q * a_max**2 * math.e:
        raise CertificationError("Entropy weight too small to certify the improved policy")
    scale = 2.0 ** (mu + 1) * nu_q * a_max**2 * math.exp(nu_q / (n * tau))
    return nu_q / (n * tau), scale / (tau - scale)


@dataclass(frozen=True)
class ConvergenceConstants:
    """Constants of the learning-convergence result.

    Attributes:
        nu_prime: ``(4-3g)/(4-5g) r_bar``
        mu: Decay exponent with the factor-40 threshold
        sigma: ``2 nu_prime / (tau n)``
    """

    nu_prime: float
    mu: float
    sigma: float


def convergence_constants(
    tau: float, gamma: float, r_bar: float, a_max: int, interaction: float, n: int
) -> ConvergenceConstants:
    npr = nu_prime(r_bar, gamma)
    mu = decay_exponent(tau, gamma, r_bar, a_max, interaction, CONVERGENCE_FACTOR)
    sigma = 2.0 * npr / (tau * n) if tau > 0 else math.inf
    return ConvergenceConstants(nu_prime=npr, mu=mu, sigma=sigma)


def beta_formula(kappa: int, f_kappa: int, c_pe: float, nu_prime_value: float, mu: float) -> float:
    """Evaluation radius ``((kappa+1)/2) (2 f(kappa) c_pe / nu')^(1/mu)``."""
    if mu <= 0:
        return math.inf
    return (kappa + 1) / 2.0 * (2.0 * f_kappa * c_pe / nu_prime_value) ** (1.0 / mu)


def p_max_lower_bound(kappa: int, c_pe: float, nu_prime_value: float, mu: float) -> float:
    """``-log2((4 + c_pe / (2^mu nu')) / (3 (kappa/2 + 1)^mu))``."""
    inner = (4.0 + c_pe / (2.0**mu * nu_prime_value)) / (3.0 * (kappa / 2.0 + 1.0) ** mu)
    return -math.log2(inner)


def mw_uniqueness_holds(tau: float, mu: float, nu_q: float, a_max: int, n: int) -> bool:
    """Whether ``tau > 2 * 2^(mu+1) nu_q A^2 e^(nu_q / (n tau))``.

    Under this condition the product-simplex maximization has a unique
    solution that multiplicative weights converges to geometrically.
    """
    if tau <= 0:
        return False
    return tau > 2.0 * 2.0 ** (mu + 1) * nu_q * a_max**2 * math.exp(nu_q / (n * tau))


def performance_difference_bound(
    gamma: float, tau: float, sigma: float, nu_q: float, n: int, tv_sum: float
) -> float:
    """``(tau sigma + nu_q / n) / (1 - gamma) * tv_sum``."""
    return (tau * sigma + nu_q / n) / (1.0 - gamma) * tv_sum


# ---------------------------------------------------------------------------
# Distribution predicates
# ---------------------------------------------------------------------------


def entropy_lipschitz_check(
    d: Sequence[float] | np.ndarray, d2: Sequence[float] | np.ndarray, sigma: float | None = None
) -> bool:
    """``|H(d) - H(d2)| <= sigma TV(d, d2)`` for two sigma-regular distributions.

    ``sigma`` defaults to the smallest value both distributions satisfy.
    """
    p, q = np.asarray(d, dtype=float), np.asarray(d2, dtype=float)
    if sigma is None:
        sigma = max(row_regularity(p), row_regularity(q))
    gap = abs(policy_entropy(p) - policy_entropy(q))
    return gap <= sigma * tv_distance(p, q) + _SLACK


def log_ratio_constants(
    d: Sequence[float] | np.ndarray, d2: Sequence[float] | np.ndarray
) -> tuple[float, float]:
    """``(epsilon, c)``: largest log-ratio discrepancy and largest log-ratio."""
    lp = np.log(np.asarray(d, dtype=float))
    lq = np.log(np.asarray(d2, dtype=float))
    rp = lp[:, None] - lp[None, :]
    rq = lq[:, None] - lq[None, :]
    epsilon = float(np.abs(rp - rq).max())
    c = float(max(np.abs(rp).max(), np.abs(rq).max()))
    return epsilon, c


def log_tv_check(d: Sequence[float] | np.ndarray, d2: Sequence[float] | np.ndarray) -> bool:
    """``TV(d, d2) <= m^2 e^c (e^epsilon - 1) / 2`` with the constants of ``log_ratio_constants``."""
    epsilon, c = log_ratio_constants(d, d2)
    m = len(d)
    return tv_distance(d, d2) <= 0.5 * m * m * math.exp(c) * math.expm1(epsilon) + _SLACK
