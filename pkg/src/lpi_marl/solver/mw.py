"""Multiplicative weights over product simplices.

Solves, independently for each row ``b`` of a batch,

    max_{pi_1, ..., pi_n}  E_{a ~ pi} Q[b, a] + tau * sum_i H(pi_i)

by the simultaneous update

    pi_i^{p+1} ∝ (pi_i^p)^{1 - eta tau} * exp(eta * E_{a_-i ~ pi_-i^p} Q[b, a_-i, a_i])

from the uniform start. Policies are kept in the log domain so rows never
underflow to exact zeros.
"""

from __future__ import annotations

import logging
import string
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr, logsumexp

from lpi_marl.exceptions import CapExceededError, ConvergenceError
from lpi_marl.logging import get_logger

logger = get_logger(__name__)

_LETTERS = string.ascii_letters.replace("b", "")

# One einsum subscript per agent
MAX_AGENTS = len(_LETTERS)


def _agent_letters(n: int) -> str:
    if n > MAX_AGENTS:
        raise CapExceededError("Agents in one product-simplex solve", n, MAX_AGENTS)
    return _LETTERS[:n]


def mw_step(log_pi: np.ndarray, expected_q: np.ndarray, eta: float, tau: float) -> np.ndarray:
    """One multiplicative-weights update of ``(rows, |A_i|)`` log-probabilities."""
    prior = 1.0 - eta * tau
    logits = eta * expected_q if prior == 0.0 else prior * log_pi + eta * expected_q
    return logits - logsumexp(logits, axis=1, keepdims=True)


def uniform_log_policy(rows: int, size: int) -> np.ndarray:
    return np.full((rows, size), -np.log(size))


def expected_q_for_agent(q: np.ndarray, policies: Sequence[np.ndarray], i: int) -> np.ndarray:
    """``E_{a_-i ~ pi_-i} Q[b, a_-i, a_i]`` as a ``(batch, |A_i|)`` array.

    Args:
        q: ``(batch, A_0, ..., A_{n-1})`` tensor
        policies: Per-agent ``(batch, |A_j|)`` probabilities
        i: Agent whose action is kept
    """
    n = len(policies)
    letters = _agent_letters(n)
    operands: list[np.ndarray] = [q]
    subscripts = ["b" + letters]
    for j in range(n):
        if j != i:
            operands.append(policies[j])
            subscripts.append("b" + letters[j])
    expr = ",".join(subscripts) + "->b" + letters[i]
    return np.einsum(expr, *operands, optimize=True)


def product_expectation(q: np.ndarray, policies: Sequence[np.ndarray]) -> np.ndarray:
    """``E_{a ~ pi} Q[b, a]`` for every row."""
    n = len(policies)
    letters = _agent_letters(n)
    expr = ",".join(["b" + letters] + ["b" + c for c in letters]) + "->b"
    return np.einsum(expr, q, *policies, optimize=True)


@dataclass
class MWResult:
    """Outcome of a multiplicative-weights solve.

    Attributes:
        policies: Per-agent ``(batch, |A_i|)`` probabilities
        values: Attained objective per row
        iterations: Updates performed
        converged: Whether the TV-change tolerance was met
        last_change: Largest per-agent TV change of the final update
        rates: Ratio of successive TV changes (diagnostic)
    """

    policies: list[np.ndarray]
    values: np.ndarray
    iterations: int
    converged: bool
    last_change: float
    rates: list[float] = field(default_factory=list)


def multiplicative_weights(
    q: np.ndarray,
    tau: float,
    eta: float | None = None,
    tol: float = 1e-9,
    budget: int = 10_000,
    raise_on_budget: bool = True,
) -> MWResult:
    """Maximize the entropy-regularized expectation of ``q`` over product policies.

    Args:
        q: ``(batch, A_0, ..., A_{n-1})`` tensor
        tau: Entropy weight (> 0)
        eta: Step size; ``1 / tau`` when omitted
        tol: Stop once every agent's per-row TV change is at most ``tol``
        budget: Maximum number of updates
        raise_on_budget: Raise instead of returning an unconverged result

    Returns:
        The limit policies and attained values

    Raises:
        ConvergenceError: If the budget runs out and ``raise_on_budget`` is set
        CapExceededError: If ``q`` has more agent axes than einsum subscripts
    """
    if tau <= 0:
        raise ValueError("multiplicative weights needs tau > 0")
    _agent_letters(q.ndim - 1)
    eta = 1.0 / tau if eta is None else eta
    batch = q.shape[0]
    dims = q.shape[1:]
    log_pis = [uniform_log_policy(batch, d) for d in dims]
    policies = [np.exp(lp) for lp in log_pis]

    change = np.inf
    previous = np.inf
    rates: list[float] = []
    debug = logger.isEnabledFor(logging.DEBUG)
    iterations = 0
    for iterations in range(1, budget + 1):
        new_logs = [
            mw_step(log_pis[i], expected_q_for_agent(q, policies, i), eta, tau)
            for i in range(len(dims))
        ]
        new_policies = [np.exp(lp) for lp in new_logs]
        change = max(
            0.5 * float(np.abs(new - old).sum(axis=1).max())
            for new, old in zip(new_policies, policies)
        )
        if np.isfinite(previous) and previous > 0:
            rates.append(change / previous)
            if debug:
                logger.debug(f"MW iteration {iterations}: TV change {change:.3e}, rate {rates[-1]:.3f}")
        log_pis, policies, previous = new_logs, new_policies, change
        if change <= tol:
            break
    converged = change <= tol
    if not converged and raise_on_budget:
        raise ConvergenceError(
            "Multiplicative weights did not converge; tau may be too small for a "
            "geometric contraction",
            budget=budget,
            residual=change,
        )

    values = product_expectation(q, policies) + tau * sum(entr(p).sum(axis=1) for p in policies)
    return MWResult(
        policies=policies,
        values=values,
        iterations=iterations,
        converged=converged,
        last_change=change,
        rates=rates,
    )
