"""Localized TD(0) evaluation of a kappa-hop policy.

Each agent learns a table over its ``beta``-hop state-action cells from the
shared trajectory, using rewards shifted by the entropy of its own policy
row. The entropy term is removed again when the table is returned.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import entr

from lpi_marl.config import ScheduleKind
from lpi_marl.exceptions import ConfigurationError
from lpi_marl.logging import get_logger
from lpi_marl.lpi._accel import jit
from lpi_marl.lpi.trajectory import TrajectoryRecord
from lpi_marl.lpi.truncated import TruncatedQ
from lpi_marl.policy import KHopPolicy

logger = get_logger(__name__)

_SCHEDULE_KEYS = {
    ScheduleKind.CONSTANT: {"alpha"},
    ScheduleKind.ANNEALED: {"alpha", "factor", "period"},
    ScheduleKind.POLYNOMIAL: {"H", "t0_floor"},
}


@dataclass(frozen=True)
class StepSchedule:
    """TD(0) step sizes ``alpha_t``.

    Attributes:
        kind: Schedule family
        alpha: Initial (or constant) step
        factor: Annealing multiplier applied every ``period`` updates
        period: Annealing period
        H: Numerator of the polynomial schedule ``H / (t + t0)``
        t0: Offset of the polynomial schedule
    """

    kind: ScheduleKind = ScheduleKind.CONSTANT
    alpha: float = 0.1
    factor: float = 0.5
    period: int = 100_000
    H: float | None = None
    t0: float | None = None

    def __post_init__(self) -> None:
        """Validate the schedule after initialization."""
        object.__setattr__(self, "kind", ScheduleKind.from_string(self.kind))
        if self.kind is ScheduleKind.POLYNOMIAL:
            if self.H is None or self.H <= 0 or self.t0 is None or self.t0 <= 0:
                raise ConfigurationError("Polynomial schedule needs H > 0 and t0 > 0", field="H")
        elif not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}", field="alpha")
        if self.kind is ScheduleKind.ANNEALED:
            if not 0 < self.factor <= 1:
                raise ConfigurationError(f"factor must lie in (0, 1], got {self.factor}", field="factor")
            if self.period < 1:
                raise ConfigurationError(f"period must be positive, got {self.period}", field="period")

    def rate(self, t: int) -> float:
        """Step size of update ``t`` (zero-based)."""
        return float(self.rates(t + 1)[t])

    def rates(self, count: int) -> np.ndarray:
        """Step sizes of updates ``0 .. count - 1``."""
        t = np.arange(count, dtype=float)
        if self.kind is ScheduleKind.CONSTANT:
            return np.full(count, self.alpha)
        if self.kind is ScheduleKind.ANNEALED:
            return self.alpha * self.factor ** np.floor(t / self.period)
        assert self.H is not None and self.t0 is not None
        return self.H / (t + self.t0)

    def describe(self) -> dict[str, Any]:
        if self.kind is ScheduleKind.POLYNOMIAL:
            return {"kind": self.kind.value, "H": self.H, "t0": self.t0}
        out: dict[str, Any] = {"kind": self.kind.value, "alpha": self.alpha}
        if self.kind is ScheduleKind.ANNEALED:
            out.update(factor=self.factor, period=self.period)
        return out


def make_schedule(
    kind: ScheduleKind | str,
    params: Mapping[str, Any] | None,
    gamma: float,
    xi_estimate: float | None = None,
) -> StepSchedule:
    """Build a step schedule.

    The polynomial kind takes ``H = 2 / ((1 - gamma) xi)`` when a visitation
    estimate ``xi`` is given (``params["H"]`` otherwise) and
    ``t0 = max(4 H, t0_floor)``.

    Raises:
        ConfigurationError: On unknown parameters or ``xi_estimate <= 0``
    """
    kind = ScheduleKind.from_string(kind)
    params = dict(params or {})
    unknown = set(params) - _SCHEDULE_KEYS[kind]
    if unknown:
        raise ConfigurationError(
            f"Unknown {kind.value} schedule parameters: {sorted(unknown)}", field=sorted(unknown)[0]
        )
    if kind is ScheduleKind.CONSTANT:
        return StepSchedule(kind, alpha=float(params.get("alpha", 0.1)))
    if kind is ScheduleKind.ANNEALED:
        return StepSchedule(
            kind,
            alpha=float(params.get("alpha", 0.1)),
            factor=float(params.get("factor", 0.5)),
            period=int(params.get("period", 100_000)),
        )
    if xi_estimate is not None:
        if xi_estimate <= 0:
            raise ConfigurationError(f"xi estimate must be positive, got {xi_estimate}", field="xi")
        H = 2.0 / ((1.0 - gamma) * xi_estimate)
    elif "H" in params:
        H = float(params["H"])
    else:
        raise ConfigurationError("Polynomial schedule needs H or a xi estimate", field="H")
    t0 = max(4.0 * H, float(params.get("t0_floor", 0.0)))
    return StepSchedule(kind, H=H, t0=t0)


@jit
def _td_updates(
    table: np.ndarray,
    states: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    rates: np.ndarray,
    gamma: float,
) -> None:
    for t in range(1, states.shape[0]):
        s, a = states[t - 1], actions[t - 1]
        target = rewards[t - 1] + gamma * table[states[t], actions[t]]
        table[s, a] += rates[t - 1] * (target - table[s, a])


def _entropy_at(policy: KHopPolicy, states: np.ndarray) -> np.ndarray:
    """Entropy of the policy row at each ``(k, n)`` global state."""
    row_entropy = entr(policy.table).sum(axis=1)
    return row_entropy[policy.row_indices(states)]


def localized_td0(
    traj: TrajectoryRecord,
    policy: KHopPolicy,
    beta: int,
    gamma: float,
    tau: float,
    n: int,
    schedule: StepSchedule,
    default_state: tuple[int, ...] | None = None,
) -> TruncatedQ:
    """Run TD(0) for one agent over its ``beta``-hop cells.

    Args:
        traj: Shared trajectory recorded with radius at least ``beta``
        policy: The agent's kappa-hop policy that generated the actions
        beta: Evaluation radius
        gamma: Discount factor
        tau: Entropy weight
        n: Number of agents
        schedule: Step sizes
        default_state: Filler used when the policy observes agents outside
            the ``beta``-hop neighborhood (zeros when omitted)

    Returns:
        The learned table with the entropy shift removed
    """
    if traj.beta < beta:
        raise ConfigurationError(f"Trajectory radius {traj.beta} is smaller than beta={beta}", field="beta")
    i = policy.agent
    members = traj.neighborhood(i, beta)
    cols = list(members)
    s_codec, a_codec = traj.codecs(i, beta)
    states, actions = traj.cells(i, beta)

    shifted = traj.rewards[:, i] + n * tau * _entropy_at(policy, traj.states)
    table = np.zeros((s_codec.size, a_codec.size))
    _td_updates(table, states, actions, shifted, schedule.rates(max(len(traj) - 1, 0)), gamma)
    if logger.isEnabledFor(logging.DEBUG):
        visited = np.unique(states * a_codec.size + actions).size
        logger.debug(f"TD agent {i}: visited {visited} of {table.size} cells over {len(traj)} steps")

    cell_states = s_codec.all_tuples()
    filler = np.zeros(traj.n, dtype=np.int64) if default_state is None else np.asarray(default_state)
    global_states = np.tile(filler, (cell_states.shape[0], 1))
    global_states[:, cols] = cell_states
    table -= n * tau * _entropy_at(policy, global_states)[:, None]
    return TruncatedQ(
        agent=i,
        radius=beta,
        members=members,
        state_dims=s_codec.dims,
        action_dims=a_codec.dims,
        table=table,
    )


# ---------------------------------------------------------------------------
# Visitation diagnostics
# ---------------------------------------------------------------------------


def visitation_frequencies(traj: TrajectoryRecord, i: int) -> np.ndarray:
    """Empirical frequency of every ``beta``-hop state-action cell of agent ``i``."""
    states, actions = traj.cells(i)
    s_codec, a_codec = traj.codecs(i)
    counts = np.bincount(states * a_codec.size + actions, minlength=s_codec.size * a_codec.size)
    return counts / max(len(traj), 1)


def integrated_autocorrelation(series: np.ndarray, max_lag: int | None = None) -> float:
    """Integrated autocorrelation time ``1 + 2 sum_k rho(k)`` of a scalar series.

    The sum stops at the first non-positive autocorrelation.
    """
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    length = x.size
    variance = float(x @ x)
    if length < 2 or variance == 0.0:
        return 1.0
    size = 1 << int(np.ceil(np.log2(2 * length)))
    spectrum = np.fft.rfft(x, size)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), size)[:length] / variance
    limit = length - 1 if max_lag is None else min(max_lag, length - 1)
    total = 1.0
    for k in range(1, limit + 1):
        if acf[k] <= 0:
            break
        total += 2.0 * float(acf[k])
    return total


def mixing_estimate(traj: TrajectoryRecord, i: int, max_lag: int | None = None) -> float:
    """Integrated autocorrelation time of the indicator of agent ``i``'s most visited cell."""
    states, actions = traj.cells(i)
    cells = states * traj.codecs(i)[1].size + actions
    top = int(np.bincount(cells).argmax())
    return integrated_autocorrelation((cells == top).astype(float), max_lag)
