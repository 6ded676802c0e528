"""Running sweeps.

Each sweep point is an independent LPI run. Points are spread over a
process pool and gathered on the event loop; ``workers=0`` runs them inline
in order, which is what the tests use.
"""

from __future__ import annotations

import asyncio
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

from lpi_marl.envs import build_environment
from lpi_marl.exceptions import LPIError
from lpi_marl.graph import NetworkGraph, graph_from_spec
from lpi_marl.harness.schemas import ExperimentConfig, SweepPoint
from lpi_marl.logging import get_logger, log_exception
from lpi_marl.lpi import RunMetrics, lpi_run
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import JointPolicy

logger = get_logger(__name__)


@dataclass
class PointResult:
    """Outcome of one sweep point."""

    point: SweepPoint
    policy: JointPolicy
    metrics: RunMetrics
    model: dict[str, Any]


def point_graph(config: ExperimentConfig, point: SweepPoint) -> NetworkGraph | None:
    """Graph of a sweep point (``None`` lets file environments keep their own)."""
    if point.n is None:
        return None
    edges = config.graph.edges if config.graph.kind == "edges" else None
    return graph_from_spec(config.graph.kind, point.n, edges)


def build_point_model(config: ExperimentConfig, point: SweepPoint) -> FactoredMDP:
    """The environment of one sweep point with its ``n`` and ``tau`` applied."""
    env = config.environment
    params = dict(env.params)
    if point.n is not None:
        params["n"] = point.n
    return build_environment(env.name, params, env.gamma, point.tau, point_graph(config, point), env.rho)


def _train_point(config: ExperimentConfig, point: SweepPoint, cap_override: int | None) -> PointResult:
    m = build_point_model(config, point)
    cfg = config.lpi_config(point)
    if cap_override is not None:
        cfg = cfg.with_exact_cap(cap_override)
    logger.info(f"Training {point.tag()} on {m.name}")
    policy, metrics = lpi_run(m, cfg, diagnostic_cap=config.diagnostics.cap)
    return PointResult(point=point, policy=policy, metrics=metrics, model=m.describe())


async def run_sweep(
    config: ExperimentConfig,
    workers: int | None = None,
    cap_override: int | None = None,
    executor: Executor | None = None,
) -> list[PointResult]:
    """Train every sweep point.

    Args:
        config: The experiment
        workers: Process count; ``0`` runs inline (``config.sweep.workers`` when omitted)
        cap_override: Replaces the exact-metrics enumeration cap
        executor: Executor to use instead of a fresh process pool

    Returns:
        One result per point, in ``config.points()`` order

    Raises:
        LPIError: The first failure of any point
    """
    points = config.points()
    workers = config.sweep.workers if workers is None else workers
    logger.info(f"Sweep '{config.name}': {len(points)} runs, workers={workers}")

    if executor is None and workers == 0:
        results = []
        for point in points:
            try:
                results.append(_train_point(config, point, cap_override))
            except LPIError as e:
                log_exception(logger, e, f"Run {point.tag()} failed")
                raise
        return results

    loop = asyncio.get_running_loop()
    owned = executor is None
    pool = ProcessPoolExecutor(max_workers=workers) if executor is None else executor
    try:
        tasks = [loop.run_in_executor(pool, _train_point, config, p, cap_override) for p in points]
        outcomes = await asyncio.gather(*tasks, return_exceptions=True)
    finally:
        if owned:
            pool.shutdown(wait=True)

    for point, outcome in zip(points, outcomes):
        if isinstance(outcome, BaseException):
            log_exception(logger, outcome, f"Run {point.tag()} failed")
            raise outcome
    return list(outcomes)  # type: ignore[arg-type]
