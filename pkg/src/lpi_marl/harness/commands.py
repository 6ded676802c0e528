"""The experiment commands behind the CLI.

Every command takes a validated ``ExperimentConfig`` and an output
directory, writes its files there and returns their paths.
"""

from __future__ import annotations

import asyncio
import os
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from lpi_marl import __version__
from lpi_marl.analysis import (
    InteractionMatrix,
    c_matrix,
    decay_check,
    gap_bound,
    policy_interaction,
    q_interaction,
    second_order_interaction,
    tail_bound_holds,
    truncation_error,
    write_matrix_csv,
)
from lpi_marl.analysis.bounds import ClosureConstants, closure_constants, q_decay_constant
from lpi_marl.config import ExactSettings
from lpi_marl.exceptions import CapExceededError, CertificationError, SchemaError
from lpi_marl.harness.io import (
    AGGREGATE_SCHEMA,
    GAP_SCHEMA,
    METRICS_SCHEMA,
    TRUNCATION_SCHEMA,
    AggregateCurve,
    aggregate_returns,
    read_aggregate_csv,
    read_metrics_csv,
    read_table,
    write_aggregate_csv,
    write_manifest,
    write_metrics_csv,
    write_table,
    write_timing_csv,
)
from lpi_marl.harness.orchestrator import PointResult, build_point_model, run_sweep
from lpi_marl.harness.plotting import plot_curves
from lpi_marl.harness.schemas import ExperimentConfig, SweepPoint
from lpi_marl.logging import get_logger
from lpi_marl.lpi import truncate_q
from lpi_marl.mdp import FactoredMDP
from lpi_marl.policy import sigma_regularity, truncate_policy, uniform_policy, write_policy
from lpi_marl.solver import (
    global_q,
    local_qs,
    objective,
    objective_from_values,
    solve_optimal,
    write_value_csv,
)

logger = get_logger(__name__)

OUTPUT_ROOT_ENV = "LPI_OUTPUT_ROOT"
GAP_COLUMNS = ("kappa", "objective", "gap", "bound")
TRUNCATION_COLUMNS = ("beta", "empirical", "tail_bound", "certified_bound", "holds")


def resolve_output_dir(config: ExperimentConfig, out: str | Path | None = None) -> Path:
    """``out``, else the configured directory, else ``$LPI_OUTPUT_ROOT/<name>``, else ``results/<name>``."""
    if out is not None:
        return Path(out)
    if config.output.directory is not None:
        return Path(config.output.directory)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "results")) / config.name


def apply_overrides(config: ExperimentConfig, seed_override: int | None = None) -> ExperimentConfig:
    """Copy of ``config`` restricted to a single seed when one is given."""
    if seed_override is None:
        return config
    sweep = config.sweep.model_copy(update={"seeds": [seed_override]})
    return config.model_copy(update={"sweep": sweep})


def _exact_settings(config: ExperimentConfig, cap_override: int | None) -> ExactSettings:
    settings = config.exact.settings()
    if cap_override is None:
        return settings
    return ExactSettings(tol=settings.tol, cap=cap_override, mw_budget=settings.mw_budget)


def _base_point(config: ExperimentConfig) -> SweepPoint:
    return config.points()[0]


def _point_meta(config: ExperimentConfig, point: SweepPoint, with_seed: bool = True) -> dict[str, Any]:
    meta: dict[str, Any] = {
        "experiment": config.name,
        "environment": config.environment.name,
        "kappa": point.kappa,
        "beta": point.beta,
        "tau": point.tau,
        "n": "file" if point.n is None else point.n,
    }
    if with_seed:
        meta["seed"] = point.seed
    return meta


# =============================================================================
# train / sweep
# =============================================================================


@dataclass
class TrainSummary:
    """What ``cmd_train`` produced."""

    results: list[PointResult]
    curves: dict[tuple[int, int, float, int | None], AggregateCurve] = field(default_factory=dict)
    paths: list[Path] = field(default_factory=list)


def _write_point(config: ExperimentConfig, result: PointResult, directory: Path) -> list[Path]:
    point = result.point
    tag = point.tag()
    meta = _point_meta(config, point)
    metrics_path = directory / f"metrics_{tag}.csv"
    timing_path = directory / f"timing_{tag}.csv"
    manifest_path = directory / f"manifest_{tag}.json"
    write_metrics_csv(result.metrics, metrics_path, meta)
    write_timing_csv(result.metrics, timing_path, meta)
    write_manifest(
        {
            "version": __version__,
            "experiment": config.model_dump(mode="json"),
            "point": point.model_dump(),
            "run": result.metrics.manifest,
            "model": result.model,
        },
        manifest_path,
    )
    return [metrics_path, timing_path, manifest_path]


def cmd_train(
    config: ExperimentConfig,
    out: str | Path | None = None,
    workers: int | None = None,
    cap_override: int | None = None,
) -> TrainSummary:
    """Train every sweep point and write per-seed and aggregate files.

    Writes ``metrics_<tag>.csv``, ``timing_<tag>.csv`` and
    ``manifest_<tag>.json`` per (point, seed), and ``aggregate_<tag>.csv``
    with the median and quartiles across seeds per point.
    """
    directory = resolve_output_dir(config, out)
    results = asyncio.run(run_sweep(config, workers, cap_override))
    summary = TrainSummary(results=results)

    groups: dict[tuple[int, int, float, int | None], list[PointResult]] = defaultdict(list)
    for result in results:
        summary.paths.extend(_write_point(config, result, directory))
        groups[result.point.group].append(result)

    for key, members in groups.items():
        point = members[0].point
        meta = _point_meta(config, point, with_seed=False)
        curve = aggregate_returns([r.metrics.rows for r in members], meta)
        path = directory / f"aggregate_{point.tag(with_seed=False)}.csv"
        write_aggregate_csv(curve, path)
        summary.curves[key] = curve
        summary.paths.append(path)
    logger.info(f"Training finished: {len(results)} runs, {len(groups)} sweep points in {directory}")
    return summary


def _chart_title(meta: dict[str, str]) -> str:
    parts = [meta[k] for k in ("experiment",) if k in meta]
    parts += [f"{k}={meta[k]}" for k in ("tau", "n") if k in meta]
    return ", ".join(parts)


def _by_kappa(curve: AggregateCurve) -> tuple[float, str]:
    kappa = curve.meta.get("kappa", "")
    try:
        return float(kappa), kappa
    except ValueError:
        return float("inf"), kappa


def cmd_sweep(
    config: ExperimentConfig,
    out: str | Path | None = None,
    workers: int | None = None,
    cap_override: int | None = None,
) -> TrainSummary:
    """Train the grid, then draw one chart per ``(tau, n)`` with a curve per kappa."""
    directory = resolve_output_dir(config, out)
    summary = cmd_train(config, directory, workers, cap_override)
    charts: dict[tuple[float, int | None], list[AggregateCurve]] = defaultdict(list)
    for (_, _, tau, n), curve in summary.curves.items():
        charts[(tau, n)].append(curve)
    for (tau, n), curves in charts.items():
        curves.sort(key=_by_kappa)
        n_text = "file" if n is None else str(n)
        path = directory / f"chart_tau{tau:g}_n{n_text}.svg"
        summary.paths.append(plot_curves(curves, path, title=_chart_title(curves[0].meta)))
    return summary


# =============================================================================
# solve-exact
# =============================================================================


def _closure_or_none(m: FactoredMDP, diagnostic_cap: int) -> ClosureConstants | None:
    """Constants of the class closed under exact improvement, ``None`` when unavailable."""
    try:
        interaction = float(c_matrix(m, diagnostic_cap).row_sums.max())
        return closure_constants(
            m.tau, m.gamma, float(m.r_bar or 0.0), m.a_max, interaction, m.n
        )
    except (CertificationError, CapExceededError) as e:
        logger.debug(f"No closure constants: {e}")
        return None


def _gap_bound_or_none(m: FactoredMDP, kappa: int, diagnostic_cap: int) -> float | None:
    """Gap bound of the truncated optimal policy, ``None`` when its hypotheses fail."""
    closure = _closure_or_none(m, diagnostic_cap)
    if closure is None or not closure.mu > 0:
        return None
    return gap_bound(float(m.r_bar or 0.0), m.gamma, kappa, closure.mu)


def cmd_solve_exact(
    config: ExperimentConfig,
    out: str | Path | None = None,
    cap_override: int | None = None,
) -> list[Path]:
    """Solve the first sweep point exactly and tabulate the kappa-hop gaps.

    Writes ``v_star.csv``, ``policy_star.txt``, ``exact_summary.json`` and
    ``gap_table.csv`` with ``g(kappa) = J(zeta*) - J(truncate(zeta*, kappa))``
    for ``kappa = 0..diameter``.

    Raises:
        CapExceededError: If the instance is too large to enumerate
    """
    directory = resolve_output_dir(config, out)
    directory.mkdir(parents=True, exist_ok=True)
    point = _base_point(config)
    m = build_point_model(config, point)
    settings = _exact_settings(config, cap_override)

    v_star, zeta_star = solve_optimal(m, settings.tol, settings.cap, settings.mw_budget)
    j_star = objective_from_values(m, v_star, settings.cap)
    paths = [directory / "v_star.csv", directory / "policy_star.txt"]
    write_value_csv(v_star, paths[0])
    write_policy(zeta_star, paths[1])

    rows = []
    for kappa in range(m.graph.diameter + 1):
        truncated = truncate_policy(zeta_star, kappa, m)
        j_kappa = objective(m, truncated, settings.tol, settings.cap)
        bound = _gap_bound_or_none(m, kappa, config.diagnostics.cap)
        rows.append([kappa, j_kappa, j_star - j_kappa, bound])
        logger.info(f"kappa={kappa}: J={j_kappa:.6f}, gap={j_star - j_kappa:.3e}")
    gap_path = directory / "gap_table.csv"
    write_table(gap_path, GAP_SCHEMA, _point_meta(config, point, with_seed=False), GAP_COLUMNS, rows)
    paths.append(gap_path)

    summary_path = directory / "exact_summary.json"
    write_manifest(
        {
            "version": __version__,
            "objective": j_star,
            "solver": v_star.metadata,
            "settings": {"tol": settings.tol, "cap": settings.cap, "mw_budget": settings.mw_budget},
            "model": m.describe(),
        },
        summary_path,
    )
    paths.append(summary_path)
    return paths


# =============================================================================
# diagnose
# =============================================================================


def _certificate_entry(A: InteractionMatrix, mu: float) -> dict[str, Any]:
    certificate = decay_check(A, mu)
    side, index, value = certificate.witness
    return {
        "mu": certificate.mu,
        "nu": certificate.nu,
        "witness": {"side": side, "index": index, "sum": value},
        "tail_bound_holds": tail_bound_holds(A, certificate),
    }


def cmd_diagnose(
    config: ExperimentConfig,
    out: str | Path | None = None,
    cap_override: int | None = None,
) -> list[Path]:
    """Interaction matrices, decay certificates and the truncation report.

    ``certificates.json`` also carries the constants of the policy class closed
    under exact improvement and the Q decay bound of the diagnosed policy.
    The C matrix only needs the kernels. The policy and Q matrices and the
    truncation report enumerate the global space and are skipped with a
    warning when it exceeds the exact cap.
    """
    directory = resolve_output_dir(config, out)
    directory.mkdir(parents=True, exist_ok=True)
    point = _base_point(config)
    m = build_point_model(config, point)
    settings = _exact_settings(config, cap_override)
    diag = config.diagnostics
    mu = diag.mu

    matrices: dict[str, InteractionMatrix] = {"c_matrix": c_matrix(m, diag.cap)}
    report_rows: list[list[Any]] = []
    closed_class: dict[str, Any] = {}
    closure = _closure_or_none(m, diag.cap)
    if closure is not None:
        closed_class.update(nu=closure.nu, mu=closure.mu, sigma=closure.sigma)
    try:
        if diag.policy == "optimal":
            zeta = solve_optimal(m, settings.tol, settings.cap, settings.mw_budget)[1]
        else:
            zeta = uniform_policy(m, 0)
        qs = local_qs(m, zeta, settings.tol, settings.cap)
        matrices["z_policy"] = policy_interaction(zeta, m.graph, diag.cap)
        matrices["z_q"] = q_interaction(qs, m.graph, diag.cap)
        sigma = sigma_regularity(zeta)
        closed_class["policy_sigma"] = sigma
        closed_class["q_nu_bound"] = q_decay_constant(
            float(m.r_bar or 0.0), m.gamma, m.n, m.tau, sigma
        )
        q_global = global_q(m, zeta, settings.tol, settings.cap)
        matrices["h_q"] = second_order_interaction(q_global, m.graph, diag.cap)
        for beta in range(m.graph.diameter + 1):
            truncated = [truncate_q(m, q, beta, diag.truncation_weights) for q in qs]
            report = truncation_error(m, qs, truncated, beta, mu, settings.cap, diag.cap)
            report_rows.append(
                [beta, report.empirical, report.tail_bound, report.certified_bound, int(report.holds)]
            )
    except CapExceededError as e:
        logger.warning(f"Skipping exact diagnostics: {e}")

    paths = []
    certificates = {}
    for name, A in matrices.items():
        path = directory / f"{name}.csv"
        write_matrix_csv(A, decay_check(A, mu), path)
        certificates[name] = _certificate_entry(A, mu)
        paths.append(path)

    if report_rows:
        path = directory / "truncation_report.csv"
        meta = {
            **_point_meta(config, point, with_seed=False),
            "mu": mu,
            "weights": diag.truncation_weights,
        }
        write_table(path, TRUNCATION_SCHEMA, meta, TRUNCATION_COLUMNS, report_rows)
        paths.append(path)

    cert_path = directory / "certificates.json"
    write_manifest(
        {
            "version": __version__,
            "policy": diag.policy,
            "certificates": certificates,
            "closed_class": closed_class,
        },
        cert_path,
    )
    paths.append(cert_path)
    return paths


# =============================================================================
# plot
# =============================================================================


def _curves_from_files(paths: Iterable[str | Path]) -> list[AggregateCurve]:
    curves: list[AggregateCurve] = []
    runs: dict[tuple[tuple[str, str], ...], list[Any]] = defaultdict(list)
    metas: dict[tuple[tuple[str, str], ...], dict[str, str]] = {}
    for path in paths:
        schema = read_table(path).schema
        if schema == AGGREGATE_SCHEMA:
            curves.append(read_aggregate_csv(path))
        elif schema == METRICS_SCHEMA:
            table = read_metrics_csv(path)
            meta = {k: v for k, v in table.meta.items() if k != "seed"}
            key = tuple(sorted(meta.items()))
            runs[key].append(table.column("regularized_return"))
            metas[key] = meta
        else:
            raise SchemaError(f"{path} has schema '{schema}', cannot plot it")
    for key, returns in runs.items():
        curves.append(aggregate_returns(returns, metas[key]))
    return curves


def cmd_plot(paths: Sequence[str | Path], out: str | Path) -> Path:
    """Chart metrics or aggregate CSVs; seeds sharing the remaining metadata are aggregated.

    Raises:
        SchemaError: If a file is not a metrics or aggregate CSV
    """
    if not paths:
        raise SchemaError("No CSV files to plot")
    curves = sorted(_curves_from_files(paths), key=_by_kappa)
    return plot_curves(curves, out, title=_chart_title(curves[0].meta))
