"""Metrics CSVs, aggregates, timing files and manifests.

Every CSV starts with ``# schema: <id>`` followed by ``# key=value`` lines
describing the sweep point, then a header row. Floats are written with
``repr`` so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from lpi_marl.exceptions import SchemaError
from lpi_marl.logging import get_logger
from lpi_marl.lpi.runner import METRIC_COLUMNS, IterationMetrics, RunMetrics

logger = get_logger(__name__)

METRICS_SCHEMA = "lpi-metrics/v1"
AGGREGATE_SCHEMA = "lpi-aggregate/v1"
TIMING_SCHEMA = "lpi-timing/v1"
GAP_SCHEMA = "lpi-gap/v1"
TRUNCATION_SCHEMA = "lpi-truncation/v1"
AGGREGATE_COLUMNS = ("iteration", "median", "q25", "q75", "seeds")


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, np.integer):
        value = int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def _parse(value: str) -> float | None:
    return None if value == "" else float(value)


@dataclass
class CsvTable:
    """A parsed CSV with its schema and metadata comments."""

    schema: str
    meta: dict[str, str] = field(default_factory=dict)
    columns: list[str] = field(default_factory=list)
    rows: list[dict[str, float | None]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        """One column as floats (missing values become NaN)."""
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)


def write_table(
    path: str | Path,
    schema: str,
    meta: Mapping[str, Any],
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
) -> None:
    """Write a schema-tagged CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        f.write(f"# schema: {schema}\n")
        for key in sorted(meta):
            f.write(f"# {key}={meta[key]}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    logger.info(f"Wrote {path}")


def read_table(path: str | Path, expected: str | None = None) -> CsvTable:
    """Read a CSV written by this module.

    Raises:
        SchemaError: If the schema line is missing or not ``expected``
    """
    path = Path(path)
    with path.open(newline="") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# schema: "):
        raise SchemaError(f"{path} has no schema line")
    table = CsvTable(schema=lines[0][len("# schema: "):].strip())
    if expected is not None and table.schema != expected:
        raise SchemaError(f"{path} has schema '{table.schema}', expected '{expected}'")
    body = 1
    while body < len(lines) and lines[body].startswith("# "):
        key, sep, value = lines[body][2:].partition("=")
        if not sep:
            raise SchemaError(f"{path}:{body + 1}: malformed metadata line")
        table.meta[key] = value
        body += 1
    reader = csv.reader(lines[body:])
    try:
        table.columns = next(reader)
    except StopIteration:
        raise SchemaError(f"{path} has no header row") from None
    for number, row in enumerate(reader, start=body + 2):
        if len(row) != len(table.columns):
            raise SchemaError(f"{path}:{number}: expected {len(table.columns)} fields, got {len(row)}")
        try:
            table.rows.append({c: _parse(v) for c, v in zip(table.columns, row)})
        except ValueError as e:
            raise SchemaError(f"{path}:{number}: {e}") from e
    return table


def write_metrics_csv(metrics: RunMetrics, path: str | Path, meta: Mapping[str, Any]) -> None:
    """One row per iterate with ``METRIC_COLUMNS``."""
    rows = [[r.as_row()[c] for c in METRIC_COLUMNS] for r in metrics.rows]
    write_table(Path(path), METRICS_SCHEMA, meta, METRIC_COLUMNS, rows)


def read_metrics_csv(path: str | Path) -> CsvTable:
    table = read_table(path, METRICS_SCHEMA)
    missing = set(METRIC_COLUMNS) - set(table.columns)
    if missing:
        raise SchemaError(f"{path} lacks columns {sorted(missing)}")
    return table


def write_timing_csv(metrics: RunMetrics, path: str | Path, meta: Mapping[str, Any]) -> None:
    """Wall-clock seconds per iterate, kept apart from the reproducible metrics."""
    rows = [[r.iteration, r.wall_clock] for r in metrics.rows]
    write_table(Path(path), TIMING_SCHEMA, meta, ("iteration", "seconds"), rows)


@dataclass
class AggregateCurve:
    """Median and quartiles of the regularized return across seeds."""

    iterations: np.ndarray
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    seeds: int
    meta: dict[str, str] = field(default_factory=dict)


def aggregate_returns(
    runs: Sequence[Sequence[IterationMetrics]] | Sequence[np.ndarray],
    meta: Mapping[str, Any] | None = None,
) -> AggregateCurve:
    """Per-iteration median and 25/75 percentiles of the returns of several seeds."""
    curves = [
        np.asarray(run, dtype=float)
        if isinstance(run, np.ndarray)
        else np.array([r.regularized_return for r in run])
        for run in runs
    ]
    lengths = {c.size for c in curves}
    if len(lengths) != 1:
        raise SchemaError(f"Cannot aggregate runs of different lengths {sorted(lengths)}")
    stacked = np.vstack(curves)
    q25, median, q75 = np.percentile(stacked, [25, 50, 75], axis=0)
    return AggregateCurve(
        iterations=np.arange(stacked.shape[1]),
        median=median,
        q25=q25,
        q75=q75,
        seeds=stacked.shape[0],
        meta={k: str(v) for k, v in (meta or {}).items()},
    )


def write_aggregate_csv(curve: AggregateCurve, path: str | Path) -> None:
    rows = [
        [int(k), float(m), float(lo), float(hi), curve.seeds]
        for k, m, lo, hi in zip(curve.iterations, curve.median, curve.q25, curve.q75)
    ]
    write_table(Path(path), AGGREGATE_SCHEMA, curve.meta, AGGREGATE_COLUMNS, rows)


def read_aggregate_csv(path: str | Path) -> AggregateCurve:
    table = read_table(path, AGGREGATE_SCHEMA)
    seeds = table.column("seeds")
    return AggregateCurve(
        iterations=table.column("iteration").astype(int),
        median=table.column("median"),
        q25=table.column("q25"),
        q75=table.column("q75"),
        seeds=int(seeds[0]) if seeds.size else 0,
        meta=dict(table.meta),
    )


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_manifest(manifest: Mapping[str, Any], path: str | Path) -> None:
    """Sorted, indented JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    logger.info(f"Wrote {path}")
