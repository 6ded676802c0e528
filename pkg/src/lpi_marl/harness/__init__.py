"""Experiment harness: config files, sweeps, result files and charts."""

from lpi_marl.harness.commands import (
    TrainSummary,
    apply_overrides,
    cmd_diagnose,
    cmd_plot,
    cmd_solve_exact,
    cmd_sweep,
    cmd_train,
    resolve_output_dir,
)
from lpi_marl.harness.io import (
    AggregateCurve,
    CsvTable,
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
from lpi_marl.harness.loader import load_experiment, parse_experiment
from lpi_marl.harness.orchestrator import PointResult, build_point_model, run_sweep
from lpi_marl.harness.plotting import plot_curves
from lpi_marl.harness.schemas import ExperimentConfig, SweepPoint

__all__ = [
    # Config files
    "ExperimentConfig",
    "SweepPoint",
    "load_experiment",
    "parse_experiment",
    # Sweeps
    "PointResult",
    "build_point_model",
    "run_sweep",
    # Result files
    "AggregateCurve",
    "CsvTable",
    "aggregate_returns",
    "read_aggregate_csv",
    "read_metrics_csv",
    "read_table",
    "write_aggregate_csv",
    "write_manifest",
    "write_metrics_csv",
    "write_table",
    "write_timing_csv",
    "plot_curves",
    # Commands
    "TrainSummary",
    "apply_overrides",
    "cmd_diagnose",
    "cmd_plot",
    "cmd_solve_exact",
    "cmd_sweep",
    "cmd_train",
    "resolve_output_dir",
]
