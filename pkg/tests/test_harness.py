"""Tests for experiment files, sweeps, result files and commands."""

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

from lpi_marl.exceptions import ConfigurationError, SchemaError
from lpi_marl.harness import (
    ExperimentConfig,
    aggregate_returns,
    apply_overrides,
    cmd_diagnose,
    cmd_plot,
    cmd_solve_exact,
    cmd_sweep,
    cmd_train,
    load_experiment,
    parse_experiment,
    plot_curves,
    read_aggregate_csv,
    read_metrics_csv,
    read_table,
    resolve_output_dir,
    run_sweep,
    write_manifest,
    write_table,
)
from lpi_marl.harness.orchestrator import build_point_model

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def spreading_config(**sweep) -> ExperimentConfig:
    """Two-agent spreading process, two kappas, two seeds, no exact metrics."""
    return ExperimentConfig.model_validate(
        {
            "name": "tiny-spreading",
            "environment": {"name": "spreading", "gamma": 0.9, "tau": 0.05, "params": {"n": 2}},
            "lpi": {"M": 1, "T": 100, "p_max": 3, "mc_episodes": 2},
            "sweep": {"kappas": [0, 1], "seeds": [0, 1], **sweep},
            "output": {"oracle": False},
        }
    )


def compliant_config() -> ExperimentConfig:
    """The random line of three agents that meets the decay hypotheses."""
    return ExperimentConfig.model_validate(
        {
            "name": "compliant",
            "environment": {
                "name": "random",
                "gamma": 0.5,
                "tau": 435.0,
                "params": {"n": 3, "epsilon_c": 0.125, "r_bar": 1.0, "seed": 7},
            },
            "exact": {"tol": 1e-10},
            "diagnostics": {"mu": 2.0},
        }
    )


class TestSchemas:
    """Tests for the experiment schema."""

    def test_defaults(self):
        config = ExperimentConfig()
        assert config.environment.name == "spreading"
        assert config.base_n == 8
        assert len(config.points()) == 1

    def test_points_order(self):
        config = spreading_config()
        points = config.points()
        assert [(p.kappa, p.seed) for p in points] == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert all(p.beta == p.kappa for p in points)
        assert points[0].tag() == "k0_b0_tau0.05_n2_seed0"
        assert points[0].tag(with_seed=False) == "k0_b0_tau0.05_n2"

    def test_fixed_beta(self):
        config = spreading_config(beta_equals_kappa=False)
        config = config.model_copy(update={"lpi": config.lpi.model_copy(update={"beta": 2})})
        assert {p.beta for p in config.points()} == {2}

    def test_grid(self):
        config = spreading_config(taus=[0.05, 0.1], ns=[2, 3])
        points = config.points()
        assert len(points) == 16
        assert {p.n for p in points} == {2, 3}

    def test_base_n(self):
        assert ExperimentConfig.model_validate({"environment": {"name": "random"}}).base_n == 2
        assert ExperimentConfig.model_validate({"graph": {"n": 5}}).base_n == 5
        file_env = ExperimentConfig.model_validate(
            {"environment": {"name": "file", "params": {"path": "m.yaml"}}}
        )
        assert file_env.base_n is None
        assert file_env.points()[0].tag() == "k1_b1_tau0.05_nfile_seed0"

    def test_lpi_config(self):
        config = spreading_config()
        point = config.points()[3]
        cfg = config.lpi_config(point)
        assert (cfg.kappa, cfg.beta, cfg.seed, cfg.tau) == (1, 1, 1, 0.05)
        assert cfg.M == 1
        assert not cfg.exact_metrics

    def test_build_point_model(self):
        config = spreading_config(ns=[3])
        m = build_point_model(config, config.points()[0])
        assert m.n == 3
        assert m.tau == 0.05


class TestLoader:
    """Tests for parsing experiment files."""

    def test_minimal(self):
        config = parse_experiment("name: x\nlpi:\n  kappa: 2\n")
        assert config.name == "x"
        assert config.lpi.kappa == 2

    def test_empty_document(self):
        assert parse_experiment("").name == "experiment"

    def test_unknown_key_has_line(self):
        with pytest.raises(ConfigurationError) as info:
            parse_experiment("name: x\nlpi:\n  kapa: 2\n")
        assert info.value.field == "lpi.kapa"
        assert info.value.line == 3

    def test_bad_value_has_line(self):
        with pytest.raises(ConfigurationError) as info:
            parse_experiment("environment:\n  name: random\n  gamma: 1.5\n")
        assert info.value.field == "environment.gamma"
        assert info.value.line == 3

    def test_unknown_evaluator(self):
        with pytest.raises(ConfigurationError, match="unknown evaluator"):
            parse_experiment("lpi:\n  eval_kind: monte-carlo\n")

    def test_duplicate_seeds(self):
        with pytest.raises(ConfigurationError) as info:
            parse_experiment("sweep:\n  seeds: [1, 1]\n")
        assert info.value.field == "sweep.seeds"

    def test_file_environment_needs_path(self):
        with pytest.raises(ConfigurationError, match="params.path"):
            parse_experiment("environment:\n  name: file\n")

    def test_edges_kind_needs_edges(self):
        with pytest.raises(ConfigurationError, match="edge list"):
            parse_experiment("graph:\n  kind: edges\n")

    def test_invalid_yaml(self):
        with pytest.raises(ConfigurationError, match="invalid YAML"):
            parse_experiment("lpi: [1, 2\n")

    def test_top_level_must_be_mapping(self):
        with pytest.raises(ConfigurationError, match="mapping"):
            parse_experiment("- 1\n- 2\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="Cannot read"):
            load_experiment(tmp_path / "absent.yaml")

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_configs(self, path):
        config = load_experiment(path)
        assert config.points()


class TestTables:
    """Tests for schema-tagged CSVs."""

    def test_format(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, "test/v1", {"b": 2, "a": "x"}, ("x", "y"), [[1, 0.1], [2, None]])
        assert path.read_text() == "# schema: test/v1\n# a=x\n# b=2\nx,y\n1,0.1\n2,\n"
        table = read_table(path, "test/v1")
        assert table.meta == {"a": "x", "b": "2"}
        assert table.rows == [{"x": 1.0, "y": 0.1}, {"x": 2.0, "y": None}]
        assert np.isnan(table.column("y")[1])

    def test_exact_floats(self, tmp_path):
        path = tmp_path / "t.csv"
        value = 1.0 / 3.0
        write_table(path, "test/v1", {}, ("v",), [[np.float64(value)], [float("inf")]])
        table = read_table(path)
        assert table.rows[0]["v"] == value
        assert table.rows[1]["v"] == float("inf")

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, "test/v1", {}, ("v",), [[1]])
        with pytest.raises(SchemaError, match="expected"):
            read_table(path, "other/v1")

    def test_missing_schema_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("v\n1\n")
        with pytest.raises(SchemaError, match="no schema line"):
            read_table(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("# schema: test/v1\n# a=1\nx,y\n1,2\n3\n")
        with pytest.raises(SchemaError, match=":5:"):
            read_table(path)

    def test_aggregate(self):
        curve = aggregate_returns(
            [np.array([0.0, 1.0]), np.array([2.0, 3.0]), np.array([4.0, 5.0])], {"kappa": 1}
        )
        assert curve.median.tolist() == [2.0, 3.0]
        assert curve.q25.tolist() == [1.0, 2.0]
        assert curve.q75.tolist() == [3.0, 4.0]
        assert curve.seeds == 3
        assert curve.meta == {"kappa": "1"}

    def test_aggregate_lengths_must_match(self):
        with pytest.raises(SchemaError):
            aggregate_returns([np.zeros(2), np.zeros(3)])

    def test_manifest(self, tmp_path):
        path = tmp_path / "m.json"
        write_manifest({"b": np.int64(2), "a": np.array([0.5]), "p": tmp_path}, path)
        assert json.loads(path.read_text()) == {"a": [0.5], "b": 2, "p": str(tmp_path)}
        assert path.read_text().index('"a"') < path.read_text().index('"b"')


class TestOutputDirectory:
    """Tests for output directory resolution."""

    def test_explicit(self, tmp_path):
        assert resolve_output_dir(spreading_config(), tmp_path) == tmp_path

    def test_configured(self):
        config = ExperimentConfig.model_validate({"output": {"directory": "out/here"}})
        assert resolve_output_dir(config) == Path("out/here")

    def test_environment_root(self, monkeypatch, tmp_path):
        monkeypatch.setenv("LPI_OUTPUT_ROOT", str(tmp_path))
        assert resolve_output_dir(spreading_config()) == tmp_path / "tiny-spreading"

    def test_default_root(self, monkeypatch):
        monkeypatch.delenv("LPI_OUTPUT_ROOT", raising=False)
        assert resolve_output_dir(spreading_config()) == Path("results/tiny-spreading")

    def test_seed_override(self):
        config = apply_overrides(spreading_config(), 5)
        assert {p.seed for p in config.points()} == {5}
        assert apply_overrides(config, None) is config


class TestSweep:
    """Tests for running sweep points."""

    async def test_inline(self):
        config = spreading_config()
        results = await run_sweep(config, workers=0)
        assert [r.point for r in results] == config.points()
        assert all(len(r.metrics) == 2 for r in results)

    async def test_executor_matches_inline(self):
        config = spreading_config()
        inline = await run_sweep(config, workers=0)
        with ThreadPoolExecutor(max_workers=2) as pool:
            pooled = await run_sweep(config, executor=pool)
        for a, b in zip(inline, pooled):
            assert a.point == b.point
            assert np.array_equal(a.metrics.returns, b.metrics.returns)

    @pytest.mark.slow
    async def test_process_pool(self):
        config = spreading_config(seeds=[0])
        results = await run_sweep(config, workers=2)
        assert [r.point.kappa for r in results] == [0, 1]


class TestTrainCommand:
    """Tests for train and sweep outputs."""

    def test_files(self, tmp_path):
        summary = cmd_train(spreading_config(), tmp_path, workers=0)
        assert len(summary.results) == 4
        assert len(summary.paths) == 14
        metrics = read_metrics_csv(tmp_path / "metrics_k1_b1_tau0.05_n2_seed0.csv")
        assert metrics.meta["kappa"] == "1"
        assert metrics.column("iteration").tolist() == [0.0, 1.0]
        assert np.isnan(metrics.column("exact_objective")).all()
        aggregate = read_aggregate_csv(tmp_path / "aggregate_k0_b0_tau0.05_n2.csv")
        assert aggregate.seeds == 2
        assert aggregate.iterations.tolist() == [0, 1]
        manifest = json.loads((tmp_path / "manifest_k0_b0_tau0.05_n2_seed1.json").read_text())
        assert manifest["point"]["seed"] == 1
        assert manifest["model"]["name"] == "spreading-n2"

    def test_reruns_are_identical(self, tmp_path):
        cmd_train(spreading_config(), tmp_path / "a", workers=0)
        cmd_train(spreading_config(), tmp_path / "b", workers=0)
        for path in sorted((tmp_path / "a").glob("*")):
            if path.name.startswith("timing_"):
                continue
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes(), path.name

    def test_sweep_draws_chart(self, tmp_path):
        summary = cmd_sweep(spreading_config(), tmp_path, workers=0)
        chart = tmp_path / "chart_tau0.05_n2.svg"
        assert chart in summary.paths
        text = chart.read_text()
        assert "<svg" in text
        assert "kappa=0" in text and "kappa=1" in text


class TestPlotting:
    """Tests for charts."""

    def test_deterministic(self, tmp_path):
        curve = aggregate_returns([np.array([1.0, 2.0, 2.5]), np.array([1.5, 2.5, 3.0])], {"kappa": 0})
        first = plot_curves([curve], tmp_path / "a.svg", title="t")
        second = plot_curves([curve], tmp_path / "b.svg", title="t")
        assert first.read_bytes() == second.read_bytes()

    def test_plot_metrics_files(self, tmp_path):
        cmd_train(spreading_config(), tmp_path, workers=0)
        files = sorted(tmp_path.glob("metrics_*.csv"))
        chart = cmd_plot(files, tmp_path / "plot.svg")
        text = chart.read_text()
        assert "kappa=0" in text and "kappa=1" in text

    def test_rejects_other_tables(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, "test/v1", {}, ("v",), [[1]])
        with pytest.raises(SchemaError, match="cannot plot"):
            cmd_plot([path], tmp_path / "plot.svg")

    def test_needs_files(self, tmp_path):
        with pytest.raises(SchemaError):
            cmd_plot([], tmp_path / "plot.svg")


class TestExactCommands:
    """Tests for solve-exact and diagnose."""

    def test_solve_exact(self, tmp_path):
        paths = cmd_solve_exact(compliant_config(), tmp_path)
        assert {p.name for p in paths} == {
            "v_star.csv",
            "policy_star.txt",
            "gap_table.csv",
            "exact_summary.json",
        }
        table = read_table(tmp_path / "gap_table.csv", "lpi-gap/v1")
        assert table.column("kappa").tolist() == [0.0, 1.0, 2.0]
        gaps = table.column("gap")
        bounds = table.column("bound")
        assert np.all(gaps >= -1e-7)
        assert np.all(gaps <= bounds)
        assert gaps[-1] == pytest.approx(0.0, abs=1e-7)
        summary = json.loads((tmp_path / "exact_summary.json").read_text())
        assert summary["settings"]["tol"] == 1e-10

    def test_diagnose(self, tmp_path):
        paths = cmd_diagnose(compliant_config(), tmp_path)
        names = {p.name for p in paths}
        assert {"c_matrix.csv", "z_policy.csv", "z_q.csv", "h_q.csv"} <= names
        assert (tmp_path / "c_matrix.csv").read_text().startswith("# kind=C\n# mu=2")
        certificates = json.loads((tmp_path / "certificates.json").read_text())["certificates"]
        assert set(certificates) == {"c_matrix", "z_policy", "z_q", "h_q"}
        assert all(entry["tail_bound_holds"] for entry in certificates.values())
        closed = json.loads((tmp_path / "certificates.json").read_text())["closed_class"]
        assert closed["nu"] == 0.5
        assert closed["sigma"] == pytest.approx(5 / 3 / (3 * 435.0))
        assert closed["policy_sigma"] == 0.0
        assert closed["q_nu_bound"] == pytest.approx(1.25)
        assert certificates["z_q"]["nu"] <= closed["q_nu_bound"]
        report = read_table(tmp_path / "truncation_report.csv", "lpi-truncation/v1")
        assert report.column("beta").tolist() == [0.0, 1.0, 2.0]
        assert report.column("empirical")[-1] == pytest.approx(0.0, abs=1e-9)

    def test_diagnose_over_cap(self, tmp_path, caplog):
        paths = cmd_diagnose(compliant_config(), tmp_path, cap_override=10)
        assert {p.name for p in paths} == {"c_matrix.csv", "certificates.json"}
        assert "Skipping exact diagnostics" in caplog.text
