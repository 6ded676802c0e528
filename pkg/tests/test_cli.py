"""Tests for the ``lpi`` command line."""

import pytest

from lpi_marl import cli
from lpi_marl.cli import EXIT_LPI_ERROR, EXIT_OK, EXIT_UNEXPECTED, build_parser, main

TINY = """\
name: tiny
environment:
  name: spreading
  gamma: 0.9
  tau: 0.05
  params:
    n: 2
lpi:
  M: 1
  T: 100
  p_max: 3
  mc_episodes: 2
sweep:
  kappas: [0, 1]
  seeds: [0, 1]
output:
  oracle: false
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return path


class TestParser:
    def test_train_flags(self):
        args = build_parser().parse_args(
            ["train", "-c", "x.yaml", "--seed-override", "3", "--workers", "0", "--cap-override", "64"]
        )
        assert args.command == "train"
        assert args.seed_override == 3
        assert args.workers == 0
        assert args.cap_override == 64
        assert args.log_level == "INFO"

    def test_plot_takes_files(self):
        args = build_parser().parse_args(["plot", "a.csv", "b.csv", "-o", "out.svg"])
        assert [p.name for p in args.csv] == ["a.csv", "b.csv"]

    def test_solve_exact_has_no_seed_flag(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["solve-exact", "-c", "x.yaml", "--seed-override", "1"])

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_config_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["train"])


class TestExitCodes:
    def test_train(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert main(["train", "-c", str(tiny_config), "-o", str(out), "--seed-override", "4"]) == EXIT_OK
        assert sorted(p.name for p in out.glob("metrics_*.csv")) == [
            "metrics_k0_b0_tau0.05_n2_seed4.csv",
            "metrics_k1_b1_tau0.05_n2_seed4.csv",
        ]

    def test_plot(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        assert main(["train", "-c", str(tiny_config), "-o", str(out), "--workers", "0"]) == EXIT_OK
        files = [str(p) for p in sorted(out.glob("aggregate_*.csv"))]
        assert main(["plot", *files, "-o", str(tmp_path / "charts")]) == EXIT_OK
        assert (tmp_path / "charts" / "chart.svg").exists()

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("lpi:\n  kapa: 1\n")
        assert main(["train", "-c", str(path), "-o", str(tmp_path)]) == EXIT_LPI_ERROR

    def test_missing_config(self, tmp_path):
        assert main(["diagnose", "-c", str(tmp_path / "absent.yaml")]) == EXIT_LPI_ERROR

    def test_missing_model_file(self, tmp_path):
        path = tmp_path / "file.yaml"
        path.write_text(f"environment:\n  name: file\n  params:\n    path: {tmp_path / 'absent.yaml'}\n")
        assert main(["solve-exact", "-c", str(path), "-o", str(tmp_path)]) == EXIT_LPI_ERROR

    def test_cap_exceeded(self, tiny_config, tmp_path):
        args = ["solve-exact", "-c", str(tiny_config), "-o", str(tmp_path), "--cap-override", "4"]
        assert main(args) == EXIT_LPI_ERROR

    def test_unexpected_failure(self, tiny_config, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli, "cmd_train", boom)
        assert main(["train", "-c", str(tiny_config), "-o", str(tmp_path)]) == EXIT_UNEXPECTED
