import csv
import json
import subprocess
import sys

import pytest

from rabiesd.cli import EXIT_CONFIG, EXIT_NUMERICAL, build_parser, config_from_args, main, read_config_file
from rabiesd.sweep import ConfigError, Engine, RunConfig


def parse(*argv):
    args = build_parser().parse_args(list(argv))
    return config_from_args(args, args.command)


class TestConfig:
    def test_sweep_default_grid(self):
        cfg = parse("sweep")
        assert cfg.alpha_sq_count == 41 and cfg.alpha_sq is None

    def test_run_is_single(self):
        cfg = parse("run", "--alpha-sq", "0.3", "--engine", "oracle")
        assert cfg.alpha_sq == 0.3 and cfg.alpha_sq_count is None
        assert cfg.engine is Engine.ORACLE

    def test_file_then_flags(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("# comment\nfamily = psi\ngamma-over-lambda = 0.05  # inline\nrenormalize_trace = yes\nt_max_lambda=3\n")
        cfg = parse("run", "--config", str(f), "--t-max-lambda", "2")
        assert cfg.family.value == "psi"
        assert cfg.gamma_over_lambda == 0.05
        assert cfg.renormalize_trace is True
        assert cfg.t_max_lambda == 2.0

    @pytest.mark.parametrize("text", ["nonsense\n", "bogus = 1\n", "n_max = 2.5\n", "off_resonance = maybe\n"])
    def test_bad_file(self, tmp_path, text):
        f = tmp_path / "c.cfg"
        f.write_text(text)
        with pytest.raises(ConfigError):
            read_config_file(f)


class TestMain:
    def test_run_writes_outputs(self, tmp_path, capsys):
        stem = tmp_path / "out" / "r"
        code = main(["run", "--alpha-sq", "0.5", "--t-max-lambda", "0.2", "--output-path", str(stem)])
        assert code == 0
        rows = list(csv.DictReader((tmp_path / "out" / "r.csv").open()))
        assert len(rows) == 21 and float(rows[0]["concurrence"]) == pytest.approx(1.0)
        summary = json.loads((tmp_path / "out" / "r.json").read_text())
        assert RunConfig.from_dict(summary["config"]).alpha_sq == 0.5

    def test_config_error_exit(self, capsys):
        assert main(["run", "--alpha-sq", "2"]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_off_resonance_refused(self):
        assert main(["run", "--omega0-over-lambda", "3", "--omega-over-lambda", "2"]) == EXIT_CONFIG

    def test_numerical_abort_exit(self, tmp_path, capsys):
        argv = ["run", "--gamma-over-lambda", "50", "--dt-lambda", "0.5", "--t-max-lambda", "200"]
        assert main(argv + ["--output-path", str(tmp_path / "x")]) == EXIT_NUMERICAL
        assert "lambda_t=" in capsys.readouterr().err
        assert not (tmp_path / "x.csv").exists()

    def test_events_subcommand(self, tmp_path, capsys):
        stem = tmp_path / "s"
        assert main(["sweep", "--alpha-sq-count", "3", "--t-max-lambda", "2", "--output-path", str(stem)]) == 0
        capsys.readouterr()
        assert main(["events", str(stem) + ".csv"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert [e["alpha_sq"] for e in out] == [0.0, 0.5, 1.0]
        assert out[1]["death_time"] is not None
        emitted = json.loads((tmp_path / "s.json").read_text())["events"]
        assert out[1]["death_time"] == emitted[1]["death_time"]

    def test_events_missing_file(self, tmp_path):
        assert main(["events", str(tmp_path / "none.csv")]) == EXIT_CONFIG

    def test_oracle_check(self, tmp_path):
        stem = tmp_path / "oc"
        argv = ["oracle-check", "--alpha-sq", "0.5", "--t-max-lambda", "1", "--n-max", "6", "--output-path", str(stem)]
        assert main(argv) == 0
        check = json.loads((tmp_path / "oc.json").read_text())["checks"][0]
        assert check["converged"] and check["max_concurrence_shift"] <= 1e-4
        assert 0 <= check["top_fock_population"] < 1e-3
        assert check["max_joint_trace_drift"] <= 1e-8

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "rabiesd", "run", "--t-max-lambda", "0.1", "--output-path", str(tmp_path / "m")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "m.csv").exists()
