"""Tests for the padam-bench command line."""

import json

import pytest

from padambench import cli
from padambench.cli import main

QUICK = ["run", "--problem", "quadratic", "--steps", "100", "--seeds", "2"]


class TestCommands:
    """Tests for the list-presets and selftest commands."""

    def test_list_presets(self, capsys):
        assert main(["list-presets"]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "heat_dkm-desk" in out
        assert "gauss_density" in out

    def test_selftest(self, capsys):
        assert main(["selftest"]) == cli.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines
        assert all(line.startswith("ok") for line in lines)

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert "padam-bench" in capsys.readouterr().out


class TestRun:
    """Tests for padam-bench run."""

    def test_writes_outputs(self, tmp_path, capsys):
        code = main(QUICK + ["--optimizer", "padam3", "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        assert (tmp_path / "series.csv").exists()
        aggregate = json.loads((tmp_path / "aggregate.json").read_text())
        assert aggregate["config_echo"]["optimizer"] == "padam3"
        out = capsys.readouterr().out
        assert "quadratic/padam3: final mean error" in out
        assert "padam3-raw" in out

    def test_reruns_are_byte_identical(self, tmp_path):
        for name in ("first", "second"):
            assert main(QUICK + ["--out", str(tmp_path / name)]) == cli.EXIT_OK
        for name in ("series.csv", "aggregate.json"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"problem": "quadratic", "steps": 50, "seeds": 1}))
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == cli.EXIT_OK
        aggregate = json.loads((tmp_path / "out" / "aggregate.json").read_text())
        assert aggregate["config_echo"]["steps"] == 50

    def test_missing_out(self, capsys):
        assert main(QUICK) == cli.EXIT_USAGE
        assert "--out" in capsys.readouterr().err

    def test_missing_problem(self, tmp_path, capsys):
        assert main(["run", "--out", str(tmp_path)]) == cli.EXIT_USAGE
        assert "problem" in capsys.readouterr().err

    def test_invalid_value(self, tmp_path):
        assert main(QUICK + ["--batch", "0", "--out", str(tmp_path)]) == cli.EXIT_USAGE

    @pytest.mark.parametrize(
        "problem, flag, value",
        [
            ("quadratic", "--dim", "0"),
            ("heat_dkm", "--horizon", "-1"),
            ("gauss_density", "--sigma2", "0"),
            ("polyreg", "--noise-var", "-0.5"),
        ],
    )
    def test_problem_option_out_of_range(self, tmp_path, capsys, problem, flag, value):
        argv = ["run", "--problem", problem, "--steps", "10", flag, value, "--out", str(tmp_path)]
        assert main(argv) == cli.EXIT_USAGE
        assert flag.lstrip("-").replace("-", "_") in capsys.readouterr().err
        assert not (tmp_path / "series.csv").exists()

    def test_padam_without_channels(self, tmp_path):
        assert main(QUICK + ["--optimizer", "padam", "--out", str(tmp_path)]) == cli.EXIT_USAGE

    def test_divergence_exit_code(self, tmp_path, capsys):
        code = main(QUICK + ["--optimizer", "sgd", "--lr", "1e6", "--out", str(tmp_path)])
        assert code == cli.EXIT_DIVERGED
        assert "2 seed(s) diverged" in capsys.readouterr().err
        assert "diverged" in (tmp_path / "series.csv").read_text()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(QUICK + ["--out", str(blocker)]) == cli.EXIT_ERROR

    @pytest.mark.parametrize(
        "argv",
        [
            ["run", "--problem", "mnist"],
            ["run", "--optimizer", "lion"],
            ["run", "--steps", "many"],
            ["frobnicate"],
            ["-v", "-q", "list-presets"],
            [],
        ],
    )
    def test_argparse_errors(self, argv):
        with pytest.raises(SystemExit) as excinfo:
            main(argv)
        assert excinfo.value.code == 2
