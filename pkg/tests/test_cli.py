import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from qshaping.harness.cli import main
from qshaping.harness.emit import recompute_summary, stored_summary

from validator_fixtures import DEFECTS, VALID

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
FAILING = json.dumps({"kind": "subprocess",
                      "command": [sys.executable, "-c", "import sys; sys.exit(7)"]})


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "compare" in capsys.readouterr().out


def test_unknown_subcommand():
    assert main(["frobnicate"]) == 2


class TestTrain:
    def test_vanilla(self, tmp_path, capsys):
        assert main(["train", "--env", "ChainWalk", "--steps", "10000", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "vanilla_seed0.csv").read_text().count("\n") == 3
        assert json.loads((tmp_path / "events.json").read_text()) == []
        assert "vanilla" in capsys.readouterr().out

    def test_shaped_records_event(self, tmp_path):
        heuristic = json.dumps({"kind": "oracle", "mode": "exact"})
        code = main(["train", "--env", "GridWorld", "--steps", "5000", "--shape",
                     "--heuristic", heuristic, "--out", str(tmp_path), "--no-figures"])
        assert code == 0
        events = json.loads((tmp_path / "events.json").read_text())
        assert events[0]["kind"] == "shape" and events[0]["step"] == 5000
        assert not list(tmp_path.glob("*.svg"))

    def test_unknown_env(self, tmp_path):
        assert main(["train", "--env", "Nope", "--steps", "10", "--out", str(tmp_path)]) == 2

    def test_missing_steps(self, tmp_path):
        assert main(["train", "--env", "GridWorld", "--out", str(tmp_path)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2

    def test_bad_env_params(self, tmp_path):
        assert main(["train", "--env", "GridWorld", "--env-params", "{oops",
                     "--steps", "10", "--out", str(tmp_path)]) == 2

    def test_provider_failure(self, tmp_path):
        code = main(["train", "--env", "GridWorld", "--steps", "5000", "--shape",
                     "--heuristic", FAILING, "--out", str(tmp_path)])
        assert code == 3

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        code = main(["train", "--env", "ChainWalk", "--steps", "5000",
                     "--out", str(blocker / "out")])
        assert code == 4


def test_population(tmp_path):
    code = main(["population", "--config", str(CONFIGS / "gridworld_population.json"),
                 "--num-agents", "4", "--keep", "2", "--steps", "20000",
                 "--out", str(tmp_path), "--no-figures"])
    assert code == 0
    report = json.loads((tmp_path / "population.json").read_text())
    assert len(report["retained"]) == 2
    assert len(list((tmp_path / "agents").glob("agent*.csv"))) == 4


def test_population_without_provider(tmp_path):
    assert main(["population", "--env", "GridWorld", "--out", str(tmp_path)]) == 2


class TestOracle:
    def test_chain(self, tmp_path):
        out = tmp_path / "q.json"
        assert main(["oracle", "--env", "ChainWalk", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["q"]) == 5 and doc["iterations"] > 0

    def test_stdout(self, capsys):
        assert main(["oracle", "--env", "GridWorld"]) == 0
        assert len(json.loads(capsys.readouterr().out)["policy"]) == 16

    def test_continuous_rejected(self):
        assert main(["oracle", "--env", "PointMassReach"]) == 2


class TestHeuristic:
    def test_validate_pass(self, tmp_path):
        src = tmp_path / "answer.txt"
        src.write_text(json.dumps(VALID))
        out = tmp_path / "report.json"
        assert main(["heuristic", "validate", "--env", "PointMassReach",
                     "--input", str(src), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["score"] == 100.0

    def test_validate_defect(self, tmp_path):
        src = tmp_path / "answer.txt"
        src.write_text(DEFECTS["bug_free"])
        assert main(["heuristic", "validate", "--env", "PointMassReach", "--input", str(src)]) == 3

    def test_materialize(self, tmp_path):
        src = tmp_path / "rules.json"
        src.write_text(json.dumps(VALID))
        out = tmp_path / "hs.json"
        assert main(["heuristic", "materialize", "--env", "PointMassReach", "--input", str(src),
                     "--seed", "1", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["good"]) + len(doc["bad"]) == 20

    def test_fetch_subprocess(self, tmp_path, capsys):
        cfg = json.dumps({"kind": "subprocess",
                          "command": [sys.executable, "-c", "print('hello')"]})
        assert main(["heuristic", "fetch", "--env", "GridWorld", "--heuristic", cfg]) == 0
        assert capsys.readouterr().out.strip() == "hello"

    def test_fetch_failure(self):
        assert main(["heuristic", "fetch", "--env", "GridWorld", "--heuristic", FAILING]) == 3

    def test_missing_input(self):
        assert main(["heuristic", "validate", "--env", "GridWorld"]) == 2


class TestCompareAndPlot:
    def test_compare_round_trip(self, tmp_path):
        out = tmp_path / "cmp"
        assert main(["compare", "--config", str(CONFIGS / "smoke_compare.json"),
                     "--out", str(out)]) == 0
        assert recompute_summary(out) == stored_summary(out)
        assert (out / "learning_curves.svg").exists() and (out / "improvement.svg").exists()

    def test_compare_without_baseline(self, tmp_path):
        cfg = json.loads((CONFIGS / "smoke_compare.json").read_text())
        cfg["arms"][0]["baseline"] = False
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        assert main(["compare", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_plot(self, tmp_path):
        main(["train", "--env", "ChainWalk", "--steps", "10000", "--out", str(tmp_path),
              "--no-figures"])
        svg = tmp_path / "fig.svg"
        assert main(["plot", str(tmp_path / "vanilla_seed0.csv"), "--out", str(svg)]) == 0
        assert svg.read_bytes().startswith(b"<?xml")

    def test_plot_missing_csv(self, tmp_path):
        assert main(["plot", str(tmp_path / "x.csv"), "--out", str(tmp_path / "f.svg")]) == 2


@pytest.mark.skipif(shutil.which("qshape") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["qshape", "oracle", "--env", "ChainWalk"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["q"]
