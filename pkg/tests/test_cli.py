"""Command-line surface: commands, file formats, and exit codes."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sgl.cli import main
from sgl.games import (
    bach_stravinsky,
    blotto_4_3,
    game_to_dict,
    load_game,
    rps,
    save_game,
)
from sgl.restrictions import save_spaces, ConvexHullGlobal, FullSpace
from sgl.games import Policy


@pytest.fixture
def rps_file(tmp_path):
    path = tmp_path / "rps.json"
    save_game(rps(), path)
    return path


@pytest.fixture
def bos_file(tmp_path):
    path = tmp_path / "bos.json"
    save_game(bach_stravinsky(), path)
    return path


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


class TestValidate:
    def test_valid_game(self, capsys, rps_file):
        code, payload = run_cli(capsys, "validate", str(rps_file))
        assert code == 0
        assert payload == {"valid": True, "violations": []}

    def test_malformed_probabilities_exit_2(self, capsys, tmp_path, rps_file):
        data = json.loads(rps_file.read_text())
        data["transitions"]["s0"]["0,0"] = {"s0": 0.9}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(data))
        code = main(["validate", str(bad)])
        assert code == 2

    def test_missing_file_exit_2(self):
        assert main(["validate", "/nonexistent/game.json"]) == 2


class TestSolve:
    def test_minimax_rps(self, capsys, rps_file):
        code, payload = run_cli(capsys, "solve", "minimax", str(rps_file))
        assert code == 0
        assert payload["value"] == pytest.approx(0.0, abs=1e-9)
        assert payload["row"] == pytest.approx([1 / 3] * 3, abs=1e-9)

    def test_minimax_general_sum_exit_3(self, bos_file):
        assert main(["solve", "minimax", str(bos_file)]) == 3

    def test_support_enum_bos(self, capsys, bos_file):
        code, payload = run_cli(capsys, "solve", "support-enum", str(bos_file))
        assert code == 0
        assert payload["count"] == 3
        assert payload["degenerate"] is False

    def test_restricted_with_space_file(self, capsys, tmp_path, rps_file):
        game = rps()
        hull = ConvexHullGlobal((Policy([[0.5, 0.5, 0]]), Policy([[0, 0.5, 0.5]])))
        space_path = tmp_path / "col_space.json"
        from sgl.restrictions import space_to_dict

        space_path.write_text(json.dumps(space_to_dict(hull, game.states)))
        code, payload = run_cli(
            capsys, "solve", "restricted", str(rps_file), "--space-1", str(space_path)
        )
        assert code == 0
        assert payload["value"] == pytest.approx(1 / 6, abs=1e-9)
        assert payload["certificate"]["verdict"] is True
        assert payload["joint_policy"][1]["s0"] == pytest.approx(
            [1 / 3, 0.5, 1 / 6], abs=1e-9
        )


class TestCheck:
    def test_pure_rock_fails(self, capsys, tmp_path, rps_file):
        policy_path = tmp_path / "rock_rock.json"
        policy_path.write_text(
            json.dumps([{"s0": [1, 0, 0]}, {"s0": [1, 0, 0]}])
        )
        code, payload = run_cli(
            capsys,
            "check",
            "--game", str(rps_file),
            "--policy", str(policy_path),
            "--eps", "1e-9",
        )
        assert code == 0
        assert payload["verdict"] is False
        assert payload["gaps"] == pytest.approx([1.0, 1.0], abs=1e-9)

    def test_spaces_file(self, capsys, tmp_path, rps_file):
        game = rps()
        spaces_path = tmp_path / "spaces.json"
        save_spaces([FullSpace(1, 3), FullSpace(1, 3)], game, spaces_path)
        policy_path = tmp_path / "uniform.json"
        uniform = [1 / 3, 1 / 3, 1 / 3]
        policy_path.write_text(json.dumps([{"s0": uniform}, {"s0": uniform}]))
        code, payload = run_cli(
            capsys,
            "check",
            "--game", str(rps_file),
            "--policy", str(policy_path),
            "--spaces", str(spaces_path),
            "--eps", "1e-8",
        )
        assert code == 0
        assert payload["verdict"] is True

    def test_policy_outside_space_exit_2(self, tmp_path, rps_file):
        game = rps()
        hull = ConvexHullGlobal((Policy([[0.5, 0.5, 0]]),))
        spaces_path = tmp_path / "spaces.json"
        save_spaces([hull, FullSpace(1, 3)], game, spaces_path)
        policy_path = tmp_path / "uniform.json"
        uniform = [1 / 3, 1 / 3, 1 / 3]
        policy_path.write_text(json.dumps([{"s0": uniform}, {"s0": uniform}]))
        code = main(
            [
                "check",
                "--game", str(rps_file),
                "--policy", str(policy_path),
                "--spaces", str(spaces_path),
            ]
        )
        assert code == 2


class TestSweep:
    def test_deterministic_rps_sweep(self, capsys, tmp_path, rps_file):
        game = rps()
        spaces_path = tmp_path / "spaces.json"
        from sgl.restrictions import DeterministicOnly

        save_spaces(
            [DeterministicOnly(1, 3), DeterministicOnly(1, 3)], game, spaces_path
        )
        out_csv = tmp_path / "sweep.csv"
        code, payload = run_cli(
            capsys,
            "sweep",
            "--game", str(rps_file),
            "--spaces", str(spaces_path),
            "--resolution", "1.0",
            "--eps", "1e-9",
            "--out", str(out_csv),
        )
        assert code == 0
        assert payload["min_max_gap"] == pytest.approx(1.0, abs=1e-9)
        assert payload["epsilon_equilibrium_found"] is False
        with open(out_csv) as fh:
            assert len(list(csv.reader(fh))) == 10


class TestLearn:
    def test_short_run_writes_csv(self, capsys, tmp_path, rps_file):
        out_csv = tmp_path / "traj.csv"
        code, payload = run_cli(
            capsys,
            "learn",
            "--game", str(rps_file),
            "--algo", "wolf-phc",
            "--iters", "2000",
            "--seed", "7",
            "--out", str(out_csv),
        )
        assert code == 0
        assert payload["iterations"] == 2000
        assert out_csv.exists()
        for row in payload["final_policies"]:
            assert sum(row) == pytest.approx(1.0, abs=1e-12)

    def test_config_file(self, capsys, tmp_path, rps_file):
        from sgl.learners import WolfPhcConfig

        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(WolfPhcConfig(lose_ratio=2.0).to_dict()))
        code, _ = run_cli(
            capsys,
            "learn",
            "--game", str(rps_file),
            "--config", str(cfg_path),
            "--iters", "500",
            "--seed", "1",
        )
        assert code == 0

    def test_non_hull_space_exit_3(self, tmp_path, rps_file):
        spaces_path = tmp_path / "space.json"
        spaces_path.write_text(json.dumps({"variant": "state_uniform"}))
        code = main(
            [
                "learn",
                "--game", str(rps_file),
                "--iters", "100",
                "--seed", "0",
                "--space-0", str(spaces_path),
            ]
        )
        assert code == 3


class TestReproduce:
    def test_fact1(self, capsys, tmp_path):
        code, _ = run_cli(
            capsys, "reproduce", "fact1", "--out", str(tmp_path / "fact1")
        )
        assert code == 0
        summary = json.loads((tmp_path / "fact1" / "summary.json").read_text())
        assert summary["profiles"] == 9
        assert summary["equilibria"] == 0
        assert summary["min_max_gap"] == pytest.approx(1.0, abs=1e-9)

    def test_bos(self, capsys, tmp_path):
        code, _ = run_cli(
            capsys, "reproduce", "bos-equilibria", "--out", str(tmp_path / "bos")
        )
        assert code == 0
        summary = json.loads((tmp_path / "bos" / "summary.json").read_text())
        assert summary["count"] == 3

    def test_small_learning_run_files(self, capsys, tmp_path):
        out = tmp_path / "rps"
        code, _ = run_cli(
            capsys,
            "reproduce", "rps",
            "--iters", "2000",
            "--seeds", "2",
            "--out", str(out),
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["runs"]) == 2
        assert (out / "trajectory_seed0.csv").exists()
        assert (out / "trajectory_seed1.csv").exists()
        assert (out / "plot_player0.dat").exists()
        assert "plot" in (out / "plot.gp").read_text()

    def test_unknown_name_exit_2(self):
        # argparse rejects names outside the experiment list
        with pytest.raises(SystemExit) as exc:
            main(["reproduce", "mystery"])
        assert exc.value.code == 2


class TestEnvironment:
    def test_bad_log_level_exit_2(self, monkeypatch, rps_file):
        monkeypatch.setenv("SGL_LOG_LEVEL", "verbose")
        assert main(["validate", str(rps_file)]) == 2

    def test_console_script_installed(self, rps_file):
        result = subprocess.run(
            ["sgl", "solve", "minimax", str(rps_file)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert json.loads(result.stdout)["value"] == pytest.approx(0.0, abs=1e-9)


def test_round_trip_game_written_by_tool(tmp_path):
    game = blotto_4_3()
    path = tmp_path / "blotto.json"
    save_game(game, path)
    loaded = load_game(path)
    assert game_to_dict(loaded) == game_to_dict(game)
