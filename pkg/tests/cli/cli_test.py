from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner, Result

from counter_attest.cli_main import (
    EXIT_DIGEST_MISMATCH,
    EXIT_REJECTED,
    EXIT_USER_ERROR,
    cli_main,
)

TESTS_ROOT = Path(__file__).parents[1]


def invoke(*args: str | Path) -> Result:
    return CliRunner().invoke(cli_main, [str(a) for a in args])


@pytest.fixture(name="fig2_files")
def fixture_fig2_files(tmp_path: Path) -> tuple[Path, Path, Path]:
    """CFG, segment database and measurement log of the fig2 demo."""
    assert invoke("demo", "fig2", "--out", tmp_path).exit_code == 0
    cfg_path = tmp_path / "fig2.cfg.json"
    db_path = tmp_path / "fig2.db.json"
    log_path = tmp_path / "fig2.measurements.json"
    result = invoke("preprocess", "--cfg", cfg_path, "--out", db_path)
    assert result.exit_code == 0, result.output
    result = invoke(
        "simulate",
        "--cfg",
        cfg_path,
        "--trace",
        tmp_path / "fig2.trace.json",
        "--out",
        log_path,
    )
    assert result.exit_code == 0, result.output
    return cfg_path, db_path, log_path


class TestCli:
    def test_demo(self, tmp_path: Path) -> None:
        result = invoke("demo", "hello", "--out", tmp_path)
        assert result.exit_code == 0
        trace = json.loads((tmp_path / "hello.trace.json").read_text())
        assert trace["steps"][0] == "main_entry"

    def test_verify_accepts(self, fig2_files: tuple[Path, Path, Path]) -> None:
        cfg_path, db_path, log_path = fig2_files
        log = json.loads(log_path.read_text())
        assert log["counters"] == [
            "instructions_retired",
            "cond_branches_retired+jal_retired+jalr_retired",
            "int_loads_retired",
        ]
        result = invoke("verify", "--db", db_path, "--measurements", log_path, "--cfg", cfg_path)
        assert result.exit_code == 0, result.output
        assert "verdict: accepted" in result.output

    def test_verify_rejects_tampered_log(
        self, tmp_path: Path, fig2_files: tuple[Path, Path, Path]
    ) -> None:
        _, db_path, log_path = fig2_files
        log = json.loads(log_path.read_text())
        log["measurements"][0]["delta"][0] += 1
        tampered = tmp_path / "tampered.json"
        tampered.write_text(json.dumps(log))
        result = invoke("verify", "--db", db_path, "--measurements", tampered)
        assert result.exit_code == EXIT_REJECTED
        assert "rejected at segment 0" in result.output

    def test_verify_foreign_log(
        self, tmp_path: Path, fig2_files: tuple[Path, Path, Path]
    ) -> None:
        _, db_path, _ = fig2_files
        assert invoke("demo", "hello", "--out", tmp_path).exit_code == 0
        hello_log = tmp_path / "hello.measurements.json"
        result = invoke(
            "simulate",
            "--cfg",
            tmp_path / "hello.cfg.json",
            "--trace",
            tmp_path / "hello.trace.json",
            "--out",
            hello_log,
        )
        assert result.exit_code == 0, result.output
        result = invoke("verify", "--db", db_path, "--measurements", hello_log)
        assert result.exit_code == EXIT_DIGEST_MISMATCH

    def test_simulate_unknown_counter(
        self, tmp_path: Path, fig2_files: tuple[Path, Path, Path]
    ) -> None:
        cfg_path, _, _ = fig2_files
        result = invoke(
            "simulate",
            "--cfg",
            cfg_path,
            "--trace",
            tmp_path / "fig2.trace.json",
            "--counters",
            "no_such_counter",
        )
        assert result.exit_code == EXIT_USER_ERROR

    def test_invalid_cfg(self, tmp_path: Path) -> None:
        cfg_path = tmp_path / "broken.cfg.json"
        cfg_path.write_text("{}")
        result = invoke("preprocess", "--cfg", cfg_path, "--out", tmp_path / "db.json")
        assert result.exit_code == EXIT_USER_ERROR

    def test_protocol_run(self) -> None:
        scenario = TESTS_ROOT / "protocol" / "test_assets" / "happy_path.json"
        assert scenario.exists()
        result = invoke("protocol", "run", "--scenario", scenario)
        assert result.exit_code == 0, result.output
        assert "context_switches" in result.output

    def test_protocol_explore(self) -> None:
        result = invoke("protocol", "explore", "--depth", "4")
        assert result.exit_code == 0, result.output

    def test_attack_eval(self) -> None:
        root = TESTS_ROOT / "manifest" / "test_assets" / "experiment"
        result = invoke("attack-eval", "walk", "--root", root, "--reps", "3")
        assert result.exit_code == 0, result.output
        assert "walk" in result.output

    def test_attack_eval_unknown_manifest(self) -> None:
        root = TESTS_ROOT / "manifest" / "test_assets" / "experiment"
        result = invoke("attack-eval", "missing", "--root", root)
        assert result.exit_code == 2


class TestReproducibility:
    def _pipeline(self, out_dir: Path) -> dict[str, bytes]:
        """Machine-readable outputs of one full run, keyed by command."""
        out_dir.mkdir()
        assert invoke("demo", "crypto", "--out", out_dir).exit_code == 0
        cfg_path = out_dir / "crypto.cfg.json"
        outputs: dict[str, bytes] = {}

        result = invoke(
            "preprocess", "--cfg", cfg_path, "--out", out_dir / "db.json", "--format", "json"
        )
        assert result.exit_code == 0, result.output
        outputs["preprocess"] = result.stdout_bytes
        outputs["db.json"] = (out_dir / "db.json").read_bytes()

        result = invoke("walk", "--cfg", cfg_path, "--seed", "11", "--out", out_dir / "walk.json")
        assert result.exit_code == 0, result.output
        outputs["walk.json"] = (out_dir / "walk.json").read_bytes()

        result = invoke(
            "simulate",
            "--cfg",
            cfg_path,
            "--trace",
            out_dir / "walk.json",
            "--out",
            out_dir / "measurements.json",
        )
        assert result.exit_code == 0, result.output
        outputs["measurements.json"] = (out_dir / "measurements.json").read_bytes()

        result = invoke(
            "verify",
            "--db",
            out_dir / "db.json",
            "--measurements",
            out_dir / "measurements.json",
            "--format",
            "json",
        )
        assert result.exit_code == 0, result.output
        outputs["verify"] = result.stdout_bytes

        root = TESTS_ROOT / "manifest" / "test_assets" / "experiment"
        result = invoke("attack-eval", "loop", "--root", root, "--reps", "5", "--format", "json")
        assert result.exit_code == 0, result.output
        outputs["attack-eval"] = result.stdout_bytes
        return outputs

    def test_reruns_are_byte_identical(self, tmp_path: Path) -> None:
        first = self._pipeline(tmp_path / "first")
        second = self._pipeline(tmp_path / "second")
        assert first.keys() == second.keys()
        for name in first:
            assert first[name], name
            assert first[name] == second[name], name
        report = json.loads(first["verify"])
        assert report["summary"]["verdict"] == "accepted"
        assert "elapsed" not in report["segments"][0]
