"""CLI surface: run, bench, ablate, report."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from cloudburst.cli import main
from cloudburst.config import save_manifest
from conftest import small_sim_config


@pytest.fixture
def runner():
    return CliRunner()


def small_manifest(path: Path, seed=3, mode="mas") -> Path:
    save_manifest(small_sim_config(), seed, path, mode=mode)
    return path


class TestRun:
    def test_run_twice_identical_digests(self, runner, tmp_path):
        manifest = small_manifest(tmp_path / "m.json")
        digests = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            res = runner.invoke(main, ["run", "--config", str(manifest),
                                       "--seed", "7", "--out", str(out)])
            assert res.exit_code == 0, res.output
            digest = json.loads((out / "mas-seed7" / "run_digest.json").read_text())
            digests.append(digest["run_digest"])
            audit = (out / "mas-seed7" / "audit.ndjson").read_bytes()
            digests.append(audit)
        assert digests[0] == digests[2]
        assert digests[1] == digests[3]

    def test_baseline_mode_flags_in_audit_header(self, runner, tmp_path):
        manifest = small_manifest(tmp_path / "m.json")
        out = tmp_path / "out"
        res = runner.invoke(main, ["run", "--config", str(manifest),
                                   "--seed", "2", "--mode", "baseline",
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        run_dir = out / "baseline-seed2"
        first = json.loads((run_dir / "audit.ndjson").read_text()
                           .splitlines()[0])
        assert first["subject"] == "run_start"
        toggles = first["new"]["toggles"]
        assert toggles["initiation"] is False
        assert toggles["learning"] is False
        assert json.loads((run_dir / "manifest.json").read_text())["mode"] == "baseline"

    def test_malformed_config_no_partial_artifacts(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "out"
        res = runner.invoke(main, ["run", "--config", str(bad),
                                   "--out", str(out)])
        assert res.exit_code != 0
        assert not out.exists()

    def test_unknown_mode_rejected(self, runner, tmp_path):
        res = runner.invoke(main, ["run", "--mode", "nonsense",
                                   "--out", str(tmp_path)])
        assert res.exit_code != 0


class TestBench:
    def test_empty_batch_rejected(self, runner):
        res = runner.invoke(main, ["bench", "--events", "0"])
        assert res.exit_code != 0
        assert "empty batch" in res.output

    def test_unknown_ablation_component_rejected(self, runner):
        res = runner.invoke(main, ["ablate", "nonsense"])
        assert res.exit_code != 0


class TestReport:
    def test_report_prints_metrics_and_audit_summary(self, runner, tmp_path):
        manifest = small_manifest(tmp_path / "m.json")
        out = tmp_path / "out"
        res = runner.invoke(main, ["run", "--config", str(manifest),
                                   "--seed", "4", "--out", str(out)])
        assert res.exit_code == 0, res.output
        res = runner.invoke(main, ["report", "--run",
                                   str(out / "mas-seed4")])
        assert res.exit_code == 0, res.output
        assert "metrics:" in res.output
        assert "audit chain intact: True" in res.output
