import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from clebsch_mhd.cli import EXIT_ABORTED, EXIT_BAD_INPUT, EXIT_CHECK_FAILED, EXIT_OK, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SMALL = {"n": 8, "n_steps": 10, "sample_every": 5, "dt": 0.005}


def write_config(tmp_path, **entries):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({**SMALL, **entries}))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestInputErrors:
    def test_missing_config(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_BAD_INPUT
        assert "config file not found" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_BAD_INPUT

    def test_invalid_value(self, tmp_path):
        assert main(["simulate", "--config", write_config(tmp_path, dt=-1.0), "--out", str(tmp_path)]) == EXIT_BAD_INPUT

    def test_unknown_key(self, tmp_path):
        assert main(["simulate", "--config", write_config(tmp_path, steps=3), "--out", str(tmp_path)]) == EXIT_BAD_INPUT

    def test_unknown_subcommand_and_flag(self):
        assert main(["dance"]) == EXIT_BAD_INPUT
        assert main(["verify", "--frobnicate"]) == EXIT_BAD_INPUT

    def test_unknown_suite(self, tmp_path):
        assert main(["verify", "--suite", "nope", "--out", str(tmp_path)]) == EXIT_BAD_INPUT

    def test_unknown_generator(self, tmp_path):
        assert main(["flow", "--generator", "C9", "--out", str(tmp_path)]) == EXIT_BAD_INPUT

    def test_bad_substeps(self, tmp_path):
        assert main(["flow", "--generator", "C1", "--substeps", "0", "--out", str(tmp_path)]) == EXIT_BAD_INPUT


class TestSimulate:
    def test_static_run_has_constant_invariants(self, tmp_path):
        out = tmp_path / "run"
        assert main(["simulate", "--config", write_config(tmp_path, recipe="static"), "--out", str(out)]) == EXIT_OK
        rows = read_csv(out / "invariants.csv")
        assert rows[0] == ["time", "H", "C1", "C2", "C3"]
        assert [r[0] for r in rows[1:]] == ["0.0", "0.025", "0.05"]
        assert len({tuple(r[1:]) for r in rows[1:]}) == 1
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "completed" and manifest["config"]["recipe"] == "static"
        assert set(json.loads((out / "drift.json").read_text())) == {"initial", "max_relative_drift", "samples"}

    def test_output_is_byte_identical_across_runs(self, tmp_path):
        cfg = write_config(tmp_path)
        for name in ("a", "b"):
            assert main(["simulate", "--config", cfg, "--out", str(tmp_path / name)]) == EXIT_OK
        assert (tmp_path / "a" / "invariants.csv").read_bytes() == (tmp_path / "b" / "invariants.csv").read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path)
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
        assert read_csv(tmp_path / "a" / "invariants.csv")[1] != read_csv(tmp_path / "b" / "invariants.csv")[1]
        assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 1

    def test_both_formulations_and_snapshots(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path, formulation="both")
        assert main(["simulate", "--config", cfg, "--out", str(out), "--snapshots"]) == EXIT_OK
        assert (out / "invariants_eulerian.csv").exists()
        names = sorted(p.name for p in (out / "snapshots").iterdir())
        assert names[0] == "clebsch_000000" and "eulerian_000010" in names
        assert json.loads((out / "manifest.json").read_text())["cross_distance"] < 1e-2

    def test_abort_writes_partial_output(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path, dt=0.5, n_steps=50, recipe_params={"rho_amp": 0.5, "phi0_amp": 2.0})
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_ABORTED
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "aborted" and manifest["error"]
        assert manifest["warnings"]
        assert len(read_csv(out / "invariants.csv")) >= 2


class TestVerify:
    def test_casimir_suite(self, tmp_path, capsys):
        out = tmp_path / "v"
        assert main(["verify", "--config", write_config(tmp_path), "--suite", "casimir", "--out", str(out)]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[-1].endswith("checks passed")
        assert all(line.startswith("[pass]") for line in lines[:-1])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["passed"] and {c["suite"] for c in manifest["checks"]} == {"casimir"}

    def test_remark_gap_is_reported_as_expected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, n=16, recipe_params={"phi0_amp": 1.0})
        assert main(["verify", "--config", cfg, "--suite", "action", "--out", str(tmp_path / "v")]) == EXIT_OK
        remark = [line for line in capsys.readouterr().out.splitlines() if "remark" in line and "action" in line]
        assert remark and all(line.startswith("[expected-gap met]") for line in remark)


class TestFlow:
    def test_mass_flow(self, tmp_path, capsys):
        out = tmp_path / "f"
        code = main(["flow", "--config", write_config(tmp_path), "--generator", "C1", "--epsilon", "1",
                     "--out", str(out)])
        assert code == EXIT_OK
        text = (out / "gauge_report.txt").read_text()
        shift = float(next(line for line in text.splitlines() if line.startswith("phi0_mean_shift")).split(": ")[1])
        assert shift == pytest.approx(1.0, abs=1e-12)
        assert (out / "before" / "snapshot.json").exists() and (out / "after" / "phi0.npy").exists()
        assert json.loads((out / "manifest.json").read_text())["generator"] == "C1"

    def test_helicity_flow_at_16_is_limited_by_aliasing(self, tmp_path):
        # the resolved regime is 24^3; at 16^3 the infinitesimal identity only holds to the aliasing level
        cfg = write_config(tmp_path, n=16)
        assert main(["flow", "--config", cfg, "--generator", "C2", "--out", str(tmp_path / "f")]) == EXIT_CHECK_FAILED

    def test_helicity_flow(self, tmp_path):
        out = tmp_path / "f"
        assert main(["flow", "--config", str(CONFIGS / "gauge.json"), "--generator", "C2", "--out", str(out)]) == EXIT_OK
        rows = read_csv(out / "gauge_report.csv")
        assert rows[0] == ["substep", "change_rho", "change_V", "change_B"] and len(rows) == 21


def test_print_schema(capsys):
    assert main(["print-schema"]) == EXIT_OK
    schema = json.loads(capsys.readouterr().out)
    assert schema["title"] == "SimulationConfig"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "clebsch_mhd.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
