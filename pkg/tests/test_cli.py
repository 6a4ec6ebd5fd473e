import json
import subprocess
import sys

import pytest

from secondorder import acceptance, cli
from secondorder.acceptance import CheckResult, SelftestReport
from secondorder.config import parse_config
from secondorder.scenarios import ScenarioOutput


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_print_config_round_trips(capsys):
    assert cli.main(["print-config", "--seed", "5", "--engine", "both"]) == 0
    out = capsys.readouterr().out
    cfg = parse_config(out)
    assert cfg.seed == 5 and cfg.engine == "both"


def test_print_config_reads_file(tmp_path, capsys):
    path = _write(tmp_path, "[setup]\nz = 0.08\n")
    assert cli.main(["print-config", "--config", path]) == 0
    assert parse_config(capsys.readouterr().out).setup.z_source_to_mask == 0.08


@pytest.mark.parametrize(
    "argv, text, needle",
    [
        (["frobnicate"], None, "invalid choice"),
        (["run", "--seed", "abc"], None, "invalid int"),
        (["run", "--engine", "quantum"], None, "run.engine"),
        (["run", "--scenario", "custom"], None, "scan"),
        (["run", "--engine", "both", "--realizations", "10"], None, "run.realizations"),
        (["run"], "setup.z = -1\n", "setup.z"),
        (["run"], "[setup]\nfoo = 1\n", "line 2"),
        (["run"], "[run]\nengine = both\n", "line 2"),
    ],
)
def test_usage_and_config_errors_exit_1(tmp_path, capsys, argv, text, needle):
    if text is not None:
        argv = argv + ["--config", _write(tmp_path, text)]
    assert cli.main(argv) == 1
    err = capsys.readouterr().err
    assert needle in err


def test_missing_config_file_exits_1(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.toml")]) == 1
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exits_2(tmp_path, capsys):
    # a far-off-axis mask puts more than pi of phase between source grid points
    text = (
        '[run]\nscenario = "custom"\nengine = "montecarlo"\nrealizations = 200\nsource_points = 128\n'
        '[scan]\naxis = "mask_T_center"\nstart = -0.02\nstop = 0.02\nn_points = 5\n'
    )
    code = cli.main(["run", "--config", _write(tmp_path, text), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "GridResolutionError" in capsys.readouterr().err


def test_run_writes_outputs(tmp_path, capsys):
    out_dir = tmp_path / "res"
    assert cli.main(["run", "--scenario", "fig3bc", "--out", str(out_dir)]) == 0
    captured = capsys.readouterr()
    summary = json.loads(captured.out)
    assert summary["scenario"] == "fig3bc"
    assert "wrote 3 files" in captured.err
    assert sorted(p.name for p in out_dir.iterdir()) == ["fig3bc_C.csv", "fig3bc_T.csv", "fig3bc_summary.json"]


def _fake_report(passed):
    def fake(cfg, verify_determinism=True):
        checks = [CheckResult(1, "always", True, "ok"), CheckResult(2, "maybe", passed, "detail")]
        summary = {"scenario": "selftest", "passed": passed}
        return SelftestReport(checks, ScenarioOutput("selftest", [], summary))

    return fake


@pytest.mark.parametrize("passed, code", [(True, 0), (False, 3)])
def test_selftest_exit_codes(monkeypatch, tmp_path, capsys, passed, code):
    monkeypatch.setattr(acceptance, "run_selftest", _fake_report(passed))
    assert cli.main(["selftest", "--out", str(tmp_path)]) == code
    captured = capsys.readouterr()
    assert json.loads(captured.out)["passed"] is passed
    assert ("[FAIL]  2 maybe" in captured.err) is (not passed)
    assert (tmp_path / "selftest_summary.json").exists()


def test_selftest_ignores_custom_scan_in_config(monkeypatch, tmp_path):
    seen = {}

    def fake(cfg, verify_determinism=True):
        seen["cfg"] = cfg
        return _fake_report(True)(cfg)

    monkeypatch.setattr(acceptance, "run_selftest", fake)
    text = '[run]\nscenario = "custom"\n[scan]\naxis = "detector_T"\nstart = -0.001\nstop = 0.001\nn_points = 11\n'
    assert cli.main(["selftest", "--config", _write(tmp_path, text), "--out", str(tmp_path)]) == 0
    assert seen["cfg"].scenario == "selftest" and seen["cfg"].scan is None


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "secondorder", "print-config", "--workers", "3"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert parse_config(proc.stdout).workers == 3
    proc = subprocess.run([sys.executable, "-m", "secondorder"], capture_output=True, text=True, check=False)
    assert proc.returncode == 1
