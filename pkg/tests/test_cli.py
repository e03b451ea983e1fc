import json

import pytest
from typer.testing import CliRunner

from constants import EXIT_DEGENERATE, EXIT_OK, EXIT_SCHEMA, EXIT_SYNTAX, EXIT_VALIDATION
from retrodict_cli import app, build_tolerances
from utils.config import DirPath

runner = CliRunner()
BASE = DirPath().base_dir
DOCS = BASE / "docs" / "devices"
CHECKS = BASE / "test_data" / "checks" / "devices"


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


@pytest.mark.parametrize("name", ["spin_half", "biased_pair", "belinfante_d3"])
def test_report_is_byte_stable(name, tmp_path):
    device = DOCS / f"{name}.json"
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        result = invoke("report", device, "--trials", 20_000, "--out", out)
        assert result.exit_code == EXIT_OK, result.output
    a = (first / "report.json").read_bytes()
    assert a == (second / "report.json").read_bytes()
    document = json.loads(a)
    assert document["command"] == "report"
    assert ("belinfante" in document) == (name == "belinfante_d3")
    assert all(check["passed"] for check in document["checks"])


def test_joint_json(tmp_path):
    result = invoke("joint", DOCS / "biased_pair.json", "--out", tmp_path)
    assert result.exit_code == EXIT_OK
    document = json.loads((tmp_path / "joint.json").read_text())
    rows = {row["i"]: row for row in document["joint"]}
    assert rows["1"]["2"] == pytest.approx(0.3)
    assert document["marginal_prep"][0] == {"i": "1", "P(i)": pytest.approx(0.6)}


def test_retrodict_csv_marks_undefined_rows(tmp_path):
    result = invoke("retrodict", CHECKS / "orthogonal_pair.json", "--format", "csv", "--out", tmp_path)
    assert result.exit_code == EXIT_OK, result.output
    text = (tmp_path / "retrodictive.csv").read_text()
    lines = text.splitlines()
    assert lines[0].startswith("j,")
    assert any("undefined" in line for line in lines[1:])


def test_simulate_writes_log(tmp_path):
    log = tmp_path / "log.csv"
    result = invoke(
        "simulate", DOCS / "biased_pair.json", "--trials", 1000, "--seed", 4,
        "--chunks", 3, "--log-csv", log, "--out", tmp_path,
    )
    assert result.exit_code == EXIT_OK, result.output
    lines = log.read_text().splitlines()
    assert lines[0] == "trial,i,k"
    assert len(lines) == 1001
    document = json.loads((tmp_path / "simulate.json").read_text())
    assert "log" not in document
    assert document["n_trials"] == 1000


@pytest.mark.parametrize(
    "command, device, code",
    [
        ("validate", CHECKS / "not_psd.json", EXIT_VALIDATION),
        ("validate", CHECKS / "broken_syntax.json", EXIT_SYNTAX),
        ("validate", CHECKS / "unknown_key.json", EXIT_SCHEMA),
        ("belinfante", DOCS / "biased_pair.json", EXIT_SCHEMA),
        ("validate", CHECKS / "missing.json", EXIT_SYNTAX),
    ],
)
def test_exit_codes(command, device, code, tmp_path):
    result = invoke(command, device, "--out", tmp_path)
    assert result.exit_code == code, result.output


def test_lenient_flag(tmp_path):
    result = invoke("validate", CHECKS / "unknown_key.json", "--lenient", "--out", tmp_path)
    assert result.exit_code == EXIT_OK


def test_usage_error():
    result = invoke("joint")
    assert result.exit_code == 2


def test_emit_round_trip(tmp_path):
    result = invoke("emit", DOCS / "spin_half.json")
    assert result.exit_code == EXIT_OK
    emitted = tmp_path / "spin_half.json"
    emitted.write_text(result.stdout)
    again = invoke("emit", emitted)
    assert again.stdout == result.stdout


def test_tolerance_overrides():
    tol = build_tolerances(psd=1e-6, herm=None)
    assert tol.psd == 1e-6
    assert tol.herm == 1e-10


def test_degenerate_pair_exit_code(tmp_path):
    device = tmp_path / "degenerate.json"
    device.write_text(
        json.dumps(
            {
                "format_version": 1,
                "dimension": 2,
                "preparation": {"1": [[1.0, 0.0], [0.0, 0.0]]},
                "measurement": {"1": [[0.0, 0.0], [0.0, 1.0]]},
            }
        )
    )
    result = invoke("joint", device, "--out", tmp_path)
    assert result.exit_code == EXIT_DEGENERATE


@pytest.mark.parametrize(
    "command, extra",
    [("simulate", ["--trials", 5_000]), ("appendix-check", []), ("report", ["--trials", 5_000])],
)
def test_tiny_prior_device_runs(command, extra, tmp_path):
    device = tmp_path / "tiny_prior.json"
    device.write_text(
        """{
  "format_version": 1,
  "dimension": 2,
  "preparation": {"1": [[1.0, 0.0], [0.0, 0.0]], "2": [[0.0, 0.0], [0.0, 1.0e-10]]},
  "measurement": {"1": [[0.5, 0.5], [0.5, 0.5]], "2": [[0.5, -0.5], [-0.5, 0.5]]}
}
"""
    )
    result = invoke(command, device, *extra, "--out", tmp_path / "out")
    assert result.exit_code == EXIT_OK, result.output
