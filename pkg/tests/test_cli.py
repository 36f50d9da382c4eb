import json
import subprocess
import sys
from pathlib import Path

import pytest

import syncrelay.cli as cli
from syncrelay import __version__
from syncrelay.errors import NumericalDivergenceError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def short(tmp_path):
    p = tmp_path / "short.cfg"
    p.write_text("duration = 0.5\n", encoding="utf-8")
    return p


def test_version(capsys):
    assert cli.main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "syncrelay", "version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == __version__


def test_validate_ok_and_bad(tmp_path, short, capsys):
    assert cli.main(["validate", str(short)]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("duration = 5\ngrid.frequency = -1\n", encoding="utf-8")
    assert cli.main(["validate", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "grid.frequency" in err and "line 2" in err


def test_missing_file(tmp_path):
    assert cli.main(["validate", str(tmp_path / "nope.cfg")]) == 1


def test_run_writes_logs(tmp_path, short, capsys):
    out, events = tmp_path / "rows.csv", tmp_path / "events.csv"
    code = cli.main(["run", str(short), "--out", str(out), "--events", str(events), "--summary"])
    assert code == 0
    rows = out.read_text(encoding="utf-8").splitlines()
    assert len(rows) == 502
    assert events.read_text(encoding="utf-8").startswith("t,kind,detail\n")
    summary = json.loads(capsys.readouterr().out)
    assert summary["synced"] is False and summary["t_close"] is None


def test_precision_override(tmp_path, short):
    out = tmp_path / "rows.csv"
    cli.main(["run", str(short), "--out", str(out), "--precision", "3"])
    assert out.read_text(encoding="utf-8").splitlines()[1].split(",")[3] == "50.000"


def test_trip_exit_code(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    code = cli.main(["run", str(SCENARIOS / "underfrequency_trip.cfg"), "--out", str(out),
                     "--summary"])
    assert code == 3
    summary = json.loads(capsys.readouterr().out)
    assert [t["element"] for t in summary["trips"]] == ["UF"]


def test_divergence_exit_code(tmp_path, short, monkeypatch):
    real = cli.run_scenario

    def boom(cfg):
        raise NumericalDivergenceError("rotor speed not finite", log=real(cfg))

    monkeypatch.setattr(cli, "run_scenario", boom)
    out = tmp_path / "rows.csv"
    assert cli.main(["run", str(short), "--out", str(out)]) == 2
    # the partial log is still written
    assert out.read_text(encoding="utf-8").count("\n") == 502


def test_every_shipped_scenario_validates():
    for path in sorted(SCENARIOS.glob("*.cfg")):
        assert cli.main(["validate", str(path)]) == 0
