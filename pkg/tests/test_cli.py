import json

import pytest
from click.testing import CliRunner

from su2para import cli


@pytest.fixture
def runner():
    return CliRunner()


def _body(text):
    return [l for l in text.splitlines() if not l.startswith("# timestamp")]


def test_selftest_passes(runner):
    res = runner.invoke(cli.main, ["selftest", "--bandlimit", "2"])
    assert res.exit_code == 0, res.output
    assert "schur" in res.stdout and "leibniz" in res.stdout


def test_localize_json(runner):
    res = runner.invoke(cli.main, ["localize", "--j1", "1/2", "--j2", "1/2"])
    assert res.exit_code == 0
    doc = json.loads(res.stdout)
    rec = doc["records"][0]
    assert rec["support"] == ["0", "1"] and rec["pass"]
    assert doc["header"]["j1"] == "1/2"


def test_weyl_csv(runner):
    res = runner.invoke(cli.main, ["weyl", "--tmax", "6", "--step", "1"])
    assert res.exit_code == 0
    lines = [l for l in res.stdout.splitlines() if not l.startswith("#")]
    assert lines[0].startswith("t,count,count_over_t3")
    assert len(lines) == 1 + 6 + 1


def test_config_precedence(runner, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# run parameters\nseed = 7\nbandlimit = 3/2\ndelta = 0.1  # narrower\n")
    res = runner.invoke(cli.main, ["fourier", "--config", str(cfg), "--seed", "3", "--format", "json"])
    assert res.exit_code == 0, res.output
    head = json.loads(res.stdout)["header"]
    assert head["seed"] == 3 and head["bandlimit"] == "3/2" and head["delta"] == 0.1


@pytest.mark.parametrize("text", ["bogus = 1\n", "bandlimit = 1/3\n", "seed\n", "format = xml\n"])
def test_malformed_config_rejected(runner, tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    res = runner.invoke(cli.main, ["fourier", "--config", str(cfg)])
    assert res.exit_code == 2


def test_parse_config_values():
    got = cli.parse_config("s = -1, 0 ,1\nformat = json\n")
    assert got == {"sobolev_s": (-1.0, 0.0, 1.0), "output_format": "json"}


def test_output_file_is_written_atomically(runner, tmp_path):
    out = tmp_path / "weyl.csv"
    res = runner.invoke(cli.main, ["weyl", "--tmax", "3", "--step", "1", "--out", str(out)])
    assert res.exit_code == 0
    assert res.stdout == ""
    assert out.read_text().startswith("# command: weyl")
    assert [p.name for p in tmp_path.iterdir()] == ["weyl.csv"]


def test_runs_are_deterministic(runner):
    a = runner.invoke(cli.main, ["fourier", "--bandlimit", "1", "--seed", "5"])
    b = runner.invoke(cli.main, ["fourier", "--bandlimit", "1", "--seed", "5"])
    assert _body(a.stdout) == _body(b.stdout)


def test_failing_record_sets_exit_status(runner, monkeypatch):
    monkeypatch.setattr(cli.spectral, "weyl_count", lambda t: (1, 100.0 if t > 10 else 1.0))
    res = runner.invoke(cli.main, ["weyl", "--tmax", "12", "--step", "1"])
    assert res.exit_code == 1
    assert "FAIL" in res.stderr


def test_paradiff_needs_integer_band(runner):
    res = runner.invoke(cli.main, ["compose", "--bandlimit", "1/2"])
    assert res.exit_code == 2
