import csv
import json
import subprocess
import sys

import pytest

from thurston.cli import DEFAULTS, config_hash, load_config, main


def _rows(path):
    return [r for r in csv.reader(l for l in open(path) if not l.startswith("#"))]


def _run(tmp_path, name, command, cfg=None, extra=()):
    out = tmp_path / name
    argv = [command, "--out", str(out), *extra]
    if cfg is not None:
        cpath = tmp_path / f"{name}.json"
        cpath.write_text(json.dumps(cfg))
        argv += ["--config", str(cpath)]
    return main(argv), out


def test_decompose_writes_level_three(tmp_path):
    code, out = _run(tmp_path, "d", "decompose")
    assert code == 0
    tiles = _rows(out / "tiles.csv")
    assert len(tiles) - 1 == 16
    assert len(_rows(out / "vertices.csv")) - 1 == 2 + 8
    incidence = json.loads((out / "incidence.json").read_text())
    assert "header" in incidence
    summary = json.loads((out / "summary.json").read_text())
    assert summary["complete"] and "tiles.csv" in summary["files"]


def test_csv_headers_carry_provenance(tmp_path):
    _, out = _run(tmp_path, "d", "decompose")
    head = (out / "tiles.csv").read_text().splitlines()[:2]
    assert head[0].startswith("# git-describe") and head[1].startswith("# config-hash")


@pytest.mark.parametrize(
    "cfg",
    [{"bogus": 1}, {"n_min": 5, "n_max": 2}, {"weights": "none"}, {"estimators": ["nope"]},
     {"budgets": {"time": -1}}],
)
def test_invalid_config_exits_two(tmp_path, cfg, capsys):
    code, _ = _run(tmp_path, "bad", "pressure", cfg)
    assert code == 2
    assert "thurston pressure:" in capsys.readouterr().err


def test_unreadable_config_exits_two(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["decompose", "--out", str(tmp_path / "o"), "--config", str(p)]) == 2


def test_config_hash_depends_on_content():
    a = load_config(None, 0, False, 1)
    b = load_config(None, 1, False, 1)
    assert config_hash(a) == config_hash(dict(a))
    assert config_hash(a) != config_hash(b)
    assert len(config_hash(a)) == 16


def test_defaults_are_not_mutated():
    before = json.dumps(DEFAULTS, sort_keys=True)
    load_config(None, 3, True, 2)
    assert json.dumps(DEFAULTS, sort_keys=True) == before


SMALL = {
    "pressure": {"n_max": 6, "separated": {"n_max": 2, "grid": 3000}},
    "witness": None,
    "decompose": {"level": 2},
}


@pytest.mark.parametrize("command", sorted(SMALL))
def test_outputs_are_byte_identical_across_runs(tmp_path, command):
    cfg = SMALL[command]
    _, a = _run(tmp_path, "a", command, cfg)
    _, b = _run(tmp_path, "b", command, cfg)
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_pressure_zero_potential_check(tmp_path):
    code, out = _run(tmp_path, "z", "pressure", {"potential": "zero", "n_max": 5,
                                                  "separated": {"n_max": 1, "grid": 2000}})
    summary = json.loads((out / "summary.json").read_text())
    assert summary["checks"]["zero_potential_log_deg"]
    assert summary["checks"]["fixed_point_counts"]


def test_tail_witness_on_shipped_rule(tmp_path):
    code, out = _run(tmp_path, "w", "witness", {"witness": {"kind": "not_asymptotically_h_expansive"}})
    data = json.loads((out / "witness.json").read_text())
    assert code == 0, data
    assert data["checks"]["card_at_period_multiples"]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "thurston.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


def test_witness_reports_blocked_rule(tmp_path):
    bad = tmp_path / "rule.json"
    bad.write_text(json.dumps({"kind": "subdivision", "tiles": []}))
    code, out = _run(tmp_path, "wb", "witness",
                     {"witness": {"kind": "not_asymptotically_h_expansive", "rule": str(bad)}})
    data = json.loads((out / "witness.json").read_text())
    assert data["status"] == "blocked" and data["reason"]
