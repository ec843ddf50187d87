"""End-to-end tests for the command layer and its file formats."""

import json
import math
import os
import subprocess
import sys

import pytest

from eigenlab import SweepRow, UsageError
from eigenlab.config import (
    CheckRequest,
    canonical_config,
    config_hash,
    parse_config,
)
from eigenlab.plots import loglog_svg
from eigenlab.reports import read_csv, rows_to_csv, write_csv

MINI_CONFIG = """\
[sweep zonal_min]
family = zonal
degrees = 10, 20, 30, 40
functionals = lp
p_values = inf
"""


def run_cli(*args, env=None):
    merged = dict(os.environ)
    if env:
        merged.update(env)
    return subprocess.run([sys.executable, "-m", "eigenlab", *args],
                          capture_output=True, text=True, env=merged)


# ----------------------------------------------------------------- eval


def test_eval_zonal_pole_value():
    # Reproducing-kernel value at its own pole: sqrt((2k+1)/(4 pi)).
    res = run_cli("eval", "--family", "zonal", "--k", "4", "--point", "0,0,1")
    assert res.returncode == 0
    assert res.stdout.strip() == "0.846284375322"
    assert res.stdout.strip() == f"{math.sqrt(9 / (4 * math.pi)):.12g}"


def test_eval_highest_weight_vanishes_at_pole():
    res = run_cli("eval", "--family", "highest-weight", "--k", "1",
                  "--point", "0,0,1")
    assert res.returncode == 0
    assert float(res.stdout.strip()) == 0.0


def test_eval_torus_empty_shell_exits_2():
    res = run_cli("eval", "--family", "torus", "--N", "3", "--point", "0,0")
    assert res.returncode == 2
    assert "empty lattice shell" in res.stderr


def test_eval_usage_errors():
    res = run_cli("eval", "--family", "nosuch", "--k", "4", "--point", "0,0,1")
    assert res.returncode == 2
    res = run_cli("eval", "--family", "zonal", "--point", "0,0,1")
    assert res.returncode == 2
    res = run_cli("eval", "--family", "zonal", "--k", "4", "--point", "0,0")
    assert res.returncode == 2


# ---------------------------------------------------------------- norms


def test_norms_command_lists_requested_norms():
    res = run_cli("norms", "--family", "zonal", "--k", "6", "--p", "1,2,inf")
    assert res.returncode == 0
    lines = dict(line.split(" = ") for line in res.stdout.strip().splitlines())
    assert set(lines) == {"L1", "L2", "Linf"}
    assert float(lines["L2"]) == pytest.approx(1.0, rel=1e-6)
    assert float(lines["Linf"]) == pytest.approx(
        math.sqrt(13 / (4 * math.pi)), rel=1e-9)


# ---------------------------------------------------------------- nodal


def test_nodal_highest_weight_matches_circle_count():
    # k meridian-like great circles: total length 2 pi k.
    res = run_cli("nodal", "--family", "highest-weight", "--k", "20")
    assert res.returncode == 0
    length = float(res.stdout.splitlines()[0].split(" = ")[1])
    assert abs(length - 40 * math.pi) / (40 * math.pi) < 0.01


# ----------------------------------------------------------------- scar


def test_scar_witness_found_on_highest_weight():
    res = run_cli("scar", "--family", "highest-weight", "--k", "50",
                  "--c0", "5")
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "witness found"
    assert "tube:" in res.stdout and "band" in res.stdout


def test_scar_premise_violated_on_zonal():
    res = run_cli("scar", "--family", "zonal", "--k", "50", "--c0", "5")
    assert res.returncode == 0
    assert "premise violated" in res.stdout


# ---------------------------------------------------------------- sweep


def test_sweep_minimal_config(tmp_path):
    cfg = tmp_path / "mini.cfg"
    cfg.write_text(MINI_CONFIG)
    out = tmp_path / "out"
    res = run_cli("sweep", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0, res.stderr
    fits = json.loads((out / "fits.json").read_text())
    records = fits["sweeps"][0]["fits"]
    assert len(records) == 1
    assert records[0]["reference"] == 0.5
    assert records[0]["verdict"] == "consistent"
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_hash"] == fits["config_hash"]
    assert set(man["outputs"]) == {"sweep.csv", "fits.json", "manifest.json"}


def test_sweep_reruns_are_byte_identical(tmp_path):
    cfg = tmp_path / "mini.cfg"
    cfg.write_text(MINI_CONFIG)
    env = {"SOURCE_DATE_EPOCH": "1700000000"}
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("sweep", "--config", str(cfg), "--out", str(a),
                   env=env).returncode == 0
    assert run_cli("sweep", "--config", str(cfg), "--out", str(b),
                   env=env).returncode == 0
    for name in ("sweep.csv", "fits.json", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweep_missing_check_dependency_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(
        "[sweep z]\nfamily = zonal\ndegrees = 10, 20, 30, 40\n"
        "functionals = lp, kn\np_values = inf\nchecks = kn_l4\n")
    res = run_cli("sweep", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert res.returncode == 2
    assert "kn_l4" in res.stderr and "lp with parameter 4" in res.stderr


def test_sweep_failed_cells_exit_3_with_data_written(tmp_path):
    cfg = tmp_path / "fail.cfg"
    # lam^0.5 exceeds the maximal ball radius at every degree here.
    cfg.write_text("[sweep f]\nfamily = zonal\ndegrees = 10, 20, 30, 40\n"
                   "functionals = ball\nradii = lam^0.5\n")
    out = tmp_path / "o"
    res = run_cli("sweep", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 3
    rows = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(rows) == 5  # header + 4 nan cells


def test_sweep_grid_cap_exits_4(tmp_path):
    cfg = tmp_path / "cap.cfg"
    cfg.write_text("[sweep c]\nfamily = zonal\ndegrees = 10, 20, 30, 40\n"
                   "functionals = ball\nradii = lam^-0.5\n")
    res = run_cli("--grid-cap", "100", "sweep", "--config", str(cfg),
                  "--out", str(tmp_path / "o"))
    assert res.returncode == 4


def test_sweep_unreadable_config_exits_2(tmp_path):
    res = run_cli("sweep", "--config", str(tmp_path / "missing.cfg"),
                  "--out", str(tmp_path / "o"))
    assert res.returncode == 2


# --------------------------------------------------------------- report


def test_report_emits_svg_with_reference_line(tmp_path):
    cfg = tmp_path / "mini.cfg"
    cfg.write_text(MINI_CONFIG)
    out = tmp_path / "out"
    assert run_cli("sweep", "--config", str(cfg), "--out",
                   str(out)).returncode == 0
    plots = tmp_path / "plots"
    res = run_cli("report", "--in", str(out / "sweep.csv"), "--out", str(plots))
    assert res.returncode == 0
    svg = (plots / "zonal_lp_inf.svg").read_text()
    assert svg.startswith("<svg")
    assert "reference: 0.500" in svg
    assert "fit slope:" in svg
    assert "log10 lambda" in svg


def test_report_empty_csv_exits_2(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("family,k,lambda,functional,parameter,value,"
                     "error_estimate,grid_meta\n")
    res = run_cli("report", "--in", str(empty), "--out", str(tmp_path / "p"))
    assert res.returncode == 2


# ------------------------------------------------------------ CSV format


def test_csv_round_trip_exact(tmp_path):
    rows = [
        SweepRow("zonal", 10, math.sqrt(110.0), "lp", "inf",
                 1.2927207364566027, 1.25e-17, '{"p":"inf"}'),
        SweepRow("torus", 25, 5.0, "ball", "lam^-0.5",
                 0.1234567890123456789, 0.0, "{}"),
    ]
    path = tmp_path / "t.csv"
    path.write_text(rows_to_csv(rows))
    assert read_csv(str(path)) == rows


def test_csv_round_trip_handles_nan(tmp_path):
    rows = [SweepRow("zonal", 10, 10.5, "lp", "3", float("nan"),
                     float("nan"), "{}")]
    path = tmp_path / "t.csv"
    write_csv(str(path), rows)
    back = read_csv(str(path))[0]
    assert math.isnan(back.value) and math.isnan(back.error_estimate)


def test_read_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(UsageError):
        read_csv(str(path))


# --------------------------------------------------------------- configs


def test_config_hash_ignores_key_order():
    a = parse_config("[sweep s]\nfamily = zonal\ndegrees = 4, 8, 12, 16\n"
                     "p_values = 2, inf\nfunctionals = lp\n")
    b = parse_config("[sweep s]\np_values = 2, inf\ndegrees = 4, 8, 12, 16\n"
                     "functionals = lp\nfamily = zonal\n")
    assert config_hash(a) == config_hash(b)


def test_config_json_equivalent_to_text():
    text_plans = parse_config(
        "[sweep s]\nfamily = zonal\ndegrees = 4, 8, 12, 16\n"
        "functionals = lp\np_values = 1, 2, inf\nchecks = l1_lower\n")
    json_plans = parse_config(json.dumps({"sweeps": [{
        "name": "s", "family": "zonal", "degrees": [4, 8, 12, 16],
        "functionals": ["lp"], "p_values": [1, 2, "inf"],
        "checks": ["l1_lower"],
    }]}))
    assert canonical_config(text_plans) == canonical_config(json_plans)
    assert json_plans[0].checks == (CheckRequest("l1_lower", None),)


def test_config_rejects_unknown_keys_and_checks():
    with pytest.raises(UsageError, match="unknown config keys"):
        parse_config("[sweep s]\nfamily = zonal\ndegrees = 2, 3\nvolume = 9\n")
    with pytest.raises(UsageError, match="unknown inequality check"):
        parse_config("[sweep s]\nfamily = zonal\ndegrees = 2, 3\n"
                     "functionals = lp\nchecks = osmosis\n")
    with pytest.raises(UsageError, match="no sweeps"):
        parse_config("")
    with pytest.raises(UsageError, match="duplicate"):
        parse_config("[sweep s]\nfamily = zonal\ndegrees = 2, 3\n"
                     "[s]\nfamily = zonal\ndegrees = 2, 3\n")


def test_config_check_with_parameter():
    plans = parse_config("[sweep s]\nfamily = zonal\ndegrees = 4, 8, 12, 16\n"
                         "functionals = lp, kn\np_values = 1, 3, inf\n"
                         "checks = kn_lp:3\n")
    assert plans[0].checks == (CheckRequest("kn_lp", 3.0),)


# ----------------------------------------------------------------- plots


def test_loglog_svg_structure():
    pts = [(10.0, 2.0), (20.0, 4.0), (40.0, 8.0), (80.0, 16.0)]
    svg = loglog_svg(pts, "demo", fitted_exponent=1.0, reference=1.0)
    assert svg.startswith("<svg")
    assert svg.count("<circle") == 4
    assert "fit slope: 1.000" in svg
    assert "reference: 1.000" in svg
    assert "http://www.w3.org/2000/svg" in svg
    # Deterministic output for identical input.
    assert svg == loglog_svg(pts, "demo", fitted_exponent=1.0, reference=1.0)
    with pytest.raises(UsageError):
        loglog_svg([(10.0, -1.0)], "bad")
