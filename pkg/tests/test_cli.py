import csv
import json
import subprocess
import sys

import pytest

from pointcover.analytic import rd_poisson
from pointcover.cli import (ANALYTIC_COLUMNS, COVER_COLUMNS, WZ_COLUMNS, EXIT_BUDGET, EXIT_IO, EXIT_USAGE,
                            UsageError, main, parse_config)


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_valid_config():
    cfg = parse_config("cover-sim --lambda 1 --D 0.5 --T 16 --delta 0.01 --rate 1.3 --trials 500 --seed 7".split())
    assert (cfg.command, cfg.lam, cfg.D, cfg.T, cfg.delta, cfg.rate, cfg.trials, cfg.seed) == \
        ("cover-sim", 1.0, 0.5, 16.0, 0.01, 1.3, 500, 7)


def test_d_zero_cites_rd_poisson(capsys):
    with pytest.raises(UsageError, match="rd_poisson"):
        parse_config(["cover-sim", "--D", "0"])
    assert main(["analytic", "--D", "0"]) == EXIT_USAGE
    assert "rd_poisson" in capsys.readouterr().err


def test_budget_refusal_names_cap(capsys):
    assert main(["cover-sim", "--rate", "3"]) == EXIT_BUDGET
    assert "33554432" in capsys.readouterr().err
    assert main(["cover-sim", "--rate", "1", "--budget", "1000"]) == EXIT_BUDGET
    assert "1000" in capsys.readouterr().err


def test_unknown_flag_is_usage_error():
    assert main(["cover-sim", "--bogus", "1"]) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE


def test_config_file_and_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# desk run\nlambda = 2\nD = 0.4\ntrials = 9\nrate_tilde = 0.5\n")
    cfg = parse_config(["wz-sim", "--config", str(cfg_file), "--D", "0.3"])
    assert (cfg.lam, cfg.D, cfg.trials, cfg.rate_tilde) == (2.0, 0.3, 9, 0.5)
    cfg_file.write_text("lambda = 2\nmystery = 1\n")
    with pytest.raises(UsageError, match="mystery"):
        parse_config(["wz-sim", "--config", str(cfg_file)])
    cfg_file.write_text("trials = many\n")
    with pytest.raises(UsageError):
        parse_config(["cover-sim", "--config", str(cfg_file)])


def test_config_keys_are_per_command(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("p = 0.5\n")
    with pytest.raises(UsageError):
        parse_config(["cover-sim", "--config", str(cfg_file)])


def test_analytic_sweep(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analytic", "--sweep", "D=0.1:0.9:0.1", "--lambda", "1", "--delta", "1e-3", "--out", str(out)]) == 0
    r = rows(out)
    assert len(r) == 9 and list(r[0]) == ANALYTIC_COLUMNS
    for row in r:
        D = float(row["D"])
        assert float(row["rd_poisson_bits_per_s"]) == rd_poisson(D, 1)
        assert abs(float(row["rd_discrete_bits_per_s"]) / rd_poisson(D, 1) - 1) < 0.005


def test_analytic_infeasible_row_is_blank(capsys):
    assert main(["analytic", "--D", "0.05", "--delta", "0.1"]) == 0
    r = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert r[0]["rd_discrete_bits_per_symbol"] == ""


def test_cover_sim_outputs_and_determinism(tmp_path):
    args = ["cover-sim", "--T", "4", "--delta", "0.05", "--rate", "2", "--trials", "15", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "trials.csv").read_bytes() == (b / "trials.csv").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    r = rows(a / "trials.csv")
    assert list(r[0]) == COVER_COLUMNS and len(r) == 15
    summary = {row["metric"]: row for row in rows(a / "summary.csv")}
    mean = sum(float(x["distortion"]) for x in r) / len(r)
    assert float(summary["mean_distortion"]["empirical"]) == pytest.approx(mean, rel=1e-12)
    assert float(summary["covered_distortion_formula"]["predicted"]) == pytest.approx(0.525)
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3 and "wall_time_s" in manifest
    assert manifest["predictions"]["rd_poisson_bits_per_s"] == 1.0


def test_adversary_sim_with_pattern_file(tmp_path):
    pat = tmp_path / "p.txt"
    pat.write_text("T=4\n1\n2.5\n3\n")
    out = tmp_path / "o"
    assert main(["adversary-sim", "--T", "4", "--rate", "2", "--pattern-file", str(pat), "--trials", "4",
                 "--out", str(out)]) == 0
    assert {row["k_ones"] for row in rows(out / "trials.csv")} == {"3"}
    assert main(["adversary-sim", "--T", "5", "--pattern-file", str(pat), "--out", str(out)]) == EXIT_USAGE
    assert main(["adversary-sim", "--T", "4", "--pattern-file", str(tmp_path / "missing"),
                 "--out", str(out)]) == EXIT_IO


def test_wz_sim_outputs(tmp_path):
    out = tmp_path / "w"
    assert main(["wz-sim", "--lambda", "2", "--T", "4", "--delta", "0.05", "--rate", "1.5",
                 "--rate-tilde", "0.75", "--trials", "10", "--out", str(out)]) == 0
    r = rows(out / "trials.csv")
    assert list(r[0]) == WZ_COLUMNS and len(r) == 10
    assert {row["outcome"] for row in r} <= {"ok", "ambiguous", "enc_fail"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["predictions"]["rd_wyner_ziv_bits_per_s"] == pytest.approx(1.0)


def test_transform_outputs(tmp_path):
    code = tmp_path / "c.txt"
    code.write_text("T=1\n0.1,0.3;0.55,0.6\n")
    out = tmp_path / "t"
    assert main(["transform", "--code-file", str(code), "--delta", "0.25", "--out", str(out)]) == 0
    assert (out / "grid_code.txt").read_text() == "1110\n1111\n"
    rep = rows(out / "bounds.csv")
    assert rep[0]["inflation"] == "0.5" and rep[0]["ok"] == "1"
    approx = tmp_path / "a.txt"
    approx.write_text("T=1\n0.1,0.2\n")
    assert main(["transform", "--code-file", str(code), "--approx-file", str(approx), "--delta", "0.25",
                 "--epsilon", "0.01"]) == EXIT_USAGE
    assert main(["transform", "--code-file", str(tmp_path / "none")]) == EXIT_IO


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "pointcover.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "cover-sim" in out.stdout
    out = subprocess.run([sys.executable, "-m", "pointcover.cli", "cover-sim", "--help"],
                         capture_output=True, text=True)
    assert "default: 0.5" in out.stdout
