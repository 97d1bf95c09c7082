import csv
import json
import subprocess
import sys

import pytest

from wafs import __version__
from wafs.cli import UsageError, main, parse_budgets


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def gauss(tmp_path):
    assert run("synth", "--n", 120, "--d", 2, "--sep", 3, "--seed", 1, "--out", tmp_path / "data") == 0
    return tmp_path / "data"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------------------ budgets


def test_budget_syntax():
    assert parse_budgets("0:20:1") == [float(i) for i in range(21)]
    assert parse_budgets("0:0.5:0.1") == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    assert parse_budgets("0:1/5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_budgets("0,2,5") == [0.0, 2.0, 5.0]
    for bad in ("1:0:1", "0:1:0", "a", "2,1", "-1,0"):
        with pytest.raises(UsageError):
            parse_budgets(bad)


# -------------------------------------------------------------------- synth


def test_synth_is_reproducible(tmp_path, gauss):
    assert run("synth", "--n", 120, "--d", 2, "--sep", 3, "--seed", 1, "--out", tmp_path / "again") == 0
    for name in ("data.csv", "domains.json", "config.json"):
        assert (gauss / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_synth_degenerate_and_usage_errors(tmp_path, capsys):
    assert run("synth", "--sep", 0, "--out", tmp_path / "z") == 0
    assert run("synth", "--n", 10) == 2
    assert run("frobnicate") == 2


def test_version_flag(capsys):
    assert run("--version") == 0
    assert capsys.readouterr().out.strip() == f"wafs {__version__} (model format 1, trace format 1)"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wafs.cli", "synth", "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


# ------------------------------------------------------------ select/train


def test_select_writes_mask_of_size_m(tmp_path):
    assert run("synth", "--kind", "robust-fragile", "--n", 30, "--d", 8, "--seed", 2, "--out", tmp_path / "d") == 0
    out = tmp_path / "sel"
    assert run("select", "--data", tmp_path / "d/data.csv", "--domains", tmp_path / "d/domains.json",
               "--method", "wafs", "--direction", "forward", "--m", 5, "--lambda", 0.5, "--folds", 5,
               "--seed", 7, "--out", out) == 0
    mask = json.loads((out / "mask.json").read_text())
    assert sum(mask["mask"]) == 5 and len(mask["names"]) == 5
    assert len(read_csv(out / "trace.csv")) == 8 + 7 + 6 + 5 + 4


def test_config_file_merges_and_flags_override(tmp_path, gauss):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": str(gauss / "data.csv"), "C": "0.5", "fp_rate": 0.02}))
    assert run("train", "--config", cfg, "--C", "2", "--out", tmp_path / "t") == 0
    resolved = json.loads((tmp_path / "t/config.json").read_text())
    assert resolved["C"] == "2" and resolved["fp_rate"] == 0.02 and resolved["data"] == str(gauss / "data.csv")
    model = json.loads((tmp_path / "t/model.json").read_text())
    assert model["train_config"]["C"] == 2.0
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run("train", "--config", cfg, "--data", gauss / "data.csv", "--out", tmp_path / "u") == 2


def test_train_metrics(tmp_path, gauss):
    assert run("train", "--data", gauss / "data.csv", "--C", "0.25,1,4", "--out", tmp_path / "t") == 0
    metrics = json.loads((tmp_path / "t/metrics.json").read_text())
    assert {"accuracy", "tp", "threshold", "train_accuracy"} <= set(metrics)


# ------------------------------------------------------------------ attack


def test_attack_budget_zero_is_identity(tmp_path, gauss):
    run("train", "--data", gauss / "data.csv", "--out", tmp_path / "t")
    assert run("attack", "--data", gauss / "data.csv", "--model", tmp_path / "t/model.json", "--budget", 0,
               "--out", tmp_path / "a") == 0
    assert (tmp_path / "a/attacked.csv").read_bytes() == (gauss / "data.csv").read_bytes()


def test_attack_min_cost_evades(tmp_path, gauss):
    run("train", "--data", gauss / "data.csv", "--out", tmp_path / "t")
    assert run("attack", "--data", gauss / "data.csv", "--model", tmp_path / "t/model.json",
               "--distance", "l2-squared", "--step-size", 0.05, "--out", tmp_path / "a") == 0
    rows = read_csv(tmp_path / "a/attacks.csv")
    assert len(rows) == 120
    assert all(float(r["g_after"]) < 0 for r in rows if r["evaded"] == "1")


def test_dimension_mismatch_exit_one(tmp_path, gauss, capsys):
    run("synth", "--d", 3, "--out", tmp_path / "d3")
    run("train", "--data", tmp_path / "d3/data.csv", "--out", tmp_path / "t3")
    code = run("attack", "--data", gauss / "data.csv", "--model", tmp_path / "t3/model.json", "--out",
               tmp_path / "a")
    assert code == 1
    err = capsys.readouterr().err
    assert "2" in err and "3" in err


def test_missing_file_exit_one(tmp_path):
    assert run("train", "--data", tmp_path / "nope.csv", "--out", tmp_path / "t") == 1


# ------------------------------------------------------------------- curve


def test_curve_twenty_one_points(tmp_path, gauss):
    out = tmp_path / "c"
    assert run("curve", "--data", gauss / "data.csv", "--knowledge", "pk", "--budgets", "0:20:1",
               "--fp-rate", 0.02, "--distance", "l2-squared", "--step-size", 0.1, "--out", out) == 0
    rows = read_csv(out / "curve.csv")
    assert len(rows) == 21
    summary = json.loads((out / "summary.json").read_text())
    assert summary["curves"][0]["constraint_violations"] == 0
    tp = [float(r["tp_mean"]) for r in rows]
    assert all(b <= a for a, b in zip(tp, tp[1:]))


def test_curve_rejects_too_few_legitimate_samples(tmp_path, gauss):
    assert run("curve", "--data", gauss / "data.csv", "--fp-rate", 0.01, "--out", tmp_path / "c") == 1


def test_compare_outputs(tmp_path):
    run("synth", "--kind", "robust-fragile", "--n", 60, "--d", 5, "--n-fragile", 2, "--out", tmp_path / "d")
    out = tmp_path / "cmp"
    assert run("compare", "--data", tmp_path / "d/data.csv", "--domains", tmp_path / "d/domains.json", "--m", 2,
               "--folds", 3, "--budgets", "0:1/3", "--fp-rate", 0.05, "--knowledge", "pk", "lk",
               "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["arms"]) == {"wafs", "traditional"}
    assert (out / "trace_wafs_0.csv").exists() and (out / "trace_traditional_0.csv").exists()
    assert len(read_csv(out / "curves.csv")) == 2 * 2 * 3
