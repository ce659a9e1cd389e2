import csv
import subprocess
import sys
from pathlib import Path

import pytest

from synthcapt.cli import main

SMOKE = str(Path(__file__).resolve().parents[1] / "configs" / "smoke.toml")


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert main(["eval", "--help"]) == 0
    out = capsys.readouterr().out
    assert "--config" in out and "--seed" in out and "--out" in out


def test_usage_errors_exit_two(capsys, tmp_path):
    assert main(["eval", "--config", SMOKE, "--bogus"]) == 2
    assert main(["frobnicate"]) == 2
    assert main([]) == 2
    assert main(["eval", "--config", str(tmp_path / "missing.toml")]) == 2
    assert "not found" in capsys.readouterr().err
    bad = tmp_path / "bad.toml"
    bad.write_text("[experiment]\nmethod = 'nope'\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_report_without_metrics_fails(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 1
    assert "no metrics.json" in capsys.readouterr().err


def test_compare_methods_and_report(tmp_path, capsys):
    out = tmp_path / "results"
    assert main(["compare-methods", "--config", SMOKE, "--out", str(out)]) == 0
    with (out / "methods.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "variant" and [r[0] for r in rows[1:]] == ["p2p", "t2s", "s2s"]
    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert table.startswith("| run |") and table.count("smoke-") == 3


def test_pipeline_subcommands(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["gen-corpus", "--config", SMOKE, "--out", str(out), "--seed", "7"]) == 0
    assert (out / "seed7" / "manifest.json").is_file()
    assert main(["train", "--config", SMOKE, "--out", str(out), "--seed", "7"]) == 0
    assert (out / "seed7" / "checkpoints" / "weakly_s.pt").is_file()
    assert main(["eval", "--config", SMOKE, "--out", str(out), "--seed", "7"]) == 0
    assert "AUC median" in capsys.readouterr().out
    assert (out / "metrics.json").is_file()


def test_ablate_and_stress(tmp_path, capsys):
    assert main(["ablate", "--config", SMOKE, "--out", str(tmp_path / "abl")]) == 0
    with (tmp_path / "abl" / "ablation.csv").open() as fh:
        assert [r[0] for r in list(csv.reader(fh))[1:]] == ["full", "NO-SYNTH-ERR", "NO-L2-ADAPT", "NO-L1L2-TRAIN"]
    assert main(["stress", "--config", SMOKE, "--out", str(tmp_path / "st"), "--seed", "3"]) == 0
    assert "Att_TTS" in capsys.readouterr().out
    assert (tmp_path / "st" / "seed3").is_dir()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "synthcapt", "report", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "usage" in proc.stdout
