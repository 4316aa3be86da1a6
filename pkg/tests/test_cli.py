"""Command-line entry point and exit codes."""

import json
import shutil
import subprocess
import sys

import pytest
import yaml

from mkdvlab.cli import build_parser, main
from mkdvlab.experiments import KINDS, SCHEMA


def test_all_subcommands_exist():
    parser = build_parser()
    for kind in KINDS:
        args = parser.parse_args([kind, "--seed", "3", "--threads", "2", "--out", "x"])
        assert (args.command, args.seed, args.threads, args.out) == (kind, 3, 2, "x")


def test_passing_run(tmp_path, capsys):
    assert main(["verify-identities", "--out", str(tmp_path), "-q"]) == 0
    assert capsys.readouterr().out.startswith("PASS verify-identities (23/23 criteria")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] is True


def test_failing_run(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(yaml.safe_dump({"schema": SCHEMA, "kind": "verify-identities", "params": {"corrupt_c": 0.01}}))
    assert main(["verify-identities", "--config", str(cfg), "-q"]) == 1
    assert capsys.readouterr().out.startswith("FAIL verify-identities")


@pytest.mark.parametrize(
    "content",
    [
        {"schema": SCHEMA, "kind": "conservation-drift"},
        {"kind": "verify-identities"},
        {"schema": SCHEMA, "kind": "verify-identities", "extra": 1},
    ],
)
def test_config_errors(tmp_path, capsys, content):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(content))
    assert main(["verify-identities", "--config", str(cfg)]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["verify-identities", "--config", str(tmp_path / "none.yaml")]) == 2


@pytest.mark.parametrize("flag", [["--threads", "0"], ["--seed", "-1"]])
def test_bad_flags(flag):
    assert main(["verify-identities", *flag]) == 2


def test_box_rule_violation(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"schema": SCHEMA, "kind": "build-multibreather", "grid": {"L": 80.0, "N": 1024}}))
    assert main(["build-multibreather", "--config", str(cfg)]) == 2


def test_console_script(tmp_path):
    exe = shutil.which("mkdvlab")
    cmd = [exe] if exe else [sys.executable, "-m", "mkdvlab.cli"]
    proc = subprocess.run(cmd + ["verify-identities", "-q"], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.startswith("PASS")
