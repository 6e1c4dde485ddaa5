import subprocess
import sys
from pathlib import Path

import pytest

from widthlab import __version__
from widthlab.cli import DEFAULTS, main, resolve_config

SMALL_ENTROPY = """
[entropy]
count = 60
ambient_dim = 8
n_min = 1
n_max = 3
"""


def test_resolve_config_defaults_and_seed_override():
    cfg = resolve_config("entropy", None, None)
    assert cfg == DEFAULTS["entropy"]
    cfg = resolve_config("entropy", None, 123)
    assert cfg["seed"] == "123"


def test_resolve_config_reads_ini_sections(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text(SMALL_ENTROPY)
    cfg = resolve_config("entropy", str(path), None)
    assert cfg["count"] == "60"
    assert cfg["ambient_dim"] == "8"
    assert cfg["class"] == DEFAULTS["entropy"]["class"]


def test_resolve_config_missing_file_errors():
    with pytest.raises(SystemExit):
        resolve_config("entropy", "/nonexistent/widthlab.ini", None)


def run_cli(tmp_path, name, ini, seed=None, threads=1):
    cfg_path = tmp_path / "cfg.ini"
    cfg_path.write_text(ini)
    out = tmp_path / name
    argv = [name, "--config", str(cfg_path), "--out", str(out),
            "--threads", str(threads)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    assert main(argv) == 0
    return out


def test_entropy_command_outputs_are_deterministic(tmp_path):
    out1 = run_cli(tmp_path, "entropy", SMALL_ENTROPY, seed=5)
    csv1 = (out1 / "entropy.csv").read_text()
    assert csv1.startswith(f"# widthlab {__version__}")
    assert "count = 60" in csv1  # resolved config embedded in the header
    assert (out1 / "report.md").exists()

    rerun_dir = tmp_path / "again"
    rerun_dir.mkdir()
    out2 = run_cli(rerun_dir, "entropy", SMALL_ENTROPY, seed=5)
    assert (out2 / "entropy.csv").read_text() == csv1

    threaded_dir = tmp_path / "threaded"
    threaded_dir.mkdir()
    out3 = run_cli(threaded_dir, "entropy", SMALL_ENTROPY, seed=5, threads=4)
    assert (out3 / "entropy.csv").read_text() == csv1


def test_entropy_seed_changes_the_numbers(tmp_path):
    out1 = run_cli(tmp_path, "entropy", SMALL_ENTROPY, seed=5)
    other = tmp_path / "other"
    other.mkdir()
    out2 = run_cli(other, "entropy", SMALL_ENTROPY, seed=6)
    rows1 = (out1 / "entropy.csv").read_text().splitlines()
    rows2 = (out2 / "entropy.csv").read_text().splitlines()
    assert rows1 != rows2


def test_counterexample_command_smoke(tmp_path):
    out = run_cli(tmp_path, "counterexample", "[counterexample]\nk_max = 5\nn_max = 3\n")
    body = (out / "counterexample_maps.csv").read_text()
    assert body.count("\n") >= 5  # header + k = 2..5
    report = (out / "report.md").read_text()
    assert "true" in report


def test_unknown_class_label_fails_without_artifacts(tmp_path):
    out = tmp_path / "entropy"
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[entropy]\nclass = bogus\n")
    with pytest.raises(SystemExit):
        main(["entropy", "--config", str(cfg), "--out", str(out)])
    assert not list(out.glob("*.csv"))


def test_interp_command_smoke(tmp_path):
    ini = "[interp]\nmap = plane-wave\neps = 0.02\nmin_levels = 2\n"
    out = run_cli(tmp_path, "interp", ini)
    levels = (out / "interp_levels.csv").read_text()
    header = [line for line in levels.splitlines()
              if not line.startswith("#")][0]
    assert header.split(",") == [
        "level", "subdivisions", "h", "sup_err", "lip_excess",
        "sup_err_smooth", "lip_excess_smooth"]


def test_reproduce_script_advertises_usage():
    script = Path(__file__).resolve().parents[1] / "scripts" / "reproduce_reports.py"
    proc = subprocess.run([sys.executable, str(script), "--help"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert "--quick" in proc.stdout
