import json
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from phasepovm import io
from phasepovm.cli import main

HUSIMI = """
    seed = 0
    [space]
    d = 1
    n_cut = 20
    [T]
    preset = "vacuum"
    [density]
    grid = 41
    range = [-4.0, 4.0]
    [quadrature]
    nodes = 40
    scheme = "polar"
    [[regions]]
    name = "disc"
    kind = "ball"
    center = [0.0, 0.0]
    radius = 2.0
    [sample]
    n = 2000
    half_width = 7.0
"""


@pytest.fixture
def husimi(tmp_path):
    path = tmp_path / "husimi.toml"
    path.write_text(textwrap.dedent(HUSIMI))
    return path


def run(cmd, config, out, *extra):
    return main([cmd, "--config", str(config), "--out", str(out), *extra])


def test_density_grid(husimi, tmp_path):
    assert run("density", husimi, tmp_path / "o") == 0
    header, data = io.read_csv(tmp_path / "o" / "density.csv")
    assert header == ["q1", "p1", "value"] and data.shape == (41 * 41, 3)
    origin = data[(data[:, 0] == 0) & (data[:, 1] == 0), 2]
    assert origin[0] == pytest.approx(0.159155, abs=1e-6)


def test_measure(husimi, tmp_path):
    assert run("measure", husimi, tmp_path / "o") == 0
    doc = json.loads((tmp_path / "o" / "measure.json").read_text())
    region = doc["regions"][0]
    assert region["name"] == "disc"
    assert region["probability"] == pytest.approx(1 - np.exp(-2), abs=1e-12)
    assert region["operator"]["dim"] == 21


def test_sample_byte_identical(husimi, tmp_path):
    assert run("sample", husimi, tmp_path / "a") == 0
    assert run("sample", husimi, tmp_path / "b") == 0
    a = (tmp_path / "a" / "samples.csv").read_bytes()
    assert a == (tmp_path / "b" / "samples.csv").read_bytes()
    assert a.splitlines()[0] == b"q1,p1"
    assert run("sample", husimi, tmp_path / "c", "--seed", "9") == 0
    assert (tmp_path / "c" / "samples.csv").read_bytes() != a


def test_verify_d1_vacuum(tmp_path):
    cfg = tmp_path / "v.toml"
    cfg.write_text("[space]\nd = 1\nn_cut = 10\n")
    assert run("verify", cfg, tmp_path / "o", "--threads", "1") == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert doc["passed"] and all(c["passed"] for c in doc["checks"].values())


def test_verify_failure_status(tmp_path, capsys):
    cfg = tmp_path / "v.toml"
    cfg.write_text("[space]\nd = 3\nn_cut = 3\n[T]\noccupation = [1, 0, 0]\n")
    assert run("verify", cfg, tmp_path / "o") == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["status"] == 1 and "invariance" in err["reason"]


def test_validate_trace_sum_violation(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[space]\nd = 3\nn_cut = 2\n[T]\nblocks = [{ l = 1, real = [[0.5]] }]\n")
    assert run("validate", cfg, tmp_path / "o") == 1
    line = capsys.readouterr().err.strip()
    assert "\n" not in line
    assert "trace sum" in json.loads(line)["reason"]


def test_validate_ok(husimi, tmp_path):
    assert run("validate", husimi, tmp_path / "o") == 0
    doc = json.loads((tmp_path / "o" / "validate.json").read_text())
    assert doc["passed"] and doc["space"]["dim"] == 21


def test_parse_error_status(tmp_path, capsys):
    cfg = tmp_path / "x.toml"
    cfg.write_text("[space]\nd = 1\nn_cut = 3\ncolour = 'red'\n")
    assert run("validate", cfg, tmp_path / "o") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_numerical_abort_status(tmp_path, capsys):
    cfg = tmp_path / "s.toml"
    cfg.write_text("[space]\nd = 1\nn_cut = 4\n[sample]\nn = 10\nhalf_width = 1.0\n")
    assert run("sample", cfg, tmp_path / "o") == 3
    assert json.loads(capsys.readouterr().err)["error"] == "SamplingError"


def test_invalid_matrix_status(tmp_path):
    cfg = tmp_path / "m.toml"
    cfg.write_text("[space]\nd = 1\nn_cut = 1\n[T]\nmatrix = { real = [[1.5, 0.0], [0.0, -0.5]] }\n")
    assert run("density", cfg, tmp_path / "o") == 1


def test_threads_env(husimi, tmp_path, monkeypatch):
    monkeypatch.setenv("PHASEPOVM_THREADS", "1")
    assert run("validate", husimi, tmp_path / "o") == 0
    monkeypatch.setenv("PHASEPOVM_THREADS", "many")
    assert run("validate", husimi, tmp_path / "o") == 2


def test_module_entry_point(husimi, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "phasepovm", "validate", "--config", str(husimi), "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr


def test_bad_command_is_usage_error(husimi):
    with pytest.raises(SystemExit) as exc:
        main(["plot", "--config", str(husimi)])
    assert exc.value.code == 2
