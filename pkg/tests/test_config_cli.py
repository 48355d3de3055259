import json
from pathlib import Path

import numpy as np
import pytest

from accretiv import cli, config, fieldio
from accretiv.grid import GridSpec

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

LAPLACE = """
[grid]
extents = [1.0, 1.0]
points = 8

[coefficients]
A = "1"
"""


def write(tmp_path, text, name="job.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(args, tmp_path):
    return cli.main(args + ["--out", str(tmp_path / "out")])


# ---------------------------------------------------------------- config


def test_config_builds_identity_from_scalar():
    job = config.loads(LAPLACE)
    cs = job.build()
    np.testing.assert_allclose(cs.A, np.broadcast_to(np.eye(2), (8, 8, 2, 2)))
    assert job.resolved()["coefficients"]["A"] == "1.0"


@pytest.mark.parametrize("text,match", [
    ("[grid]\nextents = [1.0]\n", "points"),
    ("[grid]\nextents = [1.0]\npoints = 4\n[bogus]\n", "unknown sections"),
    ("[grid]\nextents = [1.0, 1.0]\npoints = 4\n[coefficients]\nb = \"1\"\n", "shape"),
    ("[grid]\nextents = [1.0, 1.0]\npoints = 4\n[coefficients]\nA = \"1 +\"\n", "line 1"),
    ("[grid]\nextents = [1.0]\npoints = 4\n[coefficients]\nc = \"k * x1\"\n", "unbound"),
])
def test_config_errors(text, match):
    with pytest.raises(config.ConfigError, match=match):
        config.loads(text).build()


def test_sweep_parsing():
    name, vals = config.parse_sweep("lambda=0:1:5")
    assert name == "lambda"
    np.testing.assert_allclose(vals, [0, 0.25, 0.5, 0.75, 1])
    with pytest.raises(config.ConfigError):
        config.parse_sweep("lambda=0:1")


def test_field_file_entry(tmp_path):
    g = GridSpec.box([1.0], 6)
    fieldio.write_field(tmp_path / "c.afld", np.full(g.shape, -2.0), g.extents)
    job = config.load(write(tmp_path, "[grid]\nextents = [1.0]\npoints = 6\n[coefficients]\nA = \"1\"\nc_file = \"c.afld\"\n"))
    np.testing.assert_allclose(job.build().c, -2.0)


# ------------------------------------------------------------------- CLI


def test_check_laplacian_passes(tmp_path, capsys):
    assert run(["check", "--config", write(tmp_path, LAPLACE)], tmp_path) == cli.EXIT_PASS
    assert "verdict: accretive" in capsys.readouterr().out
    doc = json.loads((tmp_path / "out" / "check.json").read_text())
    assert doc["verdict"] == "accretive" and doc["config"]["grid"]


def test_check_strongly_negative_potential_fails(tmp_path):
    assert run(["check", "--config", write(tmp_path, LAPLACE + 'c = "100"\n')], tmp_path) == cli.EXIT_FAIL


def test_corrupt_field_file_is_input_error(tmp_path, capsys):
    (tmp_path / "A.afld").write_bytes(b"AFLD1 garbage")
    cfg = write(tmp_path, LAPLACE.replace('A = "1"', 'A_file = "A.afld"'))
    assert run(["check", "--config", cfg], tmp_path) == cli.EXIT_INPUT
    assert "A.afld" in capsys.readouterr().err


def test_missing_config_and_bad_args(tmp_path):
    assert run(["check"], tmp_path) == cli.EXIT_INPUT
    assert run(["check", "--config", str(tmp_path / "nope.toml")], tmp_path) == cli.EXIT_INPUT
    assert run(["frobnicate"], tmp_path) == cli.EXIT_INPUT
    assert run(["check", "--config", write(tmp_path, LAPLACE), "--tol", "-1"], tmp_path) == cli.EXIT_INPUT


def test_disagreement_is_invariant_violation(tmp_path, monkeypatch, capsys):
    real = cli.accretivity.check

    def lying(*a, **kw):
        direct, prop1 = real(*a, **kw)
        prop1.verdict = "not-accretive"
        return direct, prop1

    monkeypatch.setattr(cli.accretivity, "check", lying)
    assert run(["check", "--config", write(tmp_path, LAPLACE)], tmp_path) == cli.EXIT_INVARIANT
    assert "invariant violation" in capsys.readouterr().out


def test_sweep_writes_table(tmp_path, capsys):
    cfg = write(tmp_path, LAPLACE + 'c = "k"\n')
    code = run(["check", "--config", cfg, "--sweep", "k=0:400:3"], tmp_path)
    assert code == cli.EXIT_FAIL
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("k,verdict") and len(lines) == 4
    assert "accretive" in lines[1] and "not-accretive" in lines[3]
    assert "form_lambda_min" in capsys.readouterr().out


def test_reduce_log_rotation(tmp_path):
    assert run(["reduce", "--config", str(CONFIGS / "log_rotation.toml")], tmp_path) == cli.EXIT_PASS
    doc = json.loads((tmp_path / "out" / "reduce.json").read_text())
    assert doc["max_abs_sigma"] < 1e-6
    sigma = fieldio.read_field(tmp_path / "out" / "sigma.afld")
    assert np.abs(sigma.values).max() < 1e-6


def test_trace_rejects_c5_in_two_dimensions(tmp_path, capsys):
    assert run(["trace", "--config", str(CONFIGS / "dyadic_2d.toml")], tmp_path) == cli.EXIT_INPUT
    assert "c5" in capsys.readouterr().err


def test_trace_lebesgue_3d(tmp_path, capsys):
    assert run(["trace", "--config", str(CONFIGS / "lebesgue_3d.toml")], tmp_path) == cli.EXIT_PASS
    doc = json.loads((tmp_path / "out" / "trace.json").read_text())
    assert doc["c5"] == pytest.approx(4 / 3 * (1 - 4.0 ** -5), rel=1e-10)


def test_hardy_check1d_writes_certificate(tmp_path):
    assert run(["check1d", "--config", str(CONFIGS / "hardy.toml")], tmp_path) == cli.EXIT_PASS
    doc = json.loads((tmp_path / "out" / "check1d.json").read_text())
    cert = Path(doc["files"]["riccati_certificate.csv"])
    assert cert.is_file() and cert.read_text().count("\n") > 100


def test_hodge_log_rotation(tmp_path):
    assert run(["hodge", "--config", str(CONFIGS / "log_rotation.toml")], tmp_path) == cli.EXIT_PASS
    doc = json.loads((tmp_path / "out" / "hodge.json").read_text())
    assert doc["classification"] == "unclassified"
    assert (tmp_path / "out" / "g.afld").is_file()
