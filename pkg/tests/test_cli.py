import io
import json
import os

import pytest

from dtnrecon import config as cfg
from dtnrecon.cli import run
from dtnrecon.errors import ConfigError
from dtnrecon.mesh import generate_unit_square, write_mesh


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def sq8(tmp_path):
    path = tmp_path / "sq8.msh"
    path.write_text(write_mesh(generate_unit_square(8)))
    return str(path)


def test_config_parsing(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"mesh": {"generator": "square", "n": 4, "refine": 1}, "coeffs": "aniso-rot",
                                "omega": [2, 1], "tolerances": {"rank_tol": 1e-9},
                                "contour": {"n_quad": 32}, "lambda_samples": [[1, 2], [1, -2]]}))
    conf = cfg.load_config(str(path))
    assert conf.omega == (1, 2)
    assert conf.tolerances.rank_tol == 1e-9 and conf.tolerances.cluster_tol == 1e-8
    assert conf.lambda_samples == (1 + 2j, 1 - 2j)
    assert cfg.build_mesh(conf.mesh).n_triangles == 4 * 4 * 16
    assert cfg.build_coeffs(conf.coeffs)[1] == "aniso-rot"


@pytest.mark.parametrize("doc", [{"bogus": 1}, {"omega": []}, {"tolerances": {"rank_tol": "x"}},
                                 {"contour": {"n_quad": 1.5}}, {"lambda_samples": [[1]]}, []])
def test_config_schema_violations(doc):
    with pytest.raises(ConfigError):
        cfg.RunConfig.from_dict(doc)


def test_coefficient_object_and_file(tmp_path):
    spec = {"A": [[1, 0], [0, "1 + x"]], "b": [[0, 0.1], 0], "c": "y", "ellipticity": 1.0}
    expr, cid = cfg.build_coeffs(spec)
    assert cid == "custom"
    s = expr.sample([[0.5, 0.5]])
    assert s.A[0, 1, 1] == pytest.approx(1.5) and s.b[0, 0] == pytest.approx(0.1j)
    path = tmp_path / "laplace.json"
    path.write_text(json.dumps({"builtin": "laplace"}))
    assert cfg.build_coeffs(str(path))[1] == "laplace"
    assert cfg.gauge_eps("gauge(0.05)") == 0.05
    with pytest.raises(ConfigError):
        cfg.build_coeffs("nope")


def test_eig_json(sq8, tmp_path):
    out = tmp_path / "eig.json"
    code, text, _ = _run("eig", "--mesh", sq8, "--coeffs", "laplace", "--count", "5", "--out", str(out))
    assert code == 0 and text.startswith("eig:")
    doc = json.loads(out.read_text())
    assert doc["eigenvalues"][0] == pytest.approx(2 * 3.14159265**2, rel=0.05)
    assert doc["clusters"][1]["multiplicity"] == 2
    assert (tmp_path / "eig.csv").exists()


def test_dtn_schema(sq8):
    code, text, _ = _run("dtn", "--mesh", sq8, "--lambda", "1", "2")
    doc = json.loads(text)
    assert code == 0
    assert doc["lambda"] == [1.0, 2.0]
    n = len(doc["basis_nodes"])
    assert n == 7 and len(doc["matrix"]) == n and all(len(r) == n and len(r[0]) == 2 for r in doc["matrix"])


def test_verify_passes(sq8):
    code, text, _ = _run("verify", "--mesh", sq8, "--coeffs", "aniso-rot", "--omega", "1")
    assert code == 0
    assert json.loads(text)["passed"]


def test_poles_without_mesh():
    code, _, err = _run("poles", "--interval", "10", "60")
    assert code == 2 and "mesh" in err


@pytest.mark.parametrize("argv", [["eig", "--mesh", "missing.msh", "--count", "2"], ["eig", "--bogus"],
                                  ["frobnicate"], ["eig", "--mesh", "square:4"], ["dtn", "--mesh", "square:4", "--omega", "9"],
                                  ["eig", "--mesh", "square:4", "--coeffs", "gauge(500)", "--count", "2"],
                                  ["poles", "--mesh", "square:4", "--interval", "5", "1"],
                                  ["poles", "--mesh", "square:4", "--interval", "10", "60", "--n-quad", "24"]])
def test_invalid_inputs_exit_2(argv):
    assert _run(*argv)[0] == 2


def test_bad_config_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert _run("eig", "--config", str(path), "--count", "2")[0] == 2


def test_near_eigenvalue_exit_3(sq8):
    code, text, _ = _run("eig", "--mesh", sq8, "--count", "1")
    lam1 = json.loads(text)["eigenvalues"][0]
    code, _, err = _run("dtn", "--mesh", sq8, "--lambda", repr(lam1), "0")
    assert code == 3 and "eigenvalue" in err


def test_mesh_command(tmp_path):
    out = tmp_path / "m.msh"
    code, text, _ = _run("mesh", "--generate", "lshape", "--n", "4", "--refine", "1", "--out", str(out))
    assert code == 0 and "nodes" in text
    code, text, _ = _run("assemble-info", "--mesh", str(out))
    doc = json.loads(text)
    assert doc["is_real"] and doc["hermitian_defect"] == 0.0


def test_config_and_flag_override(tmp_path, sq8):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"mesh": "square:4", "coeffs": "laplace", "omega": [1]}))
    a = json.loads(_run("dtn", "--config", str(path))[1])
    b = json.loads(_run("dtn", "--config", str(path), "--mesh", sq8)[1])
    assert len(a["basis_nodes"]) == 3 and len(b["basis_nodes"]) == 7


@pytest.mark.parametrize("argv", [
    ["poles", "--mesh", "square:8", "--interval", "10", "60"],
    ["recon", "--mesh", "square:8", "--interval", "10", "60"],
    ["ucp", "--mesh", "square:8", "--count", "6"],
    ["density", "--mesh", "square:8", "--count", "3"],
    ["gauge", "--mesh", "square:4", "--clusters", "3"],
])
def test_byte_identical_reruns(tmp_path, argv):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert _run(*argv, "--out", str(out))[0] == 0
        outs.append((out.read_bytes(), (tmp_path / f"r{k}.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_parallel_mode_recorded(tmp_path):
    s = json.loads(_run("poles", "--mesh", "square:8", "--interval", "10", "60")[1])
    p = json.loads(_run("poles", "--mesh", "square:8", "--interval", "10", "60", "--threads", "3")[1])
    assert s["meta"]["mode"] == "serial" and p["meta"]["mode"] == "parallel(3)"
    for a, b in zip(s["poles"], p["poles"]):
        assert abs(a["lambda"] - b["lambda"]) < 1e-13 * a["lambda"]


def test_recon_report_fields():
    doc = json.loads(_run("recon", "--mesh", "square:8", "--interval", "10", "60")[1])
    rec = doc["poles"][1]
    for key in ("lambda", "multiplicity", "residual_rank", "sv", "angles", "residual_formula_err"):
        assert key in rec
    assert rec["multiplicity"] == 2 and max(rec["angles"]) < 1e-6
    assert set(doc["meta"]) >= {"mesh_file", "coeff_id", "omega_labels", "n_quad", "tolerances"}


def test_gauge_builtin_coeffs_eig():
    code, text, _ = _run("eig", "--mesh", "square:8", "--coeffs", "gauge(0.05)", "--count", "3")
    base = json.loads(_run("eig", "--mesh", "square:8", "--count", "3")[1])
    doc = json.loads(text)
    assert code == 0
    assert doc["eigenvalues"][0] == pytest.approx(base["eigenvalues"][0], rel=5e-3)
    assert doc["eigenvalues"][0] != base["eigenvalues"][0]
