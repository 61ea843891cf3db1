import csv
import json
import math
import subprocess
import sys

import pytest

from qmf import cli


def write(tmp_path, cfg, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def run(tmp_path, cfg, **kw):
    p = write(tmp_path, cfg)
    out = tmp_path / "out"
    code = cli.run(p, out=out, **kw)
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


EMF = {
    "schema": "qmf/1",
    "mode": "emf",
    "tree": {"cayley": {"k": 1, "depth": 7}},
    "field": "example",
    "observables": ["e11@[]", "e11@[1]*e11@[1,1]"],
}


def test_emf_mode(tmp_path):
    code, rep, _ = run(tmp_path, EMF)
    assert code == 0
    phi = [o["phi"]["re"] for o in rep["observables"]]
    assert abs(phi[0] - 0.5) < 1e-12 and abs(phi[1] - 1 / 6) < 1e-12
    assert rep["classicality"]["rank"] == 4
    assert all(c["passed"] for c in rep["checks"])


def test_emf_random_field_on_edge_tree(tmp_path):
    cfg = {
        "schema": "qmf/1",
        "mode": "emf",
        "seed": 3,
        "tree": {"edges": [[[], [1]], [[1], [1, 1]], [[1, 1], [1, 1, 1]], [[], [2]], [[2], [2, 1]]], "root": []},
        "field": {"random": {"phases": True}},
        "observables": ["e12@[]", "I@[2]"],
        "classicality": None,
    }
    code, rep, _ = run(tmp_path, cfg)
    assert code == 0
    assert abs(rep["observables"][1]["phi"]["re"] - 1) < 1e-12


def test_chain_mode(tmp_path):
    cfg = {"schema": "qmf/1", "mode": "chain", "chain": {"kernel": "hopping", "beta": 0.5}}
    code, rep, out = run(tmp_path, cfg)
    assert code == 0
    c = rep["chains"][0]
    assert abs(c["alpha"] - math.cosh(0.5) ** -4) < 1e-12
    assert max(c["compatibility"].values()) <= 1e-10
    rows = list(csv.DictReader((out / "decay.csv").open()))
    assert rows and rows[0]["kernel"] == "hopping"


def test_chain_mode_beta_grid_and_custom_kernel(tmp_path):
    cfg = {
        "schema": "qmf/1",
        "mode": "chain",
        "chain": {"kernel": {"H": [[0, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 0]]}, "betas": [0.2, 0.4]},
        "clustering": {"N": 5},
    }
    code, rep, _ = run(tmp_path, cfg)
    assert code == 0
    assert [c["beta"] for c in rep["chains"]] == [0.2, 0.4]
    assert abs(rep["chains"][0]["alpha"] - math.cosh(0.2) ** -4) < 1e-12


def test_verify_mode_tags_every_check(tmp_path):
    code, rep, _ = run(tmp_path, {"schema": "qmf/1", "mode": "verify"})
    assert code == 0
    assert rep["passed"]
    assert all(c["ref"] and c["ref"] != "invented" for c in rep["checks"])


def test_output_is_deterministic(tmp_path):
    p = write(tmp_path, {**EMF, "field": {"random": {}}})
    cli.run(p, seed=7, out=tmp_path / "a")
    cli.run(p, seed=7, out=tmp_path / "b")
    cli.run(p, seed=8, out=tmp_path / "c")
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    assert a != (tmp_path / "c" / "report.json").read_bytes()


@pytest.mark.parametrize(
    "cfg, field",
    [
        ({"mode": "emf"}, "schema"),
        ({"schema": "qmf/1", "mode": "plot"}, "mode"),
        ({"schema": "qmf/1", "mode": "chain", "chain": {"kernel": "ising", "beta": 1}}, "chain.kernel"),
        ({"schema": "qmf/1", "mode": "chain", "chain": {"kernel": "hopping"}}, "chain.beta"),
        ({**EMF, "tree": {"cayley": {"k": 0, "depth": 3}}}, "tree.cayley.k"),
        ({**EMF, "observables": ["e31@[]"]}, "observables[0]"),
        ({**EMF, "observables": ["e11@[5]"]}, "observables[0]"),
        ({**EMF, "field": {"constant": [[1, 0.5], [0.5, 1]]}}, "field"),
        ({**EMF, "seed": "x"}, "seed"),
    ],
)
def test_schema_errors_name_the_field(tmp_path, capsys, cfg, field):
    code, _, _ = run(tmp_path, cfg)
    assert code == 2
    assert f"config error: {field}" in capsys.readouterr().err


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.run(p, out=tmp_path) == 2


def test_truncation_exit(tmp_path):
    cfg = {**EMF, "tree": {"cayley": {"k": 2, "depth": 2}}, "observables": ["e11@[1,1]"]}
    code, _, _ = run(tmp_path, cfg)
    assert code == 3


def test_solver_exit(tmp_path):
    cfg = {"schema": "qmf/1", "mode": "chain", "chain": {"kernel": {"K": [[0] * 4] * 4}}}
    code, _, _ = run(tmp_path, cfg)
    assert code == 4


def test_check_failure_exit(tmp_path):
    # a w0 that is normalized but violates the initial condition fails shift invariance
    a = math.cosh(0.5) ** 4
    cfg = {
        "schema": "qmf/1",
        "mode": "chain",
        "chain": {"kernel": "hopping", "beta": 0.5, "w0": [[1.5 * a, 0], [0, 0.5 * a]]},
        "observables": ["e11@[]"],
    }
    code, rep, _ = run(tmp_path, cfg)
    assert code == 1
    assert not rep["passed"]


def test_console_entry_point(tmp_path):
    p = write(tmp_path, EMF)
    res = subprocess.run([sys.executable, "-m", "qmf", "run", str(p), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "PASS" in res.stderr


def test_observable_parser():
    a = cli.parse_observable("e12@[1] * e21@[1]", 2, "obs")
    assert a.support == ((1,),)
    assert a.matrix[0, 0] == 1 and abs(a.matrix).sum() == 1
    with pytest.raises(cli.ConfigError):
        cli.parse_observable("x11@[1]", 2, "obs")
