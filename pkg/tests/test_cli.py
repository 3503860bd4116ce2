import json
import subprocess
import sys

import numpy as np
import pytest

from bergwehrl.cli import main
from bergwehrl.space import SpaceParams, dumps, random_poly


def run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def payload(path):
    doc = json.loads(path.read_text())
    doc.pop("timestamp")
    return doc


@pytest.mark.parametrize("args,expected", [
    (["table", "rhs", "--probe", "power:1", "--n", "1", "--alpha", "2"], "1.000000000"),
    (["table", "j", "--n", "1", "--alpha", "2", "--s", "1"], "0.500000000"),
    (["table", "entropy-bound", "--n", "1", "--alpha", "2"], "2.000000000"),
])
def test_tables(args, expected, capsys):
    code, out = run(args, capsys)
    lines = out.out.strip().split("\n")
    assert code == 0 and lines[1].split(",")[1] == expected


def test_table_over_alpha_list(capsys):
    code, out = run(["table", "entropy-bound", "--alpha", "1.5,2,3"], capsys)
    rows = [line.split(",") for line in out.out.strip().split("\n")[1:]]
    assert [float(v) for _, v in rows] == pytest.approx([6.0, 2.0, 0.75], abs=1e-9)


def test_verify_wehrl_coherent_equality(tmp_path, capsys):
    out = tmp_path / "w.json"
    code, _ = run(["verify", "wehrl", "--n", "1", "--alpha", "2", "--probe", "power:2", "--fn", "coherent:0.5",
                   "--samples", "50000", "--out", str(out)], capsys)
    doc = json.loads(out.read_text())
    assert code == 0 and doc["report"]["verdict"] == "equality-band"
    assert doc["run_config"]["fn"] == "coherent:0.5" and "timestamp" in doc


def test_verify_identities(capsys):
    code, out = run(["verify", "identities", "--n", "2", "--alpha", "3"], capsys)
    assert code == 0 and json.loads(out.out)["report"]["all_ok"]


@pytest.mark.parametrize("args", [
    ["verify", "wehrl", "--n", "1", "--alpha", "1"],
    ["verify", "wehrl", "--n", "2", "--alpha", "1.5"],
    ["verify", "wehrl", "--probe", "cube"],
    ["verify", "wehrl", "--fn", "coherent:2"],
    ["verify", "faber-krahn", "--set", "ball:inf"],
    ["verify", "wehrl", "--fn", "poly:/nonexistent.json"],
])
def test_usage_errors_exit_2(args, capsys):
    code, out = run(args, capsys)
    assert code == 2 and "error" in out.err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as err:
        main(["verify", "nonsense"])
    assert err.value.code == 2


def test_violation_exit_1(monkeypatch, capsys):
    import bergwehrl.bounds as b
    monkeypatch.setattr(b, "theorem_a_rhs", lambda probe, params: 0.0)
    code, _ = run(["verify", "wehrl", "--fn", "random:3:1", "--samples", "4000"], capsys)
    assert code == 1


def test_integration_failure_exit_3(monkeypatch, capsys):
    import bergwehrl.bounds as b
    from bergwehrl.quadrature import IntegrationError

    def boom(*a, **k):
        raise IntegrationError("non-finite integrand value nan", np.array([0.5]))
    monkeypatch.setattr(b, "integrate_probe", boom)
    code, out = run(["verify", "wehrl", "--samples", "1000"], capsys)
    assert code == 3 and "z=" in out.err


def test_poly_file_and_sets(tmp_path, capsys):
    f = random_poly(SpaceParams(2, 3.0), 3, np.random.default_rng(0))
    path = tmp_path / "f.json"
    path.write_text(dumps(f))
    for set_spec in ("ball:0.5:0.1,0.2j", "annulus:0.2:0.6", "superlevel:0.05"):
        code, out = run(["verify", "faber-krahn", "--n", "2", "--alpha", "3", "--fn", f"poly:{path}",
                         "--set", set_spec, "--samples", "20000", "--format", "csv"], capsys)
        header, row = out.out.strip().split("\n")
        assert code == 0 and header.startswith("check,") and row.split(",")[9] in ("holds", "equality-band")


def test_mixture_and_pointwise(capsys):
    code, _ = run(["verify", "mixture", "--fn", "mixed:2:3:4", "--samples", "20000"], capsys)
    assert code == 0
    code, out = run(["verify", "pointwise", "--fn", "random:4:2", "--samples", "5000"], capsys)
    assert code == 0 and json.loads(out.out)["report"]["verdict"] in ("holds", "equality-band")


def _twice(args, path, capsys):
    assert run(args + ["--out", str(path)], capsys)[0] == 0
    first = payload(path)
    assert run(args + ["--out", str(path)], capsys)[0] == 0
    return first, payload(path)


def test_reports_are_reproducible(tmp_path, capsys):
    a, b = _twice(["verify", "wehrl", "--fn", "random:4:3", "--probe", "hinge:0.3", "--samples", "20000",
                   "--seed", "9"], tmp_path / "w.json", capsys)
    assert a == b
    a, b = _twice(["extremize", "--degree", "2", "--restarts", "2", "--samples", "2000"], tmp_path / "e.json", capsys)
    assert a == b
    assert not list(tmp_path.glob(".bergwehrl-*"))


def test_extremize_affine_and_degree_zero(capsys):
    code, out = run(["extremize", "--probe", "power:1", "--degree", "3", "--restarts", "2", "--samples", "2000"],
                    capsys)
    rep = json.loads(out.out)["report"]
    assert code == 0 and all(r["iterations"] == 0 for r in rep["restarts"])
    assert rep["fresh_value"]["mean"] == pytest.approx(1.0, rel=1e-12)
    code, out = run(["extremize", "--degree", "0", "--restarts", "1", "--samples", "2000"], capsys)
    rep = json.loads(out.out)["report"]
    assert code == 0 and abs(rep["fresh_value"]["mean"] - 1 / 3) < 1e-3


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "bergwehrl.cli", "table", "j", "--s", "1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "0.500000000" in res.stdout
