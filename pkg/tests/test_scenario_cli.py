"""Scenario grammar, file parsing, CLI commands, reports and exit codes."""

import json

import numpy as np
import pytest

from warpquot import cli
from warpquot import expr
from warpquot import scenario as sc
from warpquot.errors import ScenarioError


# ---------------------------------------------------------------------------
# expression grammar

def test_expr_arithmetic_and_functions():
    f = expr.compile_expr("exp(-r) * sin(th) + max(r, 2) ** 2", ["r", "th"])
    r, th = 0.7, 1.1
    assert f([r, th]) == pytest.approx(np.exp(-r) * np.sin(th) + 4.0)


def test_expr_constants_and_unary():
    f = expr.compile_expr("-pi / 2 + +x", ["x"])
    assert f([1.0]) == pytest.approx(1.0 - np.pi / 2)


def test_expr_smoothstep_clamps():
    f = expr.compile_expr("smoothstep(t)", ["t"])
    assert f([-1.0]) == 0.0
    assert f([2.0]) == 1.0
    assert f([0.5]) == pytest.approx(0.5)


@pytest.mark.parametrize("bad", [
    "__import__('os')",
    "x.real",
    "lambda t: t",
    "[1, 2]",
    "unknown_name",
    "f(3)",
    "x if x else 0",
    "x @ x",
    "'str'",
])
def test_expr_rejects_outside_grammar(bad):
    with pytest.raises(ScenarioError):
        expr.compile_expr(bad, ["x", "t"])


def test_expr_syntax_error_has_position():
    with pytest.raises(ScenarioError, match="line"):
        expr.compile_expr("1 +", ["x"])


# ---------------------------------------------------------------------------
# scenario parsing

def polar_scenario_dict():
    return {
        "name": "file-polar",
        "factors": [
            {"name": "base", "dim": 1, "coords": ["r"], "metric": "euclidean",
             "box": [[0.5, 3.0]]},
            {"name": "fiber", "dim": 1, "coords": ["th"], "metric": "euclidean",
             "box": [[0.0, 6.2]]},
        ],
        "warps": {"lam1": "1", "lam2": "r", "lam2_dependency": "on-factor1-only"},
        "basepoint": [2.0, 0.5],
        "expect": {"classification": "warped"},
    }


def mobius_scenario_dict():
    return {
        "name": "file-mobius",
        "factors": [
            {"name": "x-line", "dim": 1, "coords": ["x"], "metric": "euclidean",
             "box": [[0.0, 1.0]]},
            {"name": "y-line", "dim": 1, "coords": ["y"], "metric": "euclidean",
             "box": [[-1.0, 1.0]]},
        ],
        "warps": {"lam1": "1", "lam2": "1"},
        "generators": [
            {"name": "a", "phi": ["x + 1"], "phi_inv": ["x - 1"],
             "psi": ["-y"], "psi_inv": ["-y"]},
        ],
        "fundamental_box": [[0.0, 1.0], [-1000000.0, 1000000.0]],
        "holonomy_loops": {"1": [[["a", 1]]]},
        "basepoint": [0.0, 0.0],
        "expect": {"holonomy": {"1": [[[-1.0]]]}},
    }


def test_parse_polar_scenario():
    ctx = sc.parse_scenario(polar_scenario_dict())
    assert ctx.dtp.n == 2
    assert ctx.dtp.assembled.mat([2.0, 0.1])[1, 1] == pytest.approx(4.0)
    assert ctx.model is None


def test_parse_scenario_with_generators_and_loops():
    ctx = sc.parse_scenario(mobius_scenario_dict())
    assert ctx.model is not None
    rep, word = ctx.model.canonical_rep([1.3, 0.5])
    assert np.allclose(rep, [0.3, -0.5])
    assert ctx.holonomy_loops == {1: [(("a", 1),)]}


def test_parse_rejects_unknown_keys():
    data = polar_scenario_dict()
    data["surprise"] = 1
    with pytest.raises(ScenarioError, match="surprise"):
        sc.parse_scenario(data)
    data = polar_scenario_dict()
    data["factors"][0]["extra"] = True
    with pytest.raises(ScenarioError, match=r"factors\[0\]"):
        sc.parse_scenario(data)


def test_parse_rejects_wrong_shapes():
    data = polar_scenario_dict()
    data["factors"][0]["coords"] = ["r", "s"]
    with pytest.raises(ScenarioError):
        sc.parse_scenario(data)
    data = polar_scenario_dict()
    data["warps"] = {"lam1": "1"}
    with pytest.raises(ScenarioError, match="lam2"):
        sc.parse_scenario(data)


def test_parse_formula_metric_and_curves():
    data = polar_scenario_dict()
    data["factors"][1]["metric"] = [["1 + 0 * th"]]
    data["factors"][1]["signature"] = [1]
    data["curves"] = {
        "arc": {"formula": ["1 + t", "0.5"]},
        "poly": {"polyline": [[1.0, 0.0], [1.5, 0.3], [2.0, 0.0]]},
    }
    ctx = sc.parse_scenario(data)
    assert np.allclose(ctx.curves["arc"].point(0.5), [1.5, 0.5])
    assert np.allclose(ctx.curves["poly"].point(1.0), [2.0, 0.0])


def test_load_scenario_file_and_syntax_errors(tmp_path):
    path = tmp_path / "polar.json"
    path.write_text(json.dumps(polar_scenario_dict()))
    ctx = sc.load_scenario_file(path)
    assert ctx.name == "file-polar"
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",')
    with pytest.raises(ScenarioError, match="line 1"):
        sc.load_scenario_file(bad)


def test_resolve_scenario_unknown():
    with pytest.raises(ScenarioError):
        sc.resolve_scenario("no-such-scenario")


def test_builtin_roster():
    names = sc.list_scenarios()
    assert "mobius" in names
    assert "example1-twisted" in names
    assert len(names) >= 8
    for required in ("flat-torus", "skewed-torus", "sphere-polar",
                     "hyperbolic-polar", "lorentz-direct", "random-dtp"):
        assert required in names


# ---------------------------------------------------------------------------
# CLI runs: verdicts, reports, exit codes

def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_cli_mobius_decompose(capsys):
    code, out = run_cli(capsys, "run", "mobius", "decompose")
    assert code == 0
    report = json.loads(out)
    assert report["results"]["tag"] == "obstructed"
    assert report["results"]["reason"]["kind"] == "nontrivial-holonomy"


def test_cli_flat_torus_decompose(capsys):
    code, out = run_cli(capsys, "run", "flat-torus", "decompose")
    assert code == 0
    assert json.loads(out)["results"]["tag"] == "global-doubly-warped-product"


def test_cli_skewed_torus_intersections(capsys):
    code, out = run_cli(capsys, "run", "skewed-torus", "intersections", "--word-bound", "4")
    assert code == 0
    results = json.loads(out)["results"]
    assert results["count"] == 2
    assert len(results["witnesses"]) == 2


def test_cli_sphere_curvature(capsys):
    code, out = run_cli(capsys, "run", "sphere-polar", "curvature")
    assert code == 0
    results = json.loads(out)["results"]
    assert results["mixed_K_error"] <= 1e-6
    for k in results["mixed_K_samples"]:
        assert k == pytest.approx(1.0, abs=1e-6)


def test_cli_holonomy_matrix(capsys):
    code, out = run_cli(capsys, "run", "mobius", "holonomy")
    assert code == 0
    loops = json.loads(out)["results"]["loops"]
    assert np.allclose(loops[0]["matrix"], [[-1.0]], atol=1e-9)


def test_cli_classify_expected_mismatch_exits_1(capsys, tmp_path):
    data = polar_scenario_dict()
    data["expect"]["classification"] = "twisted"  # wrong on purpose
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(data))
    code, out = run_cli(capsys, "run", str(path), "classify")
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_cli_input_error_exits_2(capsys):
    code = cli.main(["run", "definitely-not-a-scenario", "classify"])
    assert code == 2


def test_cli_numeric_error_exits_3(capsys, tmp_path):
    data = polar_scenario_dict()
    data["warps"]["lam2"] = "r - 1.0"  # non-positive on part of the box
    data["factors"][0]["box"] = [[0.5, 3.0]]
    path = tmp_path / "degenerate.json"
    path.write_text(json.dumps(data))
    code = cli.main(["run", str(path), "classify"])
    assert code in (2, 3)


def test_cli_reports_are_deterministic(capsys):
    _, out1 = run_cli(capsys, "run", "random-dtp", "verify-all", "--seed", "3")
    _, out2 = run_cli(capsys, "run", "random-dtp", "verify-all", "--seed", "3")
    assert out1 == out2
    _, out3 = run_cli(capsys, "run", "random-dtp", "classify", "--seed", "4")
    _, out4 = run_cli(capsys, "run", "random-dtp", "classify", "--seed", "4")
    assert out3 == out4


def test_cli_float_serialization_17_digits():
    text = cli.dumps_report({"x": 1.0 / 3.0, "y": [2.0 ** 0.5]})
    assert "0.33333333333333331" in text
    assert "1.4142135623730951" in text
    parsed = json.loads(text)
    assert parsed["x"] == 1.0 / 3.0


def test_cli_csv_output(capsys):
    code, out = run_cli(capsys, "run", "mobius", "intersections", "--csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("results.count,1") for line in lines)


def test_cli_out_file(tmp_path, capsys):
    target = tmp_path / "report.json"
    code = cli.main(["run", "flat-torus", "classify", "--out", str(target)])
    assert code == 0
    assert json.loads(target.read_text())["scenario"] == "flat-torus"


def test_cli_file_scenario_holonomy(capsys, tmp_path):
    path = tmp_path / "mobius.json"
    path.write_text(json.dumps(mobius_scenario_dict()))
    code, out = run_cli(capsys, "run", str(path), "holonomy")
    assert code == 0
    report = json.loads(out)
    assert report["pass"] is True
    assert np.allclose(report["results"]["loops"][0]["matrix"], [[-1.0]], atol=1e-8)


def test_cli_transport_command(capsys):
    code, out = run_cli(capsys, "run", "polar-plane", "transport")
    assert code == 0
    curves = json.loads(out)["results"]["curves"]
    for payload in curves.values():
        for check in payload["checks"]:
            assert check["pass"]


def test_cli_teodg_command(capsys):
    code, out = run_cli(capsys, "run", "sphere-polar", "teodg")
    assert code == 0
    results = json.loads(out)["results"]
    assert results["hypotheses_hold"] is False
    assert results["histogram"]["positive"] > 0


def test_report_matches_versioned_schema(capsys):
    jsonschema = pytest.importorskip("jsonschema")
    from pathlib import Path
    schema = json.loads((Path(__file__).resolve().parents[1]
                         / "schemas" / "report-v1.schema.json").read_text())
    for scenario_name, command in (("mobius", "decompose"), ("sphere-polar", "verify-all")):
        code, out = run_cli(capsys, "run", scenario_name, command)
        jsonschema.validate(json.loads(out), schema)
