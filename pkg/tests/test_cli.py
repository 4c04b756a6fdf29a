import json
from pathlib import Path

import pytest

from caristi.cli import run

DATA = Path(__file__).resolve().parent.parent / "data"


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = call(capsys, *argv)
    return code, json.loads(out)


def test_solve_shift0(capsys):
    code, rep = report(capsys, "solve-ultrametric", "--map", "shift0", "--precision", "20")
    assert code == 0
    assert rep["fixed_point_stem"] == "0^20"
    assert rep["residual"] == "≤ 1/1048576"


def test_solve_finite_space(capsys):
    code, rep = report(capsys, "solve-ultrametric", "--space", str(DATA / "three_points.json"), "--map", str(DATA / "three_points_map.json"))
    assert code == 0 and rep["fixed_point"] == "a"


def test_iterate(capsys):
    code, rep = report(capsys, "iterate", "--map", "halve-to-one", "--precision", "10")
    assert code == 0 and rep["summary"]["fail"] == 0
    assert rep["iterations"] <= 12


def test_kb_small(capsys):
    code, rep = report(capsys, "kb", "--tree", str(DATA / "small.json"))
    assert code == 0
    assert rep["linearization"] == [[0], [1, 0], [1, 1], [1], []]


@pytest.mark.parametrize(
    "argv",
    [
        ("gadget", "cantor", "--tree", str(DATA / "cantor_tree.json"), "--samples", "40", "--seed", "7", "--verify"),
        ("gadget", "baire", "--injection", str(DATA / "injection.json"), "--samples", "40", "--verify"),
        ("gadget", "interval", "--c", str(DATA / "c.json"), "--stage", "3", "--samples", "20", "--verify"),
    ],
)
def test_gadget_verify(capsys, argv):
    code, rep = report(capsys, *argv)
    assert code == 0
    assert rep["summary"]["fail"] == 0 and rep["fixed_points"] == 0


def test_descent_and_envelope(capsys):
    code, rep = report(capsys, "descent", "--potential", "step", "--samples", "50")
    assert code == 0 and rep["summary"]["fail"] == 0
    assert set(rep["trace"][0]) == {"x", "V_lower", "step"}
    code, rep = report(capsys, "envelope", "--potential", "vee", "--grid", "6")
    assert code == 0 and rep["summary"]["fail"] == 0


def test_convert_potential(capsys):
    code, rep = report(capsys, "convert", "--potential", "step", "--samples", "5")
    assert code == 0 and rep["summary"]["fail"] == 0


def test_malformed_json_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"tree": [[], [0]\n')
    code, out, err = call(capsys, "kb", "--tree", str(bad))
    assert code == 2
    assert f"{bad}:" in err and out == ""


def test_missing_field(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": []}')
    code, _, err = call(capsys, "kb", "--tree", str(bad))
    assert code == 2 and "tree" in err


def test_unknown_subcommand(capsys):
    assert run(["frobnicate"]) == 2
    assert run(["iterate", "--precision", "0"]) == 2


def test_out_file(capsys, tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = call(capsys, "iterate", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["summary"]["fail"] == 0


def test_same_seed_same_bytes(capsys):
    argv = ("gadget", "baire", "--injection", str(DATA / "injection.json"), "--samples", "30", "--seed", "3", "--verify")
    _, a, _ = call(capsys, *argv)
    _, b, _ = call(capsys, *argv)
    assert a == b
