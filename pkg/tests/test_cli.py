import json
import subprocess
import sys

import jsonschema
import pytest

from conftest import FIXTURES
from mabuchi import cli

EXPECTED = {
    "a1_t6": ("exists", 0),
    "a1_t4": ("not_exists", 1),
    "a1_t5": ("not_exists", 1),
    "a1_t16_3": ("inconclusive", 2),
    "b2_box4": ("exists", 0),
    "b2_box3": ("not_exists", 1),
    "toric_square": ("exists", 0),
    "toric_interval": ("exists", 0),
    "toric_interval_skew": ("exists", 0),
}


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def fx(name):
    return FIXTURES / f"{name}.json"


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_check_fixtures(name, capsys):
    code, doc, _ = run(capsys, "check", fx(name), "--reproducible")
    verdict, exit_code = EXPECTED[name]
    assert code == exit_code and doc["verdict"] == verdict
    jsonschema.validate(doc, cli.schema("certificate"))
    assert "timestamp" not in doc


def test_check_values_and_reproducible(capsys, tmp_path):
    _, doc, _ = run(capsys, "check", fx("b2_box4"), "--reproducible")
    assert [x["rational"] for x in doc["b_X"]] == ["80/11", "175/44"]
    _, again, _ = run(capsys, "check", fx("b2_box4"), "--reproducible")
    assert doc == again
    _, b16, _ = run(capsys, "check", fx("a1_t16_3"))
    assert b16["annotation"] == "boundary" and "timestamp" in b16
    out = tmp_path / "c.json"
    assert cli.main(["check", str(fx("a1_t6")), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["verdict"] == "exists"


def test_input_errors(capsys, tmp_path):
    code, _, err = run(capsys, "check", fx("a1_not_invariant"))
    assert code == 65 and "error" in json.loads(err)
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1}')
    assert run(capsys, "check", bad)[0] == 65
    assert run(capsys, "check", tmp_path / "missing.json")[0] == 65
    code, _, err = run(capsys, "frobnicate")
    assert code == 64 and json.loads(err)["error"] == "usage"
    assert run(capsys, "check", fx("a1_t6"), "--tol", "-1")[0] == 64


def test_extremal_and_futaki(capsys):
    code, doc, _ = run(capsys, "extremal", fx("toric_interval_skew"))
    assert code == 0
    assert doc["X"][0]["rational"] == "12/25"
    assert (doc["c_X"]["rational"], doc["C_X"]["rational"]) == ("2/5", "8/5")
    code, doc, _ = run(capsys, "futaki", fx("toric_interval_skew"), "--y", "1")
    assert code == 0 and doc["futaki"]["rational"] == "-5/8"
    code, _, err = run(capsys, "futaki", fx("a1_t6"), "--y", "1")
    assert code == 65


def test_ding_eval(capsys, tmp_path):
    pot = tmp_path / "u.csv"
    pot.write_text("y1,value\n" + "".join(f"{y / 10},{(y / 10) ** 2 / 2}\n" for y in range(-20, 21)))
    code, doc, _ = run(capsys, "ding", "eval", fx("toric_interval"), "--potential", pot)
    assert code == 0
    assert doc["F"] == pytest.approx(-0.9274, abs=1e-3)
    far = tmp_path / "far.csv"
    far.write_text("y1,value\n9,1\n")
    assert run(capsys, "ding", "eval", fx("toric_interval"), "--potential", far)[0] == 65


def test_solve(capsys, tmp_path):
    hist = tmp_path / "h.csv"
    pot = tmp_path / "u.csv"
    code, doc, _ = run(capsys, "solve", fx("toric_interval"), "--history", hist, "--potential-out", pot, "--reproducible")
    assert code == 0 and doc["status"] == "Converged"
    assert hist.read_text().startswith("iter")
    code, doc, _ = run(capsys, "ding", "eval", fx("toric_interval"), "--potential", pot)
    assert code == 0
    code, doc, _ = run(capsys, "solve", fx("a1_t4"))
    assert code == 1 and doc["status"] == "Diverged"


def test_probe_and_mc(capsys):
    code, doc, _ = run(capsys, "probe", fx("b2_box4"), "--rays", 8)
    assert code == 0 and doc["consistent"]
    code, doc, _ = run(capsys, "oracle", "mc", fx("a1_t6"), "--samples", 200000, "--seed", 3)
    assert code == 0 and doc["agree_3sigma"]


def test_entry_point_subprocess():
    r = subprocess.run([sys.executable, "-m", "mabuchi.cli", "check", str(fx("a1_t4")), "--reproducible"],
                       capture_output=True, text=True)
    assert r.returncode == 1
    assert json.loads(r.stdout)["verdict"] == "not_exists"
