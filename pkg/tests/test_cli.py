import csv
import io
import json
import subprocess
import sys

import pytest

from shatter.bounds import c_infinity
from shatter.cli import run
from shatter.matrix import AlphabetMatrix


def ok(*argv):
    code, out, err = run(list(argv))
    assert code == 0, err
    return out


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_construct_then_count(tmp_path):
    path = tmp_path / "m.txt"
    doc = json.loads(ok("construct", "full-space", "--d", "3", "-o", str(path)))
    assert (doc["k"], doc["n"]) == (8, 7)
    got = json.loads(ok("count", str(path), "--d", "3"))
    assert (got["shattered"], got["total"]) == (28, 35)


def test_construct_to_stdout_is_matrix_text():
    m = AlphabetMatrix.from_text(ok("construct", "turan", "--n", "6", "--k", "4"))
    assert (m.k, m.n) == (4, 6)


def test_recipe_file(tmp_path):
    ok("construct", "codim", "--d", "2", "--r", "1", "-o", str(tmp_path / "m"), "--recipe-out", str(tmp_path / "r"))
    text = (tmp_path / "r").read_text()
    assert text.startswith("name=codim\n") and "claimed_count=" in text


def test_product_from_files(tmp_path):
    ok("construct", "full-space", "--d", "2", "-o", str(tmp_path / "a"))
    m = AlphabetMatrix.from_text(ok("construct", "product", "--inputs", str(tmp_path / "a"), str(tmp_path / "a")))
    assert (m.k, m.n, m.v) == (16, 9, 4)


@pytest.mark.parametrize(
    "argv,want",
    [
        (["bounds", "cd", "--d", "3"], "24/49"),
        (["bounds", "d2", "--k", "4"], "2/3"),
        (["bounds", "d2", "--n", "9", "--k", "8"], "36"),
        (["bounds", "codim", "--d", "2", "--r", "1"], "36/49"),
        (["oracle", "f", "--n", "3", "--k", "4", "--d", "2", "--v", "2"], "3"),
        (["oracle", "g", "--n", "3", "--k", "6", "--d", "2"], "2"),
    ],
)
def test_scalar_outputs(argv, want):
    assert ok(*argv) == want + "\n"


def test_cinf():
    assert abs(float(ok("bounds", "cinf", "--precision", "1e-9")) - 0.288788095) < 1e-9


def test_gmin_json():
    doc = json.loads(ok("gmin", "--n", "3", "--k", "6", "--d", "2"))
    assert doc["construction_count"] == 2 and doc["formula"] is None
    assert len(doc["family"]) == 6


def test_lagrangian_json():
    doc = json.loads(ok("lagrangian", "--k", "4", "--d", "2", "--seed", "0", "--round-denominator", "3", "--restarts", "4"))
    assert doc["certificate"] == "1/3"


def test_ca_commands(tmp_path):
    ok("construct", "full-space", "--d", "3", "-o", str(tmp_path / "m"))
    doc = json.loads(ok("ca", "verify", str(tmp_path / "m"), "--d", "3"))
    assert doc["verified"] is False and len(doc["witness"]) == 3
    doc = json.loads(ok("ca", "build", str(tmp_path / "m"), "--d", "3", "-o", str(tmp_path / "ca")))
    assert doc["n_final"] == 4 and doc["verified"]
    assert (tmp_path / "ca").read_text().endswith("# strength 3 verified\n")
    doc = json.loads(ok("ca", "pipeline", "--d", "2", "--strategy", "full-space"))
    assert doc["n_final"] == 3


class TestCurves:
    def test_conjecture_curve(self):
        pts = {r["b"]: r for r in rows(ok("bounds", "conjecture-curve", "--start", "1", "--stop", "2", "--step", "1/4"))}
        c = c_infinity(1e-15)
        assert float(pts["1"]["value"]) == pytest.approx(c)
        assert float(pts["1.75"]["value"]) == pytest.approx(1.75 * c)
        assert {r["kind"] for r in pts.values()} == {"conjectured+lower"}

    def test_conjecture_outside_domain(self):
        code, _, err = run(["bounds", "conjecture-curve", "--start", "1", "--stop", "3"])
        assert code == 2 and err

    def test_gamma_staircase_d1(self):
        pts = rows(ok("bounds", "gamma-staircase", "--d", "1", "--start", "1", "--stop", "2", "--step", "1/8"))
        assert len(pts) == 8
        assert {float(r["value"]) for r in pts} == {1.0}

    def test_gamma_table_has_best_rows(self):
        table = rows(ok("bounds", "gamma-table", "--d", "2", "--k", "8"))
        best = [r for r in table if r["source"].startswith("best:")]
        assert [r["value_rational"] for r in best if r["k"] == "4"] == ["2/3"]


class TestErrors:
    def test_missing_seed_is_input_error(self):
        for argv in (
            ["construct", "iid", "--k", "4", "--n", "4", "--v", "2"],
            ["lagrangian", "--k", "4", "--d", "2"],
            ["ca", "pipeline", "--d", "2", "--strategy", "iid", "--target-n", "5"],
        ):
            code, out, err = run(argv)
            assert code == 2 and out == "" and "seed" in err

    def test_unknown_subcommand_prints_usage(self):
        code, out, err = run(["frobnicate"])
        assert code == 2 and out == "" and "usage:" in err

    def test_unknown_flag(self):
        code, _, err = run(["bounds", "cd", "--d", "3", "--colour", "red"])
        assert code == 2 and "usage:" in err

    def test_budget_is_resource_error(self):
        code, out, err = run(["oracle", "f", "--n", "6", "--k", "8", "--d", "2", "--budget", "10"])
        assert code == 3 and out == ""

    def test_missing_file(self, tmp_path):
        code, _, err = run(["count", str(tmp_path / "nope"), "--d", "2"])
        assert code == 2 and "cannot read" in err

    def test_process_exit_codes(self):
        proc = subprocess.run([sys.executable, "-m", "shatter", "bounds", "cd", "--d", "2"], capture_output=True, text=True)
        assert (proc.returncode, proc.stdout, proc.stderr) == (0, "2/3\n", "")
        proc = subprocess.run([sys.executable, "-m", "shatter", "bounds"], capture_output=True, text=True)
        assert proc.returncode == 2 and proc.stdout == ""


@pytest.mark.parametrize(
    "argv",
    [
        ["construct", "iid", "--k", "9", "--n", "12", "--v", "3", "--seed", "5"],
        ["construct", "balanced", "--k", "8", "--n", "12", "--v", "2", "--seed", "5"],
        ["lagrangian", "--k", "6", "--d", "2", "--seed", "2", "--restarts", "6", "--round-denominator", "10"],
        ["ca", "pipeline", "--d", "2", "--strategy", "iid", "--target-n", "10", "--seed", "3"],
    ],
)
def test_same_payload_at_any_worker_count(argv):
    outs = {ok(*argv, "--workers", str(w)) for w in (1, 4)}
    assert len(outs) == 1


def test_simplex_max_names_agree():
    a = ok("bounds", "simplex-max", "--d", "3", "--seed", "1")
    assert a == ok("bounds", "lemma25", "--d", "3", "--seed", "1")
    assert json.loads(a)["closed_form"] == "36/49"
