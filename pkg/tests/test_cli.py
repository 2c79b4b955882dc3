import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from dirichlet_lab.cli import main


def run(*args, env=None):
    return subprocess.run([sys.executable, "-m", "dirichlet_lab", *map(str, args)],
                          capture_output=True, text=True, env=env, check=False)


@pytest.fixture
def matrix(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"rows": [["1/3", "2/7"]]}))
    return p


def test_constants_csv():
    res = run("constants", "--cn", "4..6", "--format", "csv")
    assert res.returncode == 0
    rows = list(csv.DictReader(io.StringIO(res.stdout)))
    assert [r["n"] for r in rows] == ["4", "5", "6"]
    assert abs(float(rows[0]["gamma_lo"]) - 0.043392) < 1e-5


def test_construct_then_spectrum(tmp_path):
    state = tmp_path / "s.json"
    assert run("construct", "--kind", "two-scale", "--n", 2, "--c", "1/2", "--levels", 4,
               "--out", state).returncode == 0
    res = run("spectrum", "--state", state)
    assert res.returncode == 0, res.stderr
    doc = json.loads(res.stdout)
    assert doc["schema"] == 1 and doc["command"] == "spectrum"
    assert abs(float(Fraction(doc["result"]["estimate"]["theta_sup"]["lo"])) - 0.5) < 0.025


def test_psi_rerun_byte_identical(tmp_path, matrix):
    out = tmp_path / "psi.json"
    assert run("psi", "--matrix", matrix, "--t", 200, "--out", out).returncode == 0
    first = out.read_bytes()
    assert run("psi", "--matrix", matrix, "--t", 200, "--out", out).returncode == 0
    assert out.read_bytes() == first


def test_seq_csv_with_sidecar(tmp_path, matrix):
    out = tmp_path / "seq.csv"
    assert run("seq", "--matrix", matrix, "--cap", 50, "--out", out).returncode == 0
    rows = list(csv.reader(out.open(newline="")))
    assert rows[0][0] == "v" and len(rows) == 3
    meta = json.loads((tmp_path / "seq.csv.meta.json").read_text())
    assert meta["command"] == "seq"


def test_seq_budget_exit_code(matrix):
    assert run("seq", "--matrix", matrix, "--cap", 10 ** 6, "--budget", 100).returncode == 3


def test_usage_errors(tmp_path):
    assert run("construct", "--kind", "two-scale", "--c", "3/2").returncode == 2
    assert run("psi", "--t", 3).returncode == 2
    assert run("nonsense").returncode == 2
    state = tmp_path / "s.json"
    run("construct", "--kind", "two-scale", "--levels", 2, "--out", state)
    assert run("classify", "--state", state).returncode == 2


def test_classify_prime_power(tmp_path):
    state = tmp_path / "p.json"
    assert run("construct", "--kind", "prime-power", "--n", 4, "--c", "1/25", "--levels", 3,
               "--out", state).returncode == 0
    res = run("classify", "--state", state, "--cap", 60)
    assert res.returncode == 0
    assert "verdicts" in json.loads(res.stdout)["result"]


def test_transfer(matrix):
    res = run("transfer", "--matrix", matrix, "--A", "1/4", "--B", 8)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["result"]["status"] in ("ImplicationHolds", "PrimalEmpty")


def test_probe_independence_precision_exhausted(tmp_path):
    sv = tmp_path / "sv.json"
    assert run("construct", "--kind", "sign-varied", "--n", 4, "--c", "1/25", "--levels", 3,
               "--m", 2, "--sign-seed", 0, "--out", sv).returncode == 0
    res = run("probe-independence", "--state", sv)
    assert res.returncode == 1


def test_main_in_process(capsys):
    assert main(["constants", "--cn", "4", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["command"] == "constants"
