import json
import subprocess
import sys
from fractions import Fraction as F
from pathlib import Path

import pytest

from coherent.cli import main
from coherent.distribution import loads, validate_coherence

GOLDEN = Path(__file__).parent / "golden"

CASES = {
    "bound_quad": ["bound", "quad", "--p", "2/3", "--alpha", "1", "--beta", "-4"],
    "bound_cov": ["bound", "cov", "--p", "1/4"],
    "ladder_two": ["ladder", "--p", "1/2", "--a", "1/3"],
    "lp_two_atom": ["lp", "--p", "1/4", "--f", "cov", "--grid", "0,2/5"],
    "certify_cov": ["certify", "cov", "--p", "1/4", "--grid", "401"],
}


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def same(got, want):
    if isinstance(want, dict):
        return set(got) == set(want) and all(same(got[k], want[k]) for k in want)
    if isinstance(want, list):
        return len(got) == len(want) and all(same(a, b) for a, b in zip(got, want))
    if isinstance(want, float) and not isinstance(want, bool):
        return got == pytest.approx(want, rel=1e-9, abs=1e-12)
    return got == want


class TestGolden:
    @pytest.mark.parametrize("name", sorted(CASES))
    def test_matches(self, name, capsys):
        code, out, _ = run(CASES[name] + ["--format", "json"], capsys)
        assert code == 0
        want = json.loads((GOLDEN / f"{name}.json").read_text())
        assert same(json.loads(out), want)

    @pytest.mark.parametrize("name", ["bound_quad", "ladder_two", "lp_two_atom"])
    def test_deterministic(self, name, capsys):
        first = run(CASES[name] + ["--format", "json"], capsys)[1]
        second = run(CASES[name] + ["--format", "json"], capsys)[1]
        assert first == second


class TestBound:
    def test_human(self, capsys):
        code, out, _ = run(["bound", "quad", "--p", "2/3", "--alpha", "1", "--beta", "-4"], capsys)
        assert code == 0 and "value: 2/45" in out and "case: BothAbove" in out

    def test_not_tight_exit(self, capsys):
        code, out, _ = run(["bound", "quad", "--p", "1/4", "--alpha", "1", "--beta", "-1"], capsys)
        assert code == 2 and "value: 3/32" in out

    def test_float_mode(self, capsys):
        code, out, _ = run(["bound", "cov", "--p", "1/4", "--mode", "float", "--format", "json"], capsys)
        assert json.loads(out)["value"] == pytest.approx(-0.0225)

    def test_abspow(self, capsys):
        code, out, _ = run(["bound", "abspow", "--exponent", "4", "--format", "json"], capsys)
        data = json.loads(out)
        assert data["value"] == pytest.approx(0.13798987489692202) and data["branch"] == "six-point"


class TestLadder:
    def test_table_out(self, tmp_path, capsys):
        path = tmp_path / "w.txt"
        code, _, _ = run(["ladder", "--p", "2/3", "--a", "1/5", "--table-out", str(path)], capsys)
        assert code == 0
        table = loads(path.read_text())
        assert table.prior == F(2, 3) and validate_coherence(table, tol=0)

    def test_not_tight(self, capsys):
        code, _, _ = run(["ladder", "--p", "1/4", "--a", "1/2"], capsys)
        assert code == 2

    def test_csv(self, capsys):
        code, out, _ = run(["ladder", "--p", "1/2", "--a", "1/3", "--format", "csv"], capsys)
        lines = out.strip().splitlines()
        assert code == 0 and lines[0].startswith("ladder,x1,x2")
        assert len(lines) == 13


class TestLp:
    def test_dual_and_dump(self, tmp_path, capsys):
        dump = tmp_path / "lp.txt"
        code, out, _ = run(["lp", "--p", "1/2", "--f", "abspow:4", "--n", "10", "--dual",
                            "--dump-lp", str(dump), "--format", "json"], capsys)
        data = json.loads(out)
        assert code == 0 and data["duality_gap"] < 1e-9
        assert dump.read_text().startswith("sense max")

    def test_auto_atoms(self, capsys):
        code, out, _ = run(["lp", "--p", "1/2", "--f", "abspow:4", "--n", "20", "--extra-atoms", "auto",
                            "--format", "json"], capsys)
        assert json.loads(out)["value"] == pytest.approx(0.13798987489692202, abs=1e-12)

    def test_bad_objective(self, capsys):
        code, _, err = run(["lp", "--p", "1/2", "--f", "sin"], capsys)
        assert code == 1 and err


class TestCertify:
    def test_perturbed_fails(self, capsys):
        code, out, _ = run(["certify", "abspow", "--exponent", "4", "--perturb", "1.01", "--grid", "601",
                            "--format", "json"], capsys)
        assert code == 2 and json.loads(out)["pass"] is False


class TestPlumbing:
    def test_usage_error(self, capsys):
        assert run(["bogus"], capsys)[0] == 1
        assert run(["bound", "cov", "--p", "abc"], capsys)[0] == 1

    def test_env_format(self, capsys, monkeypatch):
        monkeypatch.setenv("COHERENT_FORMAT", "json")
        code, out, _ = run(["bound", "cov", "--p", "1/4"], capsys)
        assert json.loads(out)["value"] == "-9/400"

    def test_output_file(self, tmp_path, capsys):
        path = tmp_path / "r.json"
        code, out, _ = run(["bound", "cov", "--p", "1/4", "--format", "json", "--output", str(path)], capsys)
        assert code == 0 and out == ""
        assert json.loads(path.read_text())["value"] == "-9/400"

    def test_asymp(self, capsys):
        code, out, _ = run(["asymp", "--min", "1e4", "--max", "1e6", "--points", "3", "--format", "json"], capsys)
        rows = json.loads(out)["rows"]
        assert rows[0]["branch"] == "crossover"
        assert abs(rows[-1]["deviation"]) < 1e-5

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "coherent", "bound", "cov", "--p", "1/3"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and "value: -1/36" in res.stdout
