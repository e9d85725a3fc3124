import json

import numpy as np
import pytest

from rotafactor.cli import main
from rotafactor.formats import (
    MatrixFileError,
    OutputFormat,
    format_matrix_csv,
    format_solution,
    read_matrix,
    results_csv,
    results_json,
    results_markdown,
    write_matrix,
)
from rotafactor.model import TABLE1_LOADINGS, LoadingLevel
from rotafactor.rotation import build_icm_target, omt_rotate
from rotafactor.simulation import SimulationCondition, run_condition


@pytest.fixture
def table1_csv(tmp_path):
    path = tmp_path / "table1.csv"
    write_matrix(path, TABLE1_LOADINGS, "initial loadings")
    return path


class TestMatrixFiles:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        m = rng.standard_normal((7, 3)) / 3.0
        path = tmp_path / "m.csv"
        write_matrix(path, m, "random")
        np.testing.assert_array_equal(read_matrix(path), m)

    def test_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("# a,b\n0.1, 0.2\n\n0.3,0.4\n")
        np.testing.assert_array_equal(read_matrix(path), [[0.1, 0.2], [0.3, 0.4]])

    @pytest.mark.parametrize("text, line", [("1,2\n3\n", 2), ("# h\n1,2\n3,x\n", 3), ("1,2\n# late\n", 2),
                                            ("1,nan\n", 1)])
    def test_malformed(self, tmp_path, text, line):
        path = tmp_path / "bad.csv"
        path.write_text(text)
        with pytest.raises(MatrixFileError, match=f"line {line}"):
            read_matrix(path)

    def test_empty_and_missing(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# only a header\n")
        with pytest.raises(MatrixFileError):
            read_matrix(path)
        with pytest.raises(MatrixFileError):
            read_matrix(tmp_path / "missing.csv")

    def test_decimals(self):
        assert format_matrix_csv(np.array([[0.123456, -1.0]]), decimals=2) == "0.12,-1.00\n"


class TestRotate:
    def test_table1_both_markdown(self, table1_csv, capsys):
        assert main(["rotate", str(table1_csv), "--icm", "--q", "3", "--method", "both"]) == 0
        out = capsys.readouterr().out
        assert "## OT rotation" in out and "## OMT rotation" in out
        assert "| X1 | 0.52 | 0.25 | -0.11 |" in out
        assert "-0.22" in out

    def test_json_fields(self, table1_csv, capsys):
        assert main(["rotate", str(table1_csv), "--icm", "--q", "3", "--method", "omt", "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"pattern", "phi", "congruence", "per_factor_congruence", "kappa", "ridge_applied"}
        np.testing.assert_allclose(payload["pattern"], TABLE1_LOADINGS, atol=1e-12)
        np.testing.assert_allclose(payload["phi"], np.eye(3), atol=1e-12)

    def test_json_both(self, table1_csv, capsys):
        assert main(["rotate", str(table1_csv), "--icm", "--q", "3", "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"ot", "omt"}
        assert payload["ot"]["phi"][0][1] == pytest.approx(-0.2212, abs=5e-4)

    def test_target_file_and_save(self, table1_csv, tmp_path, capsys):
        target = tmp_path / "target.csv"
        write_matrix(target, build_icm_target(18, 3).matrix)
        out_dir = tmp_path / "saved"
        assert main(["rotate", str(table1_csv), "--target", str(target), "--format", "csv",
                     "--save-pattern", str(out_dir)]) == 0
        assert "# OMT phi" in capsys.readouterr().out
        saved = read_matrix(out_dir / "omt_pattern.csv")
        expected = omt_rotate(TABLE1_LOADINGS, build_icm_target(18, 3)).pattern
        np.testing.assert_array_equal(saved, expected)
        assert (out_dir / "ot_phi.csv").exists()

    def test_ragged_input_exit_1(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("0.5,0.1\n0.4\n")
        assert main(["rotate", str(path), "--icm", "--q", "2"]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_numerical_failure_exit_2(self, tmp_path, capsys):
        # two identical columns make the Procrustes cross-product rank deficient
        path = tmp_path / "rankdef.csv"
        write_matrix(path, np.tile([[0.5], [0.6], [0.4], [0.7]], (1, 2)))
        assert main(["rotate", str(path), "--icm", "--q", "2"]) == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_shape_mismatch_exit_1(self, table1_csv, tmp_path):
        target = tmp_path / "target.csv"
        write_matrix(target, build_icm_target(18, 2).matrix)
        assert main(["rotate", str(table1_csv), "--target", str(target)]) == 1
        assert main(["rotate", str(table1_csv), "--icm", "--q", "2"]) == 1
        assert main(["rotate", str(table1_csv), "--icm"]) == 1

    def test_bad_target_values_exit_1(self, table1_csv, tmp_path):
        target = tmp_path / "target.csv"
        write_matrix(target, np.full((18, 3), 0.5))
        assert main(["rotate", str(table1_csv), "--target", str(target)]) == 1

    def test_bad_arguments_exit_1(self, table1_csv):
        with pytest.raises(SystemExit) as exc:
            main(["rotate", str(table1_csv), "--method", "varimax", "--icm", "--q", "3"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1
        assert main(["rotate", str(table1_csv), "--icm", "--q", "3", "--kappa-max", "0"]) == 1


def test_example(capsys):
    assert main(["example"]) == 0
    out = capsys.readouterr().out
    assert "-0.22" in out and "0.52" in out
    assert "-0.00" not in out


class TestSimulate:
    def _conditions(self, tmp_path):
        path = tmp_path / "conds.csv"
        path.write_text("n,q,per_factor,level,rho\n300,3,5,low,0.5\n300,3,5,high,0\n")
        return path

    def test_writes_files_deterministically(self, tmp_path, capsys):
        conds = self._conditions(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--conditions", str(conds), "--reps", "6", "--seed", "3", "--out", str(a),
                     "--format", "json"]) == 0
        assert capsys.readouterr().out.strip() == str(a / "summary.md")
        assert main(["simulate", "--conditions", str(conds), "--reps", "6", "--seed", "3", "--out", str(b),
                     "--format", "json", "--parallelism", "3"]) == 0
        for name in ("results.csv", "summary.md", "results.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        rows = json.loads((a / "results.json").read_text())
        assert len(rows) == 2 and rows[0]["reps_requested"] == 6

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        conds = self._conditions(tmp_path)
        monkeypatch.setenv("ROTAFACTOR_SEED", "3")
        assert main(["simulate", "--conditions", str(conds), "--reps", "3", "--out", str(tmp_path / "env")]) == 0
        monkeypatch.delenv("ROTAFACTOR_SEED")
        assert main(["simulate", "--conditions", str(conds), "--reps", "3", "--seed", "3",
                     "--out", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "env" / "results.csv").read_bytes() == (tmp_path / "flag" / "results.csv").read_bytes()
        monkeypatch.setenv("ROTAFACTOR_SEED", "abc")
        assert main(["simulate", "--conditions", str(conds), "--reps", "3", "--out", str(tmp_path / "x")]) == 1

    def test_bad_inputs(self, tmp_path):
        conds = self._conditions(tmp_path)
        assert main(["simulate", "--conditions", str(conds), "--reps", "0", "--out", str(tmp_path / "o")]) == 1
        assert main(["simulate", "--conditions", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o")]) == 1
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--preset", "paper-nothing"])
        assert exc.value.code == 1


class TestResultFormats:
    def test_tables(self):
        cond = SimulationCondition(q=3, per_factor=5, level=LoadingLevel.LOW, rho=0.5, n=300)
        res = [run_condition(cond, reps=3, seed=1)]
        csv_text = results_csv(res)
        header, row = csv_text.strip().split("\n")
        assert header.startswith("n,p,q,per_factor,level,rho")
        assert row.startswith("300,15,3,5,low,0.5,3,")
        assert json.loads(results_json(res))[0]["level"] == "low"
        md = results_markdown(res, 3, 1)
        assert "λ.50" in md and "φ = .50" in md

    def test_solution_formats(self):
        sol = omt_rotate(TABLE1_LOADINGS, build_icm_target(18, 3))
        for fmt in OutputFormat:
            assert format_solution(sol, fmt)
