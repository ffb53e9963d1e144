import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tenkit.cli import EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, strip_timing
from tenkit.core import outer
from tenkit.io import write_ten
from tenkit.mor import PolynomialSystem, save_system


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_decompose_tt_rank_one(tmp_path):
    write_ten(tmp_path / "r1.ten", outer([1.0, 2.0], [3.0, -1.0, 0.5], [1.0, 1.0, 2.0, -2.0]).densify())
    out = tmp_path / "o"
    assert main(["decompose", "--input", str(tmp_path / "r1.ten"), "--method", "tt", "--out", str(out)]) == EXIT_OK
    m = _manifest(out)
    assert m["diagnostics"]["ranks"] == [1, 1, 1, 1]
    assert m["diagnostics"]["residual"] < 1e-14
    assert (out / "model" / "model.json").exists()
    assert set(m) >= {"command", "config", "seed", "versions", "diagnostics", "outputs", "warnings", "timing"}


def test_uq_collocate_is_byte_reproducible(tmp_path):
    args = ["uq", "collocate", "--oracle", "builtin:poly6", "--budget", "300", "--seed", "5"]
    for name in ("a", "b"):
        assert main(args + ["--out", str(tmp_path / name)]) == EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "coefficients.csv").read_bytes() == (b / "coefficients.csv").read_bytes()
    m = _manifest(a)
    assert m["seed"] == 5
    assert len(m["diagnostics"]["sample_indices"]) == 300
    assert m["diagnostics"]["oracle_calls"] == 300
    ma, mb = json.loads(strip_timing(a / "manifest.json")), json.loads(strip_timing(b / "manifest.json"))
    # the output directory is the only intended difference
    assert ma["config"].pop("out") != mb["config"].pop("out")
    assert ma == mb
    # the recovered expansion matches the oracle's known coefficients
    with open(a / "coefficients.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    const = [float(r["coefficient"]) for r in rows if all(r[f"a{k}"] == "0" for k in range(1, 7))]
    assert abs(const[0] - 1.0) < 1e-6


def test_uq_full_over_budget_is_usage_error(tmp_path, capsys):
    code = main(["uq", "collocate", "--oracle", "builtin:linear", "--d", "40", "--nodes", "5",
                 "--method", "full", "--out", str(tmp_path / "o")])
    assert code == EXIT_USAGE
    assert "9.1e27" in capsys.readouterr().err


def test_uq_hier_from_collocation(tmp_path):
    assert main(["uq", "collocate", "--oracle", "builtin:linear", "--d", "2", "--nodes", "3", "--order", "1",
                 "--method", "full", "--out", str(tmp_path / "c")]) == EXIT_OK
    assert main(["uq", "hier", "--surrogate", str(tmp_path / "c" / "expansion.json"), "--nodes", "4",
                 "--n-new", "3", "--out", str(tmp_path / "h")]) == EXIT_OK
    rule = json.loads((tmp_path / "h" / "rule.json").read_text())
    # xi1 + xi2 is N(0, 2): Gauss-Hermite nodes scaled by sqrt(2)
    np.testing.assert_allclose(rule["nodes"], np.sqrt(2) * np.array([-np.sqrt(3), 0, np.sqrt(3)]), atol=1e-10)


def test_selftest_subset_passes(tmp_path, capsys):
    assert main(["selftest", "--only", "1,3", "--out", str(tmp_path / "s")]) == EXIT_OK
    crit = _manifest(tmp_path / "s")["diagnostics"]["criteria"]
    assert [c["number"] for c in crit] == [1, 3] and all(c["passed"] for c in crit)


def test_usage_errors_exit_one(tmp_path):
    assert main(["decompose", "--method", "tt", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["frobnicate", "--out", str(tmp_path)]) == EXIT_USAGE
    write_ten(tmp_path / "t.ten", outer([1.0], [2.0]).densify())
    assert main(["complete", "--samples", str(tmp_path / "none.csv"), "--shape", "2,2",
                 "--out", str(tmp_path / "c")]) in (EXIT_USAGE, EXIT_IO)
    assert main(["decompose", "--input", str(tmp_path / "t.ten"), "--method", "cp", "--seed", "-1",
                 "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_missing_input_exits_two(tmp_path):
    code = main(["decompose", "--input", str(tmp_path / "missing.ten"), "--method", "tt", "--out", str(tmp_path / "o")])
    assert code == EXIT_IO


def test_corrupt_input_exits_two(tmp_path):
    (tmp_path / "bad.ten").write_bytes(b"not a tensor")
    code = main(["decompose", "--input", str(tmp_path / "bad.ten"), "--method", "tt", "--out", str(tmp_path / "o")])
    assert code == EXIT_IO


def test_numerical_failure_exits_three_with_diagnostic(tmp_path):
    # x' = x^3 from a large initial state blows up before t = 1
    save_system(PolynomialSystem([[0.0]], C=[[1.0]]), tmp_path / "sys")
    out = tmp_path / "o"
    with np.errstate(all="ignore"):
        code = main(["mor", "simulate", "--system", str(tmp_path / "sys" / "system.json"), "--x0-scale", "10",
                     "--input-amplitude", "0", "--out", str(out)])
    assert code == EXIT_NUMERIC
    diag = json.loads((out / "diagnostic.json").read_text())
    assert diag["error"] == "DivergenceError"
    assert not (out / "manifest.json").exists()


def test_seed_from_environment(tmp_path, monkeypatch):
    write_ten(tmp_path / "t.ten", outer([1.0, 2.0], [1.0, 3.0]).densify())
    monkeypatch.setenv("TENKIT_SEED", "42")
    assert main(["decompose", "--input", str(tmp_path / "t.ten"), "--method", "cp", "--rank", "1",
                 "--out", str(tmp_path / "o")]) == EXIT_OK
    assert _manifest(tmp_path / "o")["seed"] == 42
    monkeypatch.delenv("TENKIT_SEED")
    assert main(["decompose", "--input", str(tmp_path / "t.ten"), "--method", "cp", "--rank", "1",
                 "--out", str(tmp_path / "p")]) == EXIT_OK
    assert _manifest(tmp_path / "p")["seed"] == 0


def test_complete_round_trip_is_byte_stable(tmp_path):
    from tenkit.acceptance import planted_cp
    from tenkit.completion import SampleSet, project_omega, sample_uniform

    a = planted_cp((6, 6, 6), 2, 0)
    s = project_omega(a, sample_uniform(a.shape, 150, 0))
    s.write_csv(tmp_path / "s.csv")
    SampleSet.read_csv(tmp_path / "s.csv", a.shape).write_csv(tmp_path / "s2.csv")
    assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()
    assert main(["complete", "--samples", str(tmp_path / "s.csv"), "--shape", "6,6,6", "--rank", "2",
                 "--out", str(tmp_path / "o")]) == EXIT_OK
    m = _manifest(tmp_path / "o")
    assert m["diagnostics"]["observed_residual"] < 1e-6 and m["diagnostics"]["monotone"]


def test_mor_pipeline(tmp_path):
    from tenkit.acceptance import mor_test_system

    save_system(mor_test_system(n=5, m=1), tmp_path / "sys")
    r = tmp_path / "r"
    assert main(["mor", "tensorize", "--system", str(tmp_path / "sys" / "system.json"), "--eps", "1e-10",
                 "--out", str(r / "t")]) == EXIT_OK
    assert main(["mor", "reduce", "--tensorized", str(r / "t" / "tensorized"), "--q", "3",
                 "--out", str(r / "red")]) == EXIT_OK
    assert _manifest(r / "red")["diagnostics"]["galerkin_error"] <= 1e-10
    assert main(["mor", "simulate", "--tensorized", str(r / "t" / "tensorized"), "--basis", str(r / "red" / "V.ten"),
                 "--out", str(r / "sim")]) == EXIT_OK
    with open(r / "sim" / "trajectory.csv") as fh:
        assert next(csv.reader(fh)) == ["t", "x1", "x2", "x3"]
    assert main(["mor", "bench", "--q", "4,8", "--out", str(r / "b")]) == EXIT_OK
    d = _manifest(r / "b")["diagnostics"]
    assert d["slope_factored_rhs"] < d["slope_dense_rhs"]


def test_volterra_commands(tmp_path):
    assert main(["volterra", "simulate", "--memory", "6", "--samples", "30", "--out", str(tmp_path / "d")]) == EXIT_OK
    assert main(["volterra", "simulate", "--memory", "6", "--samples", "30", "--rank", "36",
                 "--out", str(tmp_path / "f")]) == EXIT_OK

    def col(p):
        with open(p / "response.csv") as fh:
            return np.array([float(r["y3"]) for r in csv.DictReader(fh)])

    np.testing.assert_allclose(col(tmp_path / "f"), col(tmp_path / "d"), atol=1e-10)
    assert main(["volterra", "tradeoff", "--memory", "8", "--samples", "40", "--ranks", "1,2",
                 "--out", str(tmp_path / "t")]) == EXIT_OK
    assert "machine" in _manifest(tmp_path / "t")["timing"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tenkit.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "decompose" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "tenkit.cli", "decompose"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE


def test_complete_lrsparse_soft_thresholds(tmp_path):
    # identity-like transforms on a full 2 x 2 observation: z = soft(a, lam)
    e = np.eye(2)
    transforms = [{"vectors": [e[i].tolist(), e[j].tolist()], "weight": 1.0} for j in range(2) for i in range(2)]
    (tmp_path / "w.json").write_text(json.dumps({"transforms": transforms}))
    with open(tmp_path / "s.csv", "w") as fh:
        fh.write("i1,i2,value\n1,1,3.0\n2,1,0.0\n1,2,0.0\n2,2,0.0\n")
    code = main(["complete", "--samples", str(tmp_path / "s.csv"), "--shape", "2,2", "--method", "lrsparse",
                 "--rank", "1", "--transforms", str(tmp_path / "w.json"), "--lam", "0.5",
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    with open(tmp_path / "o" / "coefficients.csv") as fh:
        z = [float(r["z"]) for r in csv.DictReader(fh)]
    np.testing.assert_allclose(z, [2.5, 0, 0, 0], atol=1e-6)
    assert _manifest(tmp_path / "o")["diagnostics"]["sparsity"] == 1
    assert main(["complete", "--samples", str(tmp_path / "s.csv"), "--shape", "2,2", "--method", "lrsparse",
                 "--rank", "1", "--out", str(tmp_path / "p")]) == EXIT_USAGE
