import json

import pytest

from polyharm.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_regimes_report(capsys):
    code, out, _ = run(["regimes", "--p", "1.5", "--q", "1.5", "--m", "1", "--n", "3"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["alpha"] == 4 and doc["beta"] == 4 and doc["regime"] == "bounded"


def test_bootstrap_command(capsys):
    code, out, err = run(["bootstrap", "--p", "1.2", "--q", "1.2", "--m", "1", "--n", "4"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["rounds"]) == 1
    assert doc["terminated"] is True and doc["violations"] == []
    assert "k_bar" in doc and "rho" in err  # human table on stderr


def test_solve_biharmonic_center(capsys):
    code, out, _ = run(["solve", "--n", "3", "--m", "2", "--rhs", "one", "--level", "3"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["levels"][0]["u_center"] == pytest.approx(1 / 120, rel=0.02)


def test_parameter_error_exit_code(capsys):
    code, _, err = run(["regimes", "--p", "0.5", "--q", "1.0", "--m", "1", "--n", "3"], capsys)
    assert code == 2
    assert "pq" in err


def test_usage_exit_code(capsys):
    assert run(["frobnicate"], capsys)[0] == 64
    assert run(["regimes", "--p", "1.5"], capsys)[0] == 64


def test_green_eval_and_csv(tmp_path, capsys):
    code, out, _ = run(["green", "--n", "2", "--m", "1", "--levels", "2",
                        "--base-pairs", "100", "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "level,pairs,min_ratio"
    assert len(lines) == 3


def test_green_matrix_dump(tmp_path, capsys):
    path = tmp_path / "mat.bin"
    code, out, _ = run(["green", "--n", "2", "--m", "1", "--dump-matrix", str(path),
                        "--level", "0"], capsys)
    assert code == 0
    assert path.read_bytes().startswith(b"polyharm-kernel v1")


def test_eigen_command(tmp_path, capsys):
    dump = tmp_path / "phi.bin"
    code, out, _ = run(["eigen", "--n", "2", "--m", "1", "--level", "1",
                        "--dump-field", str(dump)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["lambda"] == pytest.approx(5.7832, rel=0.01)
    assert doc["c1"] > 0 and doc["c2"] / doc["c1"] <= 10
    assert dump.read_bytes().startswith(b"polyharm-field v1")


def test_estimate_command_csv(capsys):
    code, out, _ = run(["estimate", "--case", "prop23", "--n", "3", "--m", "1",
                        "--k", "1.5", "--levels", "2", "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("level,ratio")
    assert len(lines) == 3  # header + one row per level


def test_estimate_regime_error(capsys):
    code, _, err = run(["estimate", "--case", "final_prop", "--n", "3", "--m", "1",
                        "--p", "1", "--q", "inf"], capsys)
    assert code == 2


def test_config_file_defaults(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("p = 1.5\nq = 1.5\n# a comment\nm = 1\nn = 3\n")
    code, out, _ = run(["regimes", "--config", str(cfg), "--p", "2.0", "--q", "2.0",
                        "--m", "1", "--n", "3"], capsys)
    assert code == 0
    assert json.loads(out)["regime"] == "border"  # flags beat the config
    code, out, _ = run(["regimes", "--config", str(cfg), "--p", "1.5", "--q", "1.5",
                        "--m", "1", "--n", "3"], capsys)
    assert json.loads(out)["regime"] == "bounded"


def test_singular_command(tmp_path, capsys):
    prof = tmp_path / "profile.csv"
    code, out, _ = run(["singular", "--p", "2", "--q", "3", "--m", "1", "--n", "3",
                        "--levels", "2", "--profile-csv", str(prof)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["regime"] == "singular"
    assert doc["sup_a"] > 0 and doc["residual_u"] <= 1e-2
    assert len(doc["near_vertex_growth"]) == 2
    assert prof.read_text().startswith("s,u,v")


def test_command_determinism(tmp_path, capsys):
    argv = ["solve", "--n", "2", "--m", "1", "--levels", "3", "--out", ""]
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv[:-1] + [str(f1)]) == 0
    assert main(argv[:-1] + [str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_suite_reports_skips_with_single_level_ladder(tmp_path, capsys):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text("estimate-levels = 1\nfalsify-levels = 1\nsingular-levels = 1\n")
    out_path = tmp_path / "suite.json"
    code = main(["suite", "--config", str(cfg), "--fast", "--out", str(out_path)])
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert "criterion-5" in doc["skipped"]
    assert "criterion-6" in doc["skipped"]
    assert "criterion-9" in doc["skipped"]
    assert doc["failed"] == []
    by_id = {c["id"]: c for c in doc["criteria"]}
    assert by_id["criterion-1"]["status"] == "pass"
    assert by_id["criterion-10"]["status"] == "pass"
