import json
import subprocess
import sys

import numpy as np
import pytest

from angletl.cli import main
from angletl.core import SourceEstimate, load_vector_csv, save_matrix_csv, save_vector_csv
from angletl.estimators import PenaltyConfig, fit_angle_tl, fit_target_only


@pytest.fixture
def files(tmp_path, problem):
    data, w, _ = problem
    save_matrix_csv(tmp_path / "X.csv", data.X)
    save_vector_csv(tmp_path / "Y.csv", data.Y)
    save_vector_csv(tmp_path / "w.csv", w)
    return tmp_path, data, w


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_payload(err):
    lines = err.strip().splitlines()
    assert len(lines) == 2 and lines[1].startswith("hint: ")
    return json.loads(lines[0])


class TestFit:
    def test_target_only_default(self, files, capsys):
        d, data, _ = files
        code, out, _ = run(["fit", "--x", d / "X.csv", "--y", d / "Y.csv", "--lambda", 0.5, "--out", d / "o"], capsys)
        assert code == 0
        summary = json.loads((d / "o" / "summary.json").read_text())
        assert summary["method"] == "target_only" and summary["eta"] == 0.0
        np.testing.assert_allclose(load_vector_csv(d / "o" / "beta.csv"), fit_target_only(data, 0.5).beta_hat,
                                   rtol=0, atol=0)

    def test_dist_label(self, files, capsys):
        d, _, _ = files
        code, out, _ = run(["fit", "--x", d / "X.csv", "--y", d / "Y.csv", "--w", d / "w.csv",
                            "--lambda", 0.3, "--eta", 0.3, "--out", d / "o"], capsys)
        assert code == 0 and json.loads(out)["method"] == "distTL"

    def test_angle_coefficients(self, files, capsys):
        d, data, w = files
        run(["fit", "--x", d / "X.csv", "--y", d / "Y.csv", "--w", d / "w.csv",
             "--lambda", 0.3, "--eta", 0.1, "--out", d / "o"], capsys)
        ref = fit_angle_tl(data, SourceEstimate(w), PenaltyConfig(0.3, 0.1)).beta_hat
        np.testing.assert_array_equal(load_vector_csv(d / "o" / "beta.csv"), ref)

    def test_malformed_csv(self, files, capsys):
        d, _, _ = files
        (d / "bad.csv").write_text("1,2\n3,oops\n")
        code, _, err = run(["fit", "--x", d / "bad.csv", "--y", d / "Y.csv", "--lambda", 1, "--out", d / "o"], capsys)
        assert code == 2
        e = error_payload(err)
        assert e["error"] == "ParseError" and "bad.csv" in e["message"] and "row 2, column 2" in e["message"]

    def test_shape_mismatch(self, files, capsys):
        d, _, _ = files
        save_vector_csv(d / "w3.csv", np.ones(3))
        code, _, err = run(["fit", "--x", d / "X.csv", "--y", d / "Y.csv", "--w", d / "w3.csv",
                            "--lambda", 1, "--out", d / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "ShapeError"

    def test_missing_lambda(self, files, capsys):
        d, _, _ = files
        code, _, err = run(["fit", "--x", d / "X.csv", "--y", d / "Y.csv", "--out", d / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "UsageError"

    def test_bad_lambda(self, files, capsys):
        d, _, _ = files
        code, _, err = run(["fit", "--x", d / "X.csv", "--y", d / "Y.csv", "--lambda", -1, "--out", d / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "ParameterError"

    def test_ill_conditioned_exit_3(self, tmp_path, capsys):
        X = np.zeros((10, 3))
        X[:, 0] = 1.0
        save_matrix_csv(tmp_path / "X.csv", X)
        save_vector_csv(tmp_path / "Y.csv", np.ones(10))
        code, _, err = run(["fit", "--x", tmp_path / "X.csv", "--y", tmp_path / "Y.csv", "--lambda", 1e-20,
                            "--out", tmp_path / "o"], capsys)
        assert code == 3 and error_payload(err)["error"] == "ConditioningError"

    def test_header_flag(self, tmp_path, capsys):
        (tmp_path / "X.csv").write_text("a,b\n1,0\n0,1\n1,1\n")
        (tmp_path / "Y.csv").write_text("y\n1\n2\n3\n")
        code, _, _ = run(["fit", "--x", tmp_path / "X.csv", "--y", tmp_path / "Y.csv", "--lambda", 1,
                          "--has-header", "--out", tmp_path / "o"], capsys)
        assert code == 0


def test_predict(files, capsys):
    d, data, _ = files
    run(["fit", "--x", d / "X.csv", "--y", d / "Y.csv", "--lambda", 0.5, "--out", d / "o"], capsys)
    code, _, _ = run(["predict", "--x", d / "X.csv", "--beta", d / "o" / "beta.csv", "--out", d / "pred.csv"], capsys)
    assert code == 0
    np.testing.assert_allclose(load_vector_csv(d / "pred.csv"), data.X @ fit_target_only(data, 0.5).beta_hat)


class TestTune:
    def test_outputs_and_determinism(self, files, capsys):
        d, _, _ = files
        args = ["tune", "--x", d / "X.csv", "--y", d / "Y.csv", "--w", d / "w.csv", "--folds", 3, "--seed", 7]
        assert run(args + ["--out", d / "a"], capsys)[0] == 0
        assert run(args + ["--out", d / "b"], capsys)[0] == 0
        for f in ("cv_surface.csv", "best.json", "beta.csv"):
            assert (d / "a" / f).read_bytes() == (d / "b" / f).read_bytes()
        assert (d / "a" / "cv_surface.csv").read_text().splitlines()[0] == "lambda,eta,cv_mse"
        assert "created_utc" in json.loads((d / "a" / "manifest.json").read_text())

    def test_singleton_grid(self, files, capsys):
        d, _, _ = files
        (d / "g.json").write_text(json.dumps({"lambdas": [1.0], "etas": [0.0]}))
        code, out, _ = run(["tune", "--x", d / "X.csv", "--y", d / "Y.csv", "--w", d / "w.csv",
                            "--grid", d / "g.json", "--out", d / "o"], capsys)
        assert code == 0
        assert len((d / "o" / "cv_surface.csv").read_text().splitlines()) == 2
        assert json.loads(out)["lambda"] == 1.0

    def test_folds_exceed_n(self, files, capsys):
        d, _, _ = files
        code, _, err = run(["tune", "--x", d / "X.csv", "--y", d / "Y.csv", "--folds", 1000, "--out", d / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "PlanError"

    def test_without_source_uses_target_only(self, files, capsys):
        d, _, _ = files
        code, out, _ = run(["tune", "--x", d / "X.csv", "--y", d / "Y.csv", "--out", d / "o"], capsys)
        assert code == 0 and json.loads(out)["method"] == "target_only"


class TestAggregate:
    def test_spectral_dir(self, tmp_path, rng, capsys):
        wd = tmp_path / "ws"
        wd.mkdir()
        W = rng.standard_normal((3, 6))
        for k, w in enumerate(W):
            save_vector_csv(wd / f"w_{k}.csv", w)
        (wd / "notes.csv").write_text("ignored\n")
        code, out, _ = run(["aggregate", "--w-dir", wd, "--out", tmp_path / "o"], capsys)
        assert code == 0
        info = json.loads(out)
        assert info["sources"] == ["w_0.csv", "w_1.csv", "w_2.csv"] and info["method"] == "spectral"
        assert load_vector_csv(tmp_path / "o" / "w_agg.csv").shape == (6,)

    def test_validation_method(self, tmp_path, rng, capsys):
        wd = tmp_path / "ws"
        wd.mkdir()
        W = rng.standard_normal((2, 4))
        for k, w in enumerate(W):
            save_vector_csv(wd / f"w_{k}.csv", w)
        X = rng.standard_normal((15, 4))
        save_matrix_csv(tmp_path / "X.csv", X)
        save_vector_csv(tmp_path / "Y.csv", X @ (W[0] + W[1]))
        code, out, _ = run(["aggregate", "--w-dir", wd, "--method", "validation", "--x", tmp_path / "X.csv",
                            "--y", tmp_path / "Y.csv", "--out", tmp_path / "o"], capsys)
        assert code == 0
        np.testing.assert_allclose(json.loads(out)["weights"], [1.0, 1.0], atol=1e-10)

    def test_empty_dir(self, tmp_path, capsys):
        code, _, err = run(["aggregate", "--w-dir", tmp_path, "--out", tmp_path / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "FormatError"


class TestRisk:
    def write(self, path, **kw):
        d = {"gamma": 2.0, "alpha_t_sq": 1.0, "alpha_s_sq": 1.0, "rho": 0.5, "sigma_sq": 0.5}
        d.update(kw)
        path.write_text(json.dumps(d))

    def test_rho_zero(self, tmp_path, capsys):
        self.write(tmp_path / "s.json", rho=0.0)
        code, out, _ = run(["risk", "--scenario", tmp_path / "s.json", "--out", tmp_path / "o"], capsys)
        assert code == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["optimal_tuning"]["eta_star_lower"] == 0.0
        assert (tmp_path / "o" / "risk_surface.csv").read_text().startswith("lambda,eta,risk_lower,risk_upper\n")

    def test_v0_check(self, tmp_path, capsys):
        self.write(tmp_path / "s.json")
        run(["risk", "--scenario", tmp_path / "s.json", "--out", tmp_path / "o"], capsys)
        chk = json.loads((tmp_path / "o" / "report.json").read_text())["limit_checks"]["v0_identity_check"]
        assert chk["value"] == pytest.approx(1.0, rel=1e-9)

    def test_malformed(self, tmp_path, capsys):
        (tmp_path / "s.json").write_text("{\"gamma\": 2,")
        code, _, err = run(["risk", "--scenario", tmp_path / "s.json", "--out", tmp_path / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "FormatError"

    def test_missing_field(self, tmp_path, capsys):
        (tmp_path / "s.json").write_text("{\"gamma\": 2}")
        code, _, err = run(["risk", "--scenario", tmp_path / "s.json", "--out", tmp_path / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "ParameterError"

    def test_perfect_source_reported(self, tmp_path, capsys):
        self.write(tmp_path / "s.json", rho=1.0)
        code, _, _ = run(["risk", "--scenario", tmp_path / "s.json", "--out", tmp_path / "o"], capsys)
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert code == 0 and "error" in report["optimal_tuning"]


class TestSimulate:
    def test_fig2_files_and_determinism(self, tmp_path, capsys):
        spec = {"figure": "fig2_noiseless_risk", "replicates": 2, "master_seed": 3, "params": {"n_lambdas": 6}}
        (tmp_path / "s.json").write_text(json.dumps(spec))
        for out in ("a", "b"):
            assert run(["simulate", "--spec", tmp_path / "s.json", "--out", tmp_path / out], capsys)[0] == 0
        assert (tmp_path / "a" / "fig2_results.csv").read_bytes() == (tmp_path / "b" / "fig2_results.csv").read_bytes()
        man = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert man["master_seed"] == 3 and man["threads"] == 1

    def test_unknown_figure(self, tmp_path, capsys):
        (tmp_path / "s.json").write_text(json.dumps({"figure": "fig7"}))
        code, _, err = run(["simulate", "--spec", tmp_path / "s.json", "--out", tmp_path / "o"], capsys)
        assert code == 2 and error_payload(err)["error"] == "ParameterError"


def test_no_subcommand(capsys):
    code, _, err = run([], capsys)
    assert code == 2 and error_payload(err)["error"] == "UsageError"


def test_unknown_flag(capsys):
    code, _, err = run(["fit", "--bogus"], capsys)
    assert code == 2 and error_payload(err)["error"] == "UsageError"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "angletl.cli", "risk"], capture_output=True, text=True)
    assert proc.returncode == 2 and json.loads(proc.stderr.splitlines()[0])["error"] == "UsageError"
