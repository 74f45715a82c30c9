import json

import numpy as np
import pytest

from nlarforest.cli import cli_main


def run(argv):
    return cli_main(argv)


@pytest.fixture()
def fitted_dir(tmp_path):
    data_csv = tmp_path / "data.csv"
    forest_dir = tmp_path / "forest"
    assert run(["simulate", "--f", "f1", "--T", "400", "--seed", "7",
                "--out", str(data_csv)]) == 0
    assert run(["fit", "--data", str(data_csv), "--out", str(forest_dir),
                "--k", "92", "--B", "10", "--seed", "1"]) == 0
    return data_csv, forest_dir


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run(["simulate", "--f", "f1", "--T", "400", "--seed", "7",
                        "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_stdout_mode(self, capsys):
        assert run(["simulate", "--f", "f1", "--T", "20", "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "t,y,x1"
        assert len(out.splitlines()) == 21


class TestFitPredictValidate:
    def test_validate_fitted_forest_ok(self, fitted_dir):
        _, forest_dir = fitted_dir
        code = run(["validate", "--forest", str(forest_dir),
                    "--k", "92", "--alpha", "0.1", "--m", "184"])
        assert code == 0

    def test_validate_wrong_k_fails(self, fitted_dir, capsys):
        _, forest_dir = fitted_dir
        code = run(["validate", "--forest", str(forest_dir),
                    "--k", "150", "--alpha", "0.1", "--m", "300"])
        assert code == 2
        assert "leaf-size violations" in capsys.readouterr().out

    def test_predict_matches_library(self, fitted_dir, tmp_path):
        data_csv, forest_dir = fitted_dir
        points = tmp_path / "points.csv"
        points.write_text("x1\n-1.0\n0.0\n1.0\n")
        out = tmp_path / "preds.csv"
        assert run(["predict", "--forest", str(forest_dir),
                    "--points", str(points), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x1,prediction"
        from nlarforest import forest_predict_batch, load_forest

        forest = load_forest(str(forest_dir))
        expect = forest_predict_batch(forest, np.array([[-1.0], [0.0], [1.0]]))
        got = np.array([float(l.split(",")[1]) for l in lines[1:]])
        assert np.array_equal(got, expect)

    def test_bad_points_header(self, fitted_dir, tmp_path):
        _, forest_dir = fitted_dir
        points = tmp_path / "points.csv"
        points.write_text("a,b\n1,2\n")
        assert run(["predict", "--forest", str(forest_dir),
                    "--points", str(points)]) == 1


class TestErrorPaths:
    def test_missing_config_file(self, tmp_path, capsys):
        code = run(["estimation-curves", "--config", str(tmp_path / "no.json")])
        assert code == 1
        err = capsys.readouterr().err
        assert err.strip().count("\n") == 0  # one-line diagnostic

    def test_unknown_subcommand(self):
        assert run(["transmogrify"]) == 1

    def test_unknown_flag(self):
        assert run(["simulate", "--T", "10", "--frobnicate"]) == 1

    def test_wrong_experiment_in_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "k_sweep"}))
        assert run(["estimation-curves", "--config", str(cfg)]) == 1

    def test_bad_k_value(self, fitted_dir, tmp_path):
        data_csv, _ = fitted_dir
        assert run(["fit", "--data", str(data_csv),
                    "--out", str(tmp_path / "f2"), "--k", "0"]) == 1

    def test_T_below_k_is_config_error(self, tmp_path):
        data_csv = tmp_path / "tiny.csv"
        assert run(["simulate", "--f", "f1", "--T", "30", "--seed", "1",
                    "--out", str(data_csv)]) == 0
        assert run(["fit", "--data", str(data_csv),
                    "--out", str(tmp_path / "f3"), "--k", "50"]) == 1


class TestExperimentCommands:
    def test_estimation_curves_with_overrides(self, tmp_path):
        out = tmp_path / "exp"
        code = run(["estimation-curves", "--Ts", "50", "--seeds", "1",
                    "--B", "3", "--k-override", "10", "--burn-in", "20",
                    "--output-dir", str(out)])
        assert code == 0
        assert (out / "estimation_curves.csv").exists()
        manifest = json.load(open(out / "manifest.json"))
        assert manifest["config"]["B"] == 3
        assert manifest["config"]["seeds"] == [1]

    def test_config_file_plus_flag_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "experiment": "density_check", "f_name": "f1",
            "n_samples": 50_000, "n_bins_per_axis": 20, "seeds": [3],
            "output_dir": str(tmp_path / "ignored"),
        }))
        out = tmp_path / "dc"
        code = run(["density-check", "--config", str(cfg_path),
                    "--output-dir", str(out)])
        assert code == 0
        manifest = json.load(open(out / "manifest.json"))
        assert manifest["config"]["n_samples"] == 50_000
        assert manifest["config"]["output_dir"] == str(out)
