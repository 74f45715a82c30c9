import json
import math

import numpy as np
import pytest

from nlarforest import ConfigurationError, ExperimentConfig, k_schedule
from nlarforest.experiments import (
    GRID_1D,
    grid_2d,
    run_concentration,
    run_density_check,
    run_estimation_curves,
    run_k_sweep,
    run_mse_curve,
    run_simulate,
)


class TestKSchedule:
    def test_published_value(self):
        assert k_schedule(1600) == 236

    def test_formula_values(self):
        assert k_schedule(400) == 92
        assert k_schedule(6400) == 512

    def test_lower_edge(self):
        assert k_schedule(16) >= 1

    def test_below_domain(self):
        with pytest.raises(ConfigurationError):
            k_schedule(15)

    def test_matches_direct_formula(self):
        for T in (37, 250, 1000, 12345):
            expect = math.floor(0.04 * math.log(T) ** 4 * math.log(math.log(T)))
            assert k_schedule(T) == max(1, expect)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(experiment="estimation_curves")
        assert cfg.Ts == [400, 1600, 6400]
        assert cfg.B == 500 and cfg.seeds == [1, 2, 3, 4, 5]

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigurationError, match="unknown config fields"):
            ExperimentConfig.from_dict({"experiment": "k_sweep", "bogus": 1})

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(experiment="warp_drive")

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            ExperimentConfig.from_json(tmp_path / "nope.json")

    def test_from_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"experiment": "k_sweep", "B": 7,
                                    "Ts": [100], "seeds": [3]}))
        cfg = ExperimentConfig.from_json(path)
        assert cfg.B == 7 and cfg.Ts == [100] and cfg.seeds == [3]

    def test_k_override(self):
        cfg = ExperimentConfig(experiment="k_sweep", k_override=33)
        assert cfg.k_for(1600) == 33


def _read_csv(path):
    lines = [l for l in open(path).read().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    rows = [l.split(",") for l in lines[1:]]
    return header, rows


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    cfg = ExperimentConfig(
        experiment="estimation_curves", f_name="f3_cosine",
        Ts=[50, 100], seeds=[1, 2], B=5, k_override=10,
        burn_in=50, output_dir=str(tmp_path_factory.mktemp("curves")),
    )
    return cfg, run_estimation_curves(cfg)


class TestEstimationCurves:
    def test_row_count(self, outputs):
        _, paths = outputs
        header, rows = _read_csv(paths[0])
        assert header == ["x", "f_true", "f_hat", "T", "seed"]
        assert len(rows) == 401 * 2 * 2

    def test_f_true_exact_at_origin(self, outputs):
        _, paths = outputs
        _, rows = _read_csv(paths[0])
        at_zero = [r for r in rows if r[0] == "0.0"]
        assert len(at_zero) == 4
        assert all(r[1] == "1.0" for r in at_zero)

    def test_losslessly_parseable(self, outputs):
        _, paths = outputs
        _, rows = _read_csv(paths[0])
        xs = np.array([float(r[0]) for r in rows[:401]])
        assert np.array_equal(xs, GRID_1D)

    def test_manifest_written(self, outputs):
        cfg, _ = outputs
        manifest = json.load(open(f"{cfg.output_dir}/manifest.json"))
        assert manifest["experiment"] == "estimation_curves"
        assert manifest["config"]["Ts"] == [50, 100]
        assert manifest["k_by_T"] == {"50": 10, "100": 10}
        assert "wall_time_seconds" in manifest

    def test_wrong_dimension_rejected(self, tmp_path):
        cfg = ExperimentConfig(experiment="estimation_curves",
                               f_name="f5_twodim", output_dir=str(tmp_path))
        with pytest.raises(ConfigurationError, match="p=1"):
            run_estimation_curves(cfg)


class TestKSweep:
    def test_rows_and_roughness_decreasing(self, tmp_path):
        """Bigger leaves smooth the fitted curve: the mean absolute
        successive difference along the grid falls as k grows."""
        cfg = ExperimentConfig(
            experiment="k_sweep", f_name="f2_expar", Ts=[1600],
            ks=[40, 160, 640], seeds=[1, 2, 3, 4, 5], B=50,
            output_dir=str(tmp_path),
        )
        (path,) = run_k_sweep(cfg)
        header, rows = _read_csv(path)
        assert header == ["x", "f_true", "f_hat", "T", "k", "seed"]
        assert len(rows) == 401 * 3 * 5

        rough = {}
        for k in (40, 160, 640):
            per_seed = []
            for seed in (1, 2, 3, 4, 5):
                fhat = np.array([float(r[2]) for r in rows
                                 if r[4] == str(k) and r[5] == str(seed)])
                per_seed.append(float(np.mean(np.abs(np.diff(fhat)))))
            rough[k] = float(np.median(per_seed))
        assert rough[640] < rough[160] < rough[40]

    def test_predictions_respect_output_range(self, tmp_path):
        cfg = ExperimentConfig(experiment="k_sweep", f_name="f2_expar",
                               Ts=[400], ks=[40], seeds=[1], B=5,
                               output_dir=str(tmp_path))
        (path,) = run_k_sweep(cfg)
        _, rows = _read_csv(path)
        fhat = np.array([float(r[2]) for r in rows])
        # predictions are averages of observed outputs
        from nlarforest import SimulationSpec, laplace, simulate_dataset
        from nlarforest.experiments import resolve_f

        data = simulate_dataset(SimulationSpec(resolve_f("f2_expar"),
                                               laplace(1.0), T=400, seed=1))
        assert fhat.min() >= data.Y.min() and fhat.max() <= data.Y.max()


class TestMseCurve:
    def test_grid_is_289_points(self):
        G = grid_2d()
        assert G.shape == (289, 2)
        assert G[0, 0] == -2.0 and G[-1, -1] == 2.0

    def test_rows_and_schema(self, tmp_path):
        cfg = ExperimentConfig(experiment="mse_curve", f_name="f5_twodim",
                               Ts=[100, 200], seeds=[1, 2], B=5,
                               k_override=20, burn_in=50,
                               output_dir=str(tmp_path))
        (path,) = run_mse_curve(cfg)
        header, rows = _read_csv(path)
        assert header == ["T", "mse", "seed"]
        assert len(rows) == 4
        assert cfg.rho == [0.5, 0.5]  # equal weights applied by default

    def test_pure_noise_mse_small(self, tmp_path):
        """With no signal the forest fits leaf means of noise: the error at
        T = 10^4 stays far below 0.1."""
        cfg = ExperimentConfig(experiment="mse_curve", f_name="zero2d",
                               Ts=[10_000], seeds=[1], B=50,
                               output_dir=str(tmp_path))
        (path,) = run_mse_curve(cfg)
        _, rows = _read_csv(path)
        assert float(rows[0][1]) <= 0.1

    def test_wrong_dimension_rejected(self, tmp_path):
        cfg = ExperimentConfig(experiment="mse_curve", f_name="f3_cosine",
                               output_dir=str(tmp_path))
        with pytest.raises(ConfigurationError, match="p=2"):
            run_mse_curve(cfg)


class TestConcentration:
    def test_rows_and_ratio_identity(self, tmp_path):
        cfg = ExperimentConfig(experiment="concentration", f_name="f3_cosine",
                               Ts=[400, 1600], seeds=[1, 2], B=10,
                               n_mc=50_000, mc_burn_in=500,
                               output_dir=str(tmp_path))
        (path,) = run_concentration(cfg)
        header, rows = _read_csv(path)
        assert header == ["T", "k", "sup_dev", "ratio", "seed"]
        assert len(rows) == 4  # one row per (T, seed)
        for r in rows:
            T, k = int(r[0]), int(r[1])
            sup_dev, ratio = float(r[2]), float(r[3])
            assert abs(ratio - sup_dev * math.sqrt(k) / math.log(T) ** 2) <= 1e-12
        assert [(int(r[0]), int(r[4])) for r in rows] == [
            (400, 1), (400, 2), (1600, 1), (1600, 2)]


class TestDensityCheckAndSimulate:
    def test_density_check_csv(self, tmp_path):
        cfg = ExperimentConfig(experiment="density_check", f_name="f1",
                               n_samples=50_000, n_bins_per_axis=25,
                               seeds=[5], output_dir=str(tmp_path))
        (path,) = run_density_check(cfg)
        header, rows = _read_csv(path)
        assert header[:3] == ["zeta_bar", "zeta", "fraction_in_bounds"]
        assert float(rows[0][2]) >= 0.99

    def test_simulate_writes_dataset(self, tmp_path):
        from nlarforest import Dataset

        cfg = ExperimentConfig(experiment="simulate", f_name="f1",
                               Ts=[120], seeds=[7], output_dir=str(tmp_path))
        (path,) = run_simulate(cfg)
        data = Dataset.from_csv(path)
        assert data.T == 120 and data.p == 1


class TestDeterminismAcrossJobs:
    def test_identical_bytes_regardless_of_jobs(self, tmp_path):
        base = dict(experiment="estimation_curves", f_name="f3_cosine",
                    Ts=[50, 100], seeds=[1, 2], B=5, k_override=10, burn_in=50)
        cfg1 = ExperimentConfig(**base, jobs=1, output_dir=str(tmp_path / "a"))
        cfg2 = ExperimentConfig(**base, jobs=2, output_dir=str(tmp_path / "b"))
        (p1,) = run_estimation_curves(cfg1)
        (p2,) = run_estimation_curves(cfg2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_rerun_reproduces_bytes(self, tmp_path):
        cfg = lambda d: ExperimentConfig(
            experiment="concentration", f_name="f3_cosine", Ts=[400],
            seeds=[1], B=5, n_mc=50_000, mc_burn_in=500,
            output_dir=str(tmp_path / d))
        (p1,) = run_concentration(cfg("x"))
        (p2,) = run_concentration(cfg("y"))
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_manifest_suffices_to_reproduce(self, tmp_path):
        """Feeding a run's recorded config back in regenerates its CSV
        byte-for-byte."""
        cfg = ExperimentConfig(experiment="k_sweep", f_name="f3_cosine",
                               Ts=[100], ks=[10, 20], seeds=[1], B=4,
                               burn_in=50, output_dir=str(tmp_path / "first"))
        (p1,) = run_k_sweep(cfg)
        recorded = json.load(open(tmp_path / "first" / "manifest.json"))["config"]
        recorded["output_dir"] = str(tmp_path / "second")
        (p2,) = run_k_sweep(ExperimentConfig.from_dict(recorded))
        assert open(p1, "rb").read() == open(p2, "rb").read()
