import json
import re

import numpy as np
import pytest

from deepckit import bench


def fast_config(tmp_path, **overrides):
    """Desk-scale config so harness tests stay quick."""
    values = dict(
        T=60,
        t_ini=2,
        n_horizon=8,
        trials=2,
        seed=424242,
        out_dir=str(tmp_path / "out"),
        variants=("hybrid", "svd"),
        noise_var=0.01,
        slra_order=8,
    )
    values.update(overrides)
    return bench.ExperimentConfig(**values)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            bench.ExperimentConfig(trials=0)
        with pytest.raises(ValueError):
            bench.ExperimentConfig(plant="unknown")
        with pytest.raises(ValueError):
            bench.ExperimentConfig(variants=("nope",))
        with pytest.raises(ValueError):
            bench.ExperimentConfig(T=40, t_ini=4, n_horizon=40)

    def test_echo_and_hash(self, tmp_path):
        cfg = fast_config(tmp_path)
        cfg.echo(tmp_path / "out")
        data = json.loads((tmp_path / "out" / "config.json").read_text())
        assert data["seed"] == 424242
        assert len(cfg.config_hash()) == 12
        assert cfg.config_hash() == fast_config(tmp_path).config_hash()
        assert cfg.config_hash() != fast_config(tmp_path, seed=1).config_hash()


class TestMakeInstance:
    def test_deterministic(self, small_plant):
        a = bench.make_instance(small_plant, T=60, t_ini=2, n_horizon=8,
                                noise_var=0.01, u_lo=-1, u_hi=1, seed=5)
        b = bench.make_instance(small_plant, T=60, t_ini=2, n_horizon=8,
                                noise_var=0.01, u_lo=-1, u_hi=1, seed=5)
        np.testing.assert_array_equal(a[0].yf, b[0].yf)
        np.testing.assert_array_equal(a[1].y_ini, b[1].y_ini)
        np.testing.assert_array_equal(a[2], b[2])

    def test_distinct_seeds_differ(self, small_plant):
        a = bench.make_instance(small_plant, T=60, t_ini=2, n_horizon=8,
                                noise_var=0.0, u_lo=-1, u_hi=1, seed=5)
        b = bench.make_instance(small_plant, T=60, t_ini=2, n_horizon=8,
                                noise_var=0.0, u_lo=-1, u_hi=1, seed=6)
        assert np.abs(a[0].yf - b[0].yf).max() > 1e-6

    def test_state_consistent_with_window(self, small_plant):
        from deepckit.plants import step_linear

        lib, online, x_true = bench.make_instance(
            small_plant, T=60, t_ini=3, n_horizon=8,
            noise_var=0.0, u_lo=-1, u_hi=1, seed=9)
        # replaying the online inputs from the implied start must reach x_true:
        # recover the start by brute force over the stored window
        u_seq = online.u_ini.reshape(3, 1)
        y_seq = online.y_ini.reshape(3, 1)
        # solve for x0 from the observability system
        rows, rhs = [], []
        for k in range(3):
            obs = small_plant.c @ np.linalg.matrix_power(small_plant.a, k)
            drive = np.zeros((1,))
            x_part = np.zeros(2)
            xk = np.zeros(2)
            for j in range(k):
                xk = small_plant.a @ xk + small_plant.b @ u_seq[j]
            rows.append(obs)
            rhs.append(y_seq[k] - small_plant.c @ xk)
        x0, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
        x = x0
        for k in range(3):
            x, _ = step_linear(small_plant, x, u_seq[k])
        np.testing.assert_allclose(x, x_true, atol=1e-8)


class TestEquivalenceCommand:
    def test_self_comparison_is_zero(self, tmp_path, small_plant):
        # identical solves deviate by exactly zero
        lib, online, _ = bench.make_instance(
            small_plant, T=60, t_ini=2, n_horizon=8,
            noise_var=0.01, u_lo=-1, u_hi=1, seed=11)
        from deepckit import variants as va

        spec = bench._make_spec(fast_config(tmp_path), small_plant)
        spec.lambda1, spec.lambda2, spec.lambda_y = 0.0, 30.0, 100.0
        s1 = va.solve_hybrid(lib, online, spec)
        s2 = va.solve_hybrid(lib, online, spec)
        assert bench._deviation(s1, s2, with_sigma=True) == (0.0, 0.0, 0.0)

    def test_report_written_and_passes(self, tmp_path, small_plant, monkeypatch):
        monkeypatch.setattr(bench, "_make_plant", lambda cfg: small_plant)
        cfg = fast_config(tmp_path, trials=2)
        path, ok = bench.cmd_equivalence(cfg)
        assert ok
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        assert f"config_hash={cfg.config_hash()}" in lines[0]
        header = lines[1].split(",")
        assert header == ["regime", "pair", "max_du", "max_dy", "max_dsigma", "tolerance", "pass"]
        regimes = {row.split(",")[0].split("[")[0] for row in lines[2:]}
        assert regimes == {"fact1", "theorem2", "theorem3", "theorem1"}
        assert all(row.split(",")[-1] == "1" for row in lines[2:])


class TestBenchmarkCommand:
    def test_outputs_and_determinism(self, tmp_path, small_plant, monkeypatch):
        monkeypatch.setattr(bench, "_make_plant", lambda cfg: small_plant)
        cfg = fast_config(tmp_path, trials=3)
        path, rows = bench.cmd_benchmark(cfg)
        names = [r.variant for r in rows]
        assert names == ["ground-truth", "hybrid", "svd"]
        assert all(r.failures == 0 for r in rows)
        gt = rows[0].mean_cost
        for r in rows[1:]:
            assert r.increase_rate_pct == pytest.approx(
                100 * (r.mean_cost - gt) / gt
            )
        first = path.read_bytes()
        assert (tmp_path / "out" / "timings.csv").exists()
        assert (tmp_path / "out" / "trajectory.svg").exists()
        # byte-identical rerun (timings excluded from the guarantee)
        path2, _ = bench.cmd_benchmark(cfg)
        assert path2.read_bytes() == first

    def test_noise_free_rates_are_tiny(self, tmp_path, small_plant, monkeypatch):
        monkeypatch.setattr(bench, "_make_plant", lambda cfg: small_plant)
        cfg = fast_config(
            tmp_path, trials=2, noise_var=0.0,
            lambda1=0.0, lambda2=0.0, lambda_y=1e14,
            variants=("basic", "hybrid", "svd", "ddspc", "svd-iter"),
            slra_order=2,
        )
        _, rows = bench.cmd_benchmark(cfg)
        for r in rows:
            if r.variant != "ground-truth":
                assert abs(r.increase_rate_pct) <= 0.1


class TestSweepCommand:
    def test_single_cell_matches_benchmark_trial(self, tmp_path, small_plant, monkeypatch):
        monkeypatch.setattr(bench, "_make_plant", lambda cfg: small_plant)
        cfg = fast_config(tmp_path, trials=1, variants=("hybrid",),
                          lambda_y=100.0)
        path = bench.cmd_sweep(cfg, [30.0], [30.0])
        row = path.read_text().splitlines()[2].split(",")
        assert row[0] == "hybrid"
        sweep_cost = float(row[3])

        cfg_b = fast_config(tmp_path, trials=1, variants=("hybrid",),
                            lambda1=30.0, lambda2=30.0, lambda_y=100.0,
                            out_dir=str(tmp_path / "out2"))
        _, rows = bench.cmd_benchmark(cfg_b)
        bench_cost = [r for r in rows if r.variant == "hybrid"][0].mean_cost
        assert sweep_cost == pytest.approx(bench_cost, rel=1e-6)

    def test_grid_shape_and_sentinels(self, tmp_path, small_plant, monkeypatch):
        monkeypatch.setattr(bench, "_make_plant", lambda cfg: small_plant)
        cfg = fast_config(tmp_path, trials=1, variants=("hybrid", "ddspc"))
        path = bench.cmd_sweep(cfg, [1e-5, 1.0], [1e-2, 1e2])
        rows = path.read_text().splitlines()[2:]
        assert len(rows) == 2 * 2 * 2
        for row in rows:
            cost = row.split(",")[3]
            assert cost == "nan" or float(cost) >= 0.0


class TestNonlinearityCommand:
    def test_linear_limit_and_csv(self, tmp_path):
        cfg = bench.ExperimentConfig(
            trials=2, seed=99, out_dir=str(tmp_path / "nl"),
            variants=("svd-iter",),
        )
        path = bench.cmd_nonlinearity(cfg, [1.0])
        rows = [r.split(",") for r in path.read_text().splitlines()[2:]]
        by_name = {r[1]: float(r[2]) for r in rows}
        assert set(by_name) == {"ground-truth", "svd-iter"}
        # linear regime with noise-free data: the structured variant matches
        # the model-based controller closely
        gt = by_name["ground-truth"]
        assert abs(by_name["svd-iter"] - gt) / gt <= 0.10

    def test_eps_validation(self, tmp_path):
        cfg = bench.ExperimentConfig(trials=1, out_dir=str(tmp_path / "nl2"))
        with pytest.raises(ValueError):
            bench.cmd_nonlinearity(cfg, [1.5])


class TestEmitSvg:
    def test_empty_series_valid_svg(self, tmp_path):
        path = tmp_path / "empty.svg"
        bench.emit_svg([], path)
        text = path.read_text()
        assert text.startswith("<svg")
        assert text.rstrip().endswith("</svg>")
        assert "<line" in text  # axes still drawn

    def test_two_point_series_segment(self, tmp_path):
        path = tmp_path / "seg.svg"
        bench.emit_svg([("a", [0.0, 1.0], [0.0, 1.0])], path)
        pts = re.search(r'points="([^"]+)"', path.read_text()).group(1)
        assert len(pts.split()) == 2

    def test_round_trip_coordinates(self, tmp_path):
        rng = np.random.default_rng(3)
        x = np.linspace(0.0, 10.0, 17)
        y = rng.uniform(-4.0, 8.0, 17)
        path = tmp_path / "rt.svg"
        bench.emit_svg([("series", x, y)], path)
        pts = re.search(r'points="([^"]+)"', path.read_text()).group(1)
        coords = np.array([[float(v) for v in pair.split(",")] for pair in pts.split()])
        # invert the affine plot transform and recover the data
        sx = (coords[-1, 0] - coords[0, 0]) / (x[-1] - x[0])
        x_back = (coords[:, 0] - coords[0, 0]) / sx + x[0]
        np.testing.assert_allclose(x_back, x, atol=1e-2)
        y_at_max = y.argmax()
        y_at_min = y.argmin()
        assert coords[y_at_max, 1] == coords[:, 1].min()  # svg y grows downward
        assert coords[y_at_min, 1] == coords[:, 1].max()
        sy = (coords[y_at_min, 1] - coords[y_at_max, 1]) / (y.max() - y.min())
        y_back = y.max() - (coords[:, 1] - coords[y_at_max, 1]) / sy
        np.testing.assert_allclose(y_back, y, atol=1e-2 * (y.max() - y.min()))

    def test_non_finite_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            bench.emit_svg([("bad", [0.0, 1.0], [0.0, np.inf])], tmp_path / "x.svg")


class TestCli:
    def test_sweep_subcommand(self, tmp_path, small_plant, monkeypatch, capsys):
        monkeypatch.setattr(bench, "_make_plant", lambda cfg: small_plant)
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({
            "T": 60, "t_ini": 2, "n_horizon": 8, "trials": 1,
            "variants": ["hybrid"], "out_dir": str(tmp_path / "cli-out"),
        }))
        code = bench.main([
            "sweep", "--config", str(cfg_file), "--seed", "3",
            "--lambda1-grid", "1.0", "--lambda2-grid", "1.0",
        ])
        assert code == 0
        assert (tmp_path / "cli-out" / "sweep.csv").exists()
        assert "sweep.csv" in capsys.readouterr().out

    def test_flag_overrides_config(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"seed": 1, "trials": 5}))
        import argparse

        args = bench.build_args_for_test = None  # no-op guard
        parser_args = ["benchmark", "--config", str(cfg_file), "--seed", "7"]
        # resolve via the private helper to avoid a full benchmark run
        ns = argparse.Namespace(
            command="benchmark", config=str(cfg_file), seed=7, trials=None,
            out_dir=None, variants=None, lambda1=None, lambda2=None,
            lambda_y=None, noise_var=None, plant=None, eps=None,
        )
        cfg = bench._resolve_config(ns)
        assert cfg.seed == 7 and cfg.trials == 5
