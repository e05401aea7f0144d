"""Sweeps, fits, win fractions, CSV round trips, and the CLI."""

import json
import subprocess
import sys
from dataclasses import asdict

import numpy as np
import pandas as pd
import pytest

from qaoa_mcmc.harness import (
    SweepSpec,
    aggregate_means,
    derive_seed,
    fit_inverse_depth,
    fit_scaling,
    read_csv,
    run_m_sweep,
    run_magnetization,
    run_spectral_sweep,
    run_theta_study_vs_n,
    run_theta_study_vs_p,
    summarize_theta_study,
    sweep_rows_for_instance,
    win_fractions,
    write_records,
)
from qaoa_mcmc.ising import SpinGlassInstance, generate_instance


def small_spec(**overrides):
    base = dict(
        sizes=(3, 4, 5),
        instances_per_size=4,
        temperature=0.1,
        p=5,
        theta_max=0.3,
        master_seed=11,
        grid_points=32,
    )
    base.update(overrides)
    return SweepSpec(**base)


def run_cli(*args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "qaoa_mcmc", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
        check=False,
    )


class TestSeedDerivation:
    def test_deterministic(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)

    def test_negative_parts_allowed(self):
        assert derive_seed(-5, 2) == derive_seed(-5, 2)


class TestSpectralSweep:
    def test_row_count_and_order(self):
        spec = small_spec()
        records = run_spectral_sweep(spec)
        assert len(records) == 4 * 4 * 3  # proposals x instances x sizes
        labels = [(r.n, r.proposal) for r in records[:4]]
        assert labels == [(3, "optimized"), (3, "random"), (3, "uniform"), (3, "local")]

    def test_deltas_valid(self):
        spec = small_spec(sizes=(3, 4), instances_per_size=3)
        for rec in run_spectral_sweep(spec):
            assert rec.error == ""
            assert 0.0 <= rec.delta <= 1.0
            assert 0.0 < rec.exact_ar <= 1.0

    def test_deterministic_rerun(self):
        spec = small_spec(sizes=(3,), instances_per_size=3)
        a = run_spectral_sweep(spec)
        b = run_spectral_sweep(spec)
        assert [asdict(r) for r in a] == [
            {**asdict(r), "wall_time": a[i].wall_time} for i, r in enumerate(b)
        ]

    def test_parallel_matches_serial(self):
        spec = small_spec(sizes=(3, 4), instances_per_size=2)
        serial = run_spectral_sweep(spec, workers=1)
        parallel = run_spectral_sweep(spec, workers=3)
        for r1, r2 in zip(serial, parallel):
            assert r1.delta == r2.delta and r1.theta == r2.theta

    def test_degenerate_instance_flagged_not_fatal(self):
        spec = small_spec()
        inst = SpinGlassInstance(n=3, couplings=np.zeros(3), fields=np.zeros(3), seed=0)
        rows = sweep_rows_for_instance(spec, inst, index=0)
        assert len(rows) == 4
        by_kind = {r.proposal: r for r in rows}
        # circuit kernels cannot exist for the all-zero instance
        assert by_kind["optimized"].error and by_kind["optimized"].delta is None
        assert by_kind["random"].error and by_kind["random"].delta is None
        # classical kernels still produce gaps (flat target -> uniform wins)
        assert by_kind["uniform"].delta == pytest.approx(1.0, abs=1e-9)
        assert by_kind["local"].delta is not None


class TestFitScaling:
    def test_synthetic_exact_fit(self):
        rows = []
        for n in (3, 4, 5, 6):
            for i in range(3):
                rows.append(
                    {"n": n, "instance_seed": i, "proposal": "uniform", "m": "",
                     "delta": 2.0 ** (-0.5 * n), "error": ""}
                )
        df = pd.DataFrame(rows)
        fits = fit_scaling(df)
        assert len(fits) == 1
        assert fits[0].k == pytest.approx(0.5, abs=1e-12)
        assert fits[0].k_uncertainty == pytest.approx(0.0, abs=1e-10)
        assert fits[0].r_squared == pytest.approx(1.0, abs=1e-12)
        assert fits[0].ratio_to_uniform == pytest.approx(1.0)

    def test_requires_three_sizes(self):
        df = pd.DataFrame(
            [{"n": n, "instance_seed": 0, "proposal": "uniform", "m": "", "delta": 0.5}
             for n in (3, 4)]
        )
        assert fit_scaling(df) == []

    def test_ratio_against_uniform(self):
        rows = []
        for n in (3, 4, 5):
            rows.append({"n": n, "instance_seed": 0, "proposal": "uniform", "m": "", "delta": 2.0 ** (-1.0 * n)})
            rows.append({"n": n, "instance_seed": 0, "proposal": "optimized", "m": "", "delta": 2.0 ** (-0.5 * n)})
        fits = {f.proposal: f for f in fit_scaling(pd.DataFrame(rows))}
        assert fits["optimized"].ratio_to_uniform == pytest.approx(2.0, abs=1e-9)

    def test_aggregate_means_structure(self):
        spec = small_spec(sizes=(3, 4), instances_per_size=2)
        df = pd.DataFrame([asdict(r) for r in run_spectral_sweep(spec)])
        means = aggregate_means(df)
        assert set(means.columns) >= {"proposal", "m", "n", "mean_delta", "std_delta", "count", "stderr_delta"}
        assert (means["count"] == 2).all()


class TestWinFraction:
    def test_identical_deltas_zero_percent(self):
        rows = []
        for prop in ("optimized", "uniform", "local", "random"):
            for i in range(5):
                rows.append({"n": 4, "instance_seed": i, "proposal": prop, "delta": 0.25})
        out = win_fractions(pd.DataFrame(rows))
        assert out[0]["beats_all"] == 0.0

    def test_dominant_baseline_hundred_percent(self):
        rows = []
        for i in range(5):
            rows.append({"n": 4, "instance_seed": i, "proposal": "optimized", "delta": 0.9})
            for prop in ("uniform", "local", "random"):
                rows.append({"n": 4, "instance_seed": i, "proposal": prop, "delta": 0.1})
        out = win_fractions(pd.DataFrame(rows))
        assert out[0]["beats_all"] == 100.0
        assert out[0]["beats_uniform"] == 100.0

    def test_missing_kernel_detected(self):
        rows = [{"n": 3, "instance_seed": 0, "proposal": "optimized", "delta": 0.5}]
        with pytest.raises(ValueError):
            win_fractions(pd.DataFrame(rows))


class TestMSweep:
    def test_infinite_budget_matches_spectral_sweep(self):
        spec = small_spec(sizes=(3,), instances_per_size=2)
        m_rows = run_m_sweep(spec, (None,))
        s_rows = run_spectral_sweep(spec)
        m_opt = {(r.n, r.instance_seed): r for r in m_rows if r.proposal == "optimized"}
        s_opt = {(r.n, r.instance_seed): r for r in s_rows if r.proposal == "optimized"}
        assert set(m_opt) == set(s_opt)
        for key in m_opt:
            assert m_opt[key].theta_star == s_opt[key].theta_star
            assert m_opt[key].delta == s_opt[key].delta

    def test_same_instances_across_budgets(self):
        spec = small_spec(sizes=(3,), instances_per_size=2)
        rows = run_m_sweep(spec, (8, 32))
        seeds_by_m = {}
        for r in rows:
            if r.proposal == "optimized":
                seeds_by_m.setdefault(r.m, set()).add(r.instance_seed)
        assert seeds_by_m["8"] == seeds_by_m["32"]

    def test_uniform_baseline_present(self):
        spec = small_spec(sizes=(3,), instances_per_size=2)
        rows = run_m_sweep(spec, (8,))
        assert any(r.proposal == "uniform" for r in rows)


class TestThetaStudy:
    def test_vs_n_summary(self):
        spec = small_spec(sizes=(3, 4), instances_per_size=3)
        records = run_theta_study_vs_n(spec)
        assert len(records) == 6
        summary = summarize_theta_study(records, by="n")
        assert [row["n"] for row in summary] == [3, 4]
        for row in summary:
            assert 0.0 < row["mean_theta_star"] < 0.6

    def test_vs_p_fit(self):
        spec = small_spec(instances_per_size=3)
        records = run_theta_study_vs_p(spec, p_values=(1, 2, 4), n=4)
        summary = summarize_theta_study(records, by="p")
        a, a_unc = fit_inverse_depth(summary)
        assert 0.8 < a < 2.0
        assert a_unc >= 0.0

    def test_doubling_depth_roughly_halves_theta(self):
        spec = small_spec(instances_per_size=4)
        records = run_theta_study_vs_p(spec, p_values=(5, 10), n=4)
        summary = {row["p"]: row["mean_theta_star"] for row in summarize_theta_study(records, by="p")}
        ratio = summary[5] / summary[10]
        assert 1.6 <= ratio <= 2.4


class TestMagnetization:
    def test_rows_and_exact_reference(self):
        inst = generate_instance(6, 3)
        rows, thetas = run_magnetization(
            inst,
            temperature=1.0,
            m_estimate=128,
            chains=4,
            steps=200,
            proposals=("optimized", "uniform"),
            master_seed=5,
        )
        assert len(rows) == 2 * 200
        exact_vals = {r.exact_m for r in rows}
        assert len(exact_vals) == 1  # constant reference column
        assert thetas["optimized"] is not None
        by_kernel = {}
        for r in rows:
            by_kernel.setdefault(r.proposal, []).append(r)
        for rs in by_kernel.values():
            assert [r.step for r in rs] == list(range(1, 201))

    def test_zero_instance_reference_zero(self):
        inst = SpinGlassInstance(n=4, couplings=np.zeros(6), fields=np.zeros(4), seed=0)
        rows, _ = run_magnetization(
            inst,
            temperature=1.0,
            m_estimate=32,
            chains=2,
            steps=50,
            proposals=("uniform",),
            master_seed=1,
        )
        assert all(r.exact_m == pytest.approx(0.0, abs=1e-12) for r in rows)


class TestCsvRoundTrip:
    def test_records_round_trip(self, tmp_path):
        spec = small_spec(sizes=(3,), instances_per_size=2)
        records = run_spectral_sweep(spec)
        path = tmp_path / "records.csv"
        write_records(path, records, command="test")
        df = read_csv(path)
        assert len(df) == len(records)
        assert df["delta"].iloc[0] == pytest.approx(records[0].delta)

    def test_determinism_modulo_header_and_walltime(self, tmp_path):
        spec = small_spec(sizes=(3,), instances_per_size=2)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_records(p1, run_spectral_sweep(spec), command="test")
        write_records(p2, run_spectral_sweep(spec), command="test")

        def normalized(path):
            lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
            return ["," .join(l.split(",")[:-1]) for l in lines]  # drop wall_time column

        assert normalized(p1) == normalized(p2)


class TestCli:
    def test_gen_instance_byte_identical(self, tmp_path):
        r1 = run_cli("gen-instance", "--n", "5", "--seed", "7", "--out", str(tmp_path / "a"), cwd=tmp_path)
        r2 = run_cli("gen-instance", "--n", "5", "--seed", "7", "--out", str(tmp_path / "b"), cwd=tmp_path)
        assert r1.returncode == 0 and r2.returncode == 0
        f1 = tmp_path / "a" / "instance_n5_seed7.json"
        f2 = tmp_path / "b" / "instance_n5_seed7.json"
        assert f1.read_bytes() == f2.read_bytes()

    def test_run_chain_row_count_and_zero_steps_rejected(self, tmp_path):
        run_cli("gen-instance", "--n", "4", "--seed", "2", "--out", str(tmp_path), cwd=tmp_path)
        inst = tmp_path / "instance_n4_seed2.json"
        ok = run_cli(
            "run-chain", "--instance", str(inst), "--steps", "25", "--chains", "2",
            "--proposal", "uniform", "--seed", "1", "--out", str(tmp_path), cwd=tmp_path,
        )
        assert ok.returncode == 0
        df = read_csv(tmp_path / "chain.csv")
        assert len(df) == 50
        bad = run_cli(
            "run-chain", "--instance", str(inst), "--steps", "0", "--out", str(tmp_path), cwd=tmp_path
        )
        assert bad.returncode != 0

    def test_optimize_theta_json(self, tmp_path):
        run_cli("gen-instance", "--n", "4", "--seed", "2", "--out", str(tmp_path), cwd=tmp_path)
        inst = tmp_path / "instance_n4_seed2.json"
        res = run_cli(
            "optimize-theta", "--instance", str(inst), "--p", "5", "--mode", "exact",
            "--out", str(tmp_path), cwd=tmp_path,
        )
        assert res.returncode == 0
        payload = json.loads(res.stdout.strip().splitlines()[-1])
        assert set(payload) == {"theta_star", "ar", "evaluations", "boundary"}
        assert 0.0 < payload["theta_star"] <= 0.3

    def test_sweep_fit_win_pipeline(self, tmp_path):
        res = run_cli(
            "spectral-sweep", "--sizes", "3,4,5", "--instances", "3", "--seed", "3",
            "--grid-points", "24", "--out", str(tmp_path), cwd=tmp_path,
        )
        assert res.returncode == 0
        fit = run_cli("fit-scaling", "--in", str(tmp_path / "spectral_sweep.csv"), "--out", str(tmp_path), cwd=tmp_path)
        assert fit.returncode == 0
        assert (tmp_path / "scaling_fits.csv").exists()
        assert (tmp_path / "scaling_means.csv").exists()
        win = run_cli("win-fraction", "--in", str(tmp_path / "spectral_sweep.csv"), "--out", str(tmp_path), cwd=tmp_path)
        assert win.returncode == 0
        df = read_csv(tmp_path / "win_fraction.csv")
        assert set(df["n"]) == {3, 4, 5}

    def test_config_file_defaults(self, tmp_path):
        config = {"sizes": "3", "instances": 2, "temperature": 0.5, "grid_points": 16}
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        res = run_cli(
            "spectral-sweep", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path), cwd=tmp_path
        )
        assert res.returncode == 0
        df = read_csv(tmp_path / "spectral_sweep.csv")
        assert set(df["n"]) == {3}
        assert len(df) == 8
