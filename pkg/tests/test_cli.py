"""Sweep CSV contract, presets, validation harness, CLI exit codes."""

import io
from dataclasses import replace

import pytest

import fdnoma.analytic as analytic
from fdnoma.cli import main, run_sweep, validate
from fdnoma.presets import PRESET_NAMES, SweepSpec, figure_preset
from fdnoma.errors import ConfigError
from fdnoma.sysmodel import SystemConfig, dump_config, loads_config

BASE = SystemConfig()


def sweep_to_string(spec, cfg, **kw) -> str:
    buf = io.StringIO()
    run_sweep(spec, cfg, buf, **kw)
    return buf.getvalue()


class TestRunSweep:
    def test_single_point_exact_row_count(self):
        spec = SweepSpec(grid=(15.0,), methods=("exact",))
        text = sweep_to_string(spec, BASE)
        lines = text.strip().splitlines()
        assert len(lines) == 1 + BASE.n_users  # header + one row per user

    def test_row_order_and_columns(self):
        spec = SweepSpec(grid=(10.0, 20.0), methods=("monte_carlo", "exact"), trials=20_000)
        text = sweep_to_string(spec, BASE)
        lines = text.strip().splitlines()
        assert lines[0] == "axis_value,user,method,op,ci_low,ci_high,trials,wall_ms,error"
        # canonical order: exact before monte_carlo within each user
        first = lines[1].split(",")
        assert first[0] == "10" and first[1] == "1" and first[2] == "exact"
        assert lines[2].split(",")[2] == "monte_carlo"

    def test_ci_fields_only_for_simulation(self):
        spec = SweepSpec(grid=(10.0,), methods=("exact", "monte_carlo"), trials=20_000)
        for line in sweep_to_string(spec, BASE).strip().splitlines()[1:]:
            cells = line.split(",")
            if cells[2] == "exact":
                assert cells[4] == "" and cells[5] == "" and cells[6] == ""
            else:
                assert float(cells[4]) <= float(cells[3]) <= float(cells[5])
                assert cells[6] == "20000"

    def test_float_round_trip_precision(self):
        spec = SweepSpec(grid=(12.5,), methods=("exact",))
        line = sweep_to_string(spec, BASE).strip().splitlines()[1]
        op = float(line.split(",")[1 + 2])
        direct = analytic.exact_outage(BASE, 12.5, 1).value
        assert op == direct  # 17 significant digits survive the round trip

    def test_byte_identical_reruns(self):
        spec = SweepSpec(grid=(10.0, 15.0), methods=("exact", "monte_carlo"), trials=30_000)
        assert sweep_to_string(spec, BASE) == sweep_to_string(spec, BASE)

    def test_byte_identical_across_worker_counts(self):
        spec = SweepSpec(grid=(10.0,), methods=("monte_carlo",), trials=2_500_000)
        texts = {sweep_to_string(spec, BASE, workers=w) for w in (1, 4, 16)}
        assert len(texts) == 1

    def test_wall_ms_blank_without_timings(self):
        spec = SweepSpec(grid=(10.0,), methods=("exact",))
        for line in sweep_to_string(spec, BASE).strip().splitlines()[1:]:
            assert line.split(",")[7] == ""

    def test_wall_ms_populated_with_timings(self):
        spec = SweepSpec(grid=(10.0,), methods=("exact",))
        lines = sweep_to_string(spec, BASE, timings=True).strip().splitlines()[1:]
        assert all(line.split(",")[7] != "" for line in lines)

    def test_partial_failure_becomes_error_row(self):
        # mu sweep reaching mu values whose feasibility is fine but whose
        # method is invalid for the config: asymptotic_ideal rejects
        # practical impairments, so those cells carry the error column
        cfg = replace(BASE, sigma2_est_sr=0.01)
        spec = SweepSpec(grid=(10.0,), methods=("exact", "asymptotic_ideal"))
        lines = sweep_to_string(spec, cfg).strip().splitlines()[1:]
        by_method = {line.split(",")[2]: line for line in lines if line.split(",")[1] == "1"}
        assert by_method["exact"].split(",")[3] != ""
        err_cells = by_method["asymptotic_ideal"].split(",")
        assert err_cells[3] == "" and "impairments" in err_cells[8]

    def test_d_sr_axis_mirrors_user_distance(self):
        spec = SweepSpec(axis="d_sr", grid=(0.3, 0.5), methods=("exact",), snr_db=15.0)
        text = sweep_to_string(spec, BASE)
        assert len(text.strip().splitlines()) == 1 + 2 * BASE.n_users


class TestPresets:
    def test_unknown_preset_lists_available(self):
        with pytest.raises(ConfigError, match="fig3"):
            figure_preset("fig99")

    def test_variant_selection(self):
        (only,) = figure_preset("fig4:mu0.25")
        assert only.config.mu == 0.25

    def test_unknown_variant_lists_labels(self):
        with pytest.raises(ConfigError, match="mu0.25"):
            figure_preset("fig4:bogus")

    def test_fig3_parameters(self):
        variants = figure_preset("fig3")
        assert [v.config.n_b for v in variants] == [2, 3]
        for v in variants:
            assert v.config.mu == 1.0
            assert v.config.m_sr == v.config.m_rr == v.config.m_ru[0] == 1
            assert v.config.sigma2_est_sr == 0.0

    def test_fig6_parameters(self):
        for v in figure_preset("fig6"):
            assert v.config.sigma2_est_sr == 0.01
            assert v.config.sigma2_est_ru == (0.01,) * 3
            assert v.config.fd_tau_sr == 0.03
            assert v.config.mu == 0.25

    def test_fig9_protocol(self):
        (v,) = figure_preset("fig9")
        assert v.sweep.axis == "mu"
        assert v.sweep.snr_db == 15.0
        assert v.sweep.hd_rule == "equal"
        assert "hd_noma" in v.sweep.methods

    def test_fig10_impairment_on_examined_link(self):
        variants = {v.label: v for v in figure_preset("fig10")}
        sr = variants["sr_nb2"]
        assert sr.sweep.axis == "sigma2_est_sr" and sr.config.fd_tau_sr == 0.03
        assert sr.config.fd_tau_ru == (0.0,) * 3
        ru = variants["ru_nb2"]
        assert ru.sweep.axis == "sigma2_est_ru" and ru.config.fd_tau_ru == (0.03,) * 3
        assert ru.config.fd_tau_sr == 0.0

    def test_fig8_testbed_parameters(self):
        (v,) = figure_preset("fig8")
        assert v.config.a == (0.761, 0.191, 0.048)
        assert v.config.gamma_th == (2.0, 2.5, 3.0)
        assert v.config.m_sr == 0.98
        assert v.sweep.methods == ("monte_carlo",)

    def test_every_preset_config_round_trips(self):
        for name in PRESET_NAMES:
            for v in figure_preset(name):
                assert loads_config(dump_config(v.config)) == v.config

    def test_grids_strictly_increasing(self):
        for name in PRESET_NAMES:
            for v in figure_preset(name):
                g = v.sweep.grid
                assert all(a < b for a, b in zip(g, g[1:]))

    def test_fig4_outage_improves_with_si_cancellation(self):
        # across the fig4 curve families, OP is nondecreasing in mu at any
        # fixed point of the grid
        variants = figure_preset("fig4")
        for snr in (10.0, 25.0):
            for l in (1, 2, 3):
                ops = [analytic.exact_outage(v.config, snr, l).value for v in variants]
                assert all(a <= b + 1e-12 for a, b in zip(ops, ops[1:]))


class TestValidate:
    def test_passing_run(self):
        lines, ok = validate(BASE, (5.0, 10.0), trials=200_000, seed=1)
        assert ok
        assert all(line.status == "ok" for line in lines)

    def test_insufficient_trials_flagged_not_failed(self):
        # tiny outage at high SNR cannot be resolved with few trials
        lines, ok = validate(BASE, (40.0,), trials=10_000, seed=3)
        assert ok
        agreement = [l for l in lines if l.check == "mc_agreement" and l.user >= 2]
        assert any(l.status == "insufficient trials" for l in agreement)

    def test_corrupted_kappa_detected(self, monkeypatch):
        # fault injection: shrinking the W-CDF coefficients inflates the
        # bound above the exact outage, which the harness must flag
        monkeypatch.setattr(analytic, "_KAPPA_FAULT_SCALE", 0.95)
        lines, ok = validate(BASE, (25.0,), trials=50_000, seed=1)
        assert not ok
        assert any(l.check == "bound_ordering" and l.status == "fail" for l in lines)

    def test_slope_check_runs_on_wide_ideal_grid(self):
        lines, ok = validate(BASE, (25.0, 30.0, 35.0), trials=50_000, seed=3)
        assert any(l.check == "high_snr_slope" for l in lines)


class TestMainExitCodes:
    def test_usage_error_is_exit_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["analyze", "--bogus-flag"])
        assert exc.value.code == 1

    def test_unknown_preset_is_exit_2(self, capsys):
        assert main(["analyze", "--preset", "fig99", "--grid", "0:10:5"]) == 2

    def test_config_error_is_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("n_b = -3\n")
        assert main(["analyze", "--config", str(bad), "--grid", "0:10:5"]) == 2

    def test_analyze_runs_to_csv(self, tmp_path, capsys):
        out = tmp_path / "rows.csv"
        code = main([
            "analyze", "--grid", "10:20:10", "--methods", "exact,lower_bound",
            "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 2 * 3  # two points, two methods, three users

    def test_simulate_runs(self, tmp_path):
        out = tmp_path / "sim.csv"
        code = main([
            "simulate", "--grid", "10:10:5", "--trials", "20000", "--out", str(out),
        ])
        assert code == 0
        assert len(out.read_text().strip().splitlines()) == 4

    def test_preset_writes_variant_files(self, tmp_path):
        code = main([
            "preset", "fig4:mu0.25", "--out", str(tmp_path), "--trials", "20000",
        ])
        assert code == 0
        csvs = sorted(p.name for p in tmp_path.glob("*.csv"))
        assert csvs == ["fig4_mu0.25.csv"]
        cfg_files = sorted(p.name for p in tmp_path.glob("*.cfg"))
        assert cfg_files == ["fig4_mu0.25.cfg"]

    def test_validate_failure_is_exit_4(self, monkeypatch, capsys):
        monkeypatch.setattr(analytic, "_KAPPA_FAULT_SCALE", 0.95)
        code = main(["validate", "--grid", "25:25:5", "--trials", "50000"])
        assert code == 4

    def test_validate_pass_is_exit_0(self, capsys):
        code = main(["validate", "--grid", "10:10:5", "--trials", "100000"])
        assert code == 0
