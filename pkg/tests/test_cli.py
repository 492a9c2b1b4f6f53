"""CLI tests: exit codes, file formats, round-trips, determinism."""

import math
import subprocess
import sys

import numpy as np
import pytest

from combcool.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RATES,
    config_lines,
    main,
    parse_axis,
    parse_config_text,
    resolve_scenario,
)

from helpers import DESK_OMEGA_L, DESK_OMEGA_MOD


def run_cli(*argv) -> int:
    return main(list(argv))


# --- scenario resolution and configuration files -----------------------------


def test_list_scenarios(capsys):
    assert run_cli("list-scenarios") == EXIT_OK
    out = capsys.readouterr().out
    for name in ("fig3", "fig4", "fig5", "fig5sp", "fig6sin", "fig6cos", "fig6std"):
        assert name in out


def test_dump_config_round_trip_is_byte_identical(tmp_path):
    first = tmp_path / "a.cfg"
    second = tmp_path / "b.cfg"
    assert run_cli("run", "--scenario", "fig4", "--dump-config", str(first)) == EXIT_OK
    assert (
        run_cli("run", "--scenario", str(first), "--dump-config", str(second))
        == EXIT_OK
    )
    assert first.read_bytes() == second.read_bytes()


def test_dump_config_floats_survive_parsing(tmp_path):
    path = tmp_path / "c.cfg"
    run_cli("run", "--scenario", "fig4", "--dump-config", str(path))
    flat = parse_config_text(path.read_text(encoding="utf-8"))
    assert float(flat["train.T"]) == 14005.253930
    assert float(flat["train.tau"]) == 0.198
    assert flat["train.modulation.kind"] == "sine"
    assert flat["integrator.interpulse_phases"] == "true"


def test_config_text_supports_comments_and_blank_lines():
    flat = parse_config_text("# heading\n\ntrain.N = 7  # trailing comment\n")
    assert flat == {"train.N": "7"}
    with pytest.raises(ValueError):
        parse_config_text("not a key value line\n")


def test_unknown_override_key_is_a_config_error(tmp_path, capsys):
    code = run_cli(
        "run", "--scenario", "fig4", "--set", "integrator.bogus=1",
        "--out", str(tmp_path),
    )
    assert code == EXIT_CONFIG
    assert "unknown configuration key" in capsys.readouterr().err


def test_malformed_override_is_a_config_error(tmp_path):
    assert (
        run_cli("run", "--scenario", "fig4", "--set", "trainT", "--out", str(tmp_path))
        == EXIT_CONFIG
    )


def test_unknown_scenario_is_a_config_error(tmp_path):
    assert (
        run_cli("run", "--scenario", "fig9", "--out", str(tmp_path)) == EXIT_CONFIG
    )


def test_incomplete_config_file_is_rejected(tmp_path):
    partial = tmp_path / "partial.cfg"
    partial.write_text("train.N = 4\n", encoding="utf-8")
    assert run_cli("run", "--scenario", str(partial), "--out", str(tmp_path)) == EXIT_CONFIG


def test_overrides_change_resolved_values():
    resolved = resolve_scenario("fig4", ("train.N=7", "rates.gamma21=0.002"), "angular")
    assert resolved.tree["train"]["N"] == 7
    assert resolved.tree["rates"]["gamma21"] == 0.002
    lines = config_lines(resolved.tree)
    assert "train.N = 7" in lines


# --- run verb ------------------------------------------------------------------


def test_run_writes_timeseries_and_summary(tmp_path):
    out = tmp_path / "out"
    code = run_cli(
        "run", "--scenario", "fig4", "--set", "train.N=10",
        "--emit", "timeseries,summary", "--out", str(out),
    )
    assert code == EXIT_OK

    header, *rows = (out / "timeseries.csv").read_text(encoding="utf-8").splitlines()
    assert header == "t,rho11,rho22,rho33,re12,im12,re13,im13,re23,im23,trace"
    table = np.array([[float(x) for x in row.split(",")] for row in rows])
    assert table.shape[1] == 11
    np.testing.assert_allclose(table[:, -1], 1.0, atol=1e-6)  # trace column
    assert np.all(np.diff(table[:, 0]) > 0)  # strictly increasing time

    summary = (out / "summary.txt").read_text(encoding="utf-8")
    assert "scenario = fig4" in summary
    assert "yield = " in summary
    assert "max_rho22 = " in summary
    assert "transfer_pulse = " in summary
    assert "trace_max_drift = " in summary
    assert "# resolved configuration" in summary
    assert "train.N = 10" in summary


def test_noop_override_keeps_summary_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run_cli("run", "--scenario", "fig4", "--emit", "summary", "--out", str(out_a))
    run_cli(
        "run", "--scenario", "fig4", "--set", "rates.gamma21=0",
        "--emit", "summary", "--out", str(out_b),
    )
    assert (out_a / "summary.txt").read_bytes() == (out_b / "summary.txt").read_bytes()


def test_run_emits_plotdata(tmp_path):
    out = tmp_path / "out"
    code = run_cli(
        "run", "--scenario", "fig4", "--set", "train.N=5",
        "--emit", "plotdata", "--out", str(out),
    )
    assert code == EXIT_OK
    for name in ("rho11", "rho22", "rho33"):
        lines = (out / "plotdata" / f"{name}.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == f"t,{name}"
        assert len(lines) > 10
    stub = (out / "plotdata" / "plot.py").read_text(encoding="utf-8")
    assert "matplotlib" in stub


def test_run_rejects_unknown_emit_target(tmp_path):
    assert (
        run_cli("run", "--scenario", "fig4", "--emit", "movies", "--out", str(tmp_path))
        == EXIT_CONFIG
    )


def test_enforced_rate_violation_exits_with_code_4(tmp_path, capsys):
    code = run_cli(
        "run", "--scenario", "fig5", "--set", "rates.Gamma31=0.001",
        "--emit", "summary", "--out", str(tmp_path),
    )
    assert code == EXIT_RATES
    assert "rate relation" in capsys.readouterr().err


def test_warn_mode_runs_despite_violation(tmp_path, capsys):
    code = run_cli(
        "run", "--scenario", "fig4", "--set", "rates.Gamma31=0.001",
        "--set", "train.N=5", "--rates-mode", "warn",
        "--emit", "summary", "--out", str(tmp_path),
    )
    assert code == EXIT_OK
    assert "warning" in capsys.readouterr().err
    assert (tmp_path / "summary.txt").exists()


def test_float_17g_round_trip(tmp_path):
    out = tmp_path / "out"
    run_cli(
        "run", "--scenario", "fig4", "--set", "train.N=5",
        "--emit", "timeseries", "--out", str(out),
    )
    rows = (out / "timeseries.csv").read_text(encoding="utf-8").splitlines()[1:]
    for row in rows[:50]:
        for token in row.split(","):
            value = float(token)
            assert format(value, ".17g") == token


# --- sweep verb ------------------------------------------------------------------


def test_axis_parsing():
    axis = parse_axis("train.N=2,4,8")
    assert axis.keys == ("train.N",)
    assert axis.values == ("2", "4", "8")

    joint = parse_axis("rates.gamma21+rates.gamma23=linspace(0,0.002,3)")
    assert joint.keys == ("rates.gamma21", "rates.gamma23")
    assert len(joint.values) == 3
    assert float(joint.values[1]) == pytest.approx(0.001)

    with pytest.raises(ValueError):
        parse_axis("no-equals-sign")
    with pytest.raises(ValueError):
        parse_axis("train.N=linspace(1,2)")


def test_single_point_sweep_matches_run(tmp_path):
    out = tmp_path / "out"
    code = run_cli(
        "sweep", "--scenario", "fig4", "--axis1", "train.modulation.amplitude=4",
        "--out", str(out),
    )
    assert code == EXIT_OK
    header, row = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()
    assert header == "train.modulation.amplitude,final_yield,trace_max_drift,error"
    cells = row.split(",")
    assert cells[0] == "4"
    assert float(cells[1]) == pytest.approx(0.973591, abs=1e-4)
    assert cells[3] == ""


def test_sweep_orders_grid_and_reports_errors_per_row(tmp_path):
    out = tmp_path / "out"
    code = run_cli(
        "sweep", "--scenario", "fig6sin",
        "--axis1", "train.modulation.amplitude=0,4",
        "--axis2", "rates.Gamma31=0,0.001",
        "--objective", "steady_yield",
        "--out", str(out),
    )
    assert code == EXIT_OK
    lines = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 5
    grid = [line.split(",")[:2] for line in lines[1:]]
    assert grid == [["0", "0"], ["0", "0.001"], ["4", "0"], ["4", "0.001"]]
    for line in lines[1:]:
        cells = line.split(",")
        if cells[1] == "0.001":  # violated relation -> error recorded, not fatal
            assert cells[2] == "nan"
            assert "RateRelationViolation" in cells[4]
        else:
            assert math.isfinite(float(cells[2]))
            assert cells[4] == ""


def test_sweep_is_deterministic_across_worker_counts(tmp_path, monkeypatch):
    out_serial = tmp_path / "serial"
    out_pool = tmp_path / "pool"
    monkeypatch.setenv("COMB_LAMBDA_THREADS", "1")
    run_cli(
        "sweep", "--scenario", "fig4",
        "--axis1", "train.modulation.amplitude=0,2,4", "--out", str(out_serial),
    )
    monkeypatch.setenv("COMB_LAMBDA_THREADS", "3")
    run_cli(
        "sweep", "--scenario", "fig4",
        "--axis1", "train.modulation.amplitude=0,2,4", "--out", str(out_pool),
    )
    assert (out_serial / "sweep.csv").read_bytes() == (out_pool / "sweep.csv").read_bytes()


def test_chirp_outperforms_plain_comb_in_sweep(tmp_path):
    out = tmp_path / "out"
    run_cli(
        "sweep", "--scenario", "fig4",
        "--axis1", "train.modulation.amplitude=0,4", "--out", str(out),
    )
    lines = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()[1:]
    yields = {line.split(",")[0]: float(line.split(",")[1]) for line in lines}
    assert yields["4"] > 0.95
    assert yields["0"] < 0.5


def test_sweep_grid_cap(tmp_path):
    code = run_cli(
        "sweep", "--scenario", "fig4",
        "--axis1", "train.N=linspace(1,100,101)",
        "--axis2", "train.phi=linspace(0,6,101)",
        "--out", str(tmp_path),
    )
    assert code == EXIT_CONFIG


def test_invalid_threads_env_is_config_error(tmp_path, monkeypatch):
    monkeypatch.setenv("COMB_LAMBDA_THREADS", "many")
    code = run_cli(
        "sweep", "--scenario", "fig4",
        "--axis1", "train.modulation.amplitude=0,4", "--out", str(tmp_path),
    )
    assert code == EXIT_CONFIG


# --- spectrum verb ----------------------------------------------------------------


DESK_SETTINGS = (
    "--set", "train.T=40",
    "--set", f"train.omega_L={DESK_OMEGA_L!r}",
    "--set", f"train.modulation.frequency={DESK_OMEGA_MOD!r}",
    "--set", "train.tau=0.7",
    "--set", "train.modulation.amplitude=2",
)


def test_spectrum_verb_verifies_desk_scale_comb(tmp_path, capsys):
    out = tmp_path / "out"
    code = run_cli(
        "spectrum", "--scenario", "fig4", *DESK_SETTINGS,
        "--threshold", "0.02", "--out", str(out),
    )
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "passed = true" in printed
    structure = (out / "structure.txt").read_text(encoding="utf-8")
    assert "mode_spacing" in structure and "set_spacing" in structure

    header, *rows = (out / "spectrum.csv").read_text(encoding="utf-8").splitlines()
    assert header == "omega,intensity"
    assert len(rows) > 1000


def test_spectrum_verb_refuses_oversized_synthesis(tmp_path, capsys):
    code = run_cli("spectrum", "--scenario", "fig4", "--out", str(tmp_path))
    assert code == EXIT_CONFIG
    assert "desk-scale" in capsys.readouterr().err


# --- validate-rates verb ------------------------------------------------------------


def test_validate_rates_verb(capsys):
    assert run_cli("validate-rates", "--Gamma21", "0.001", "--Gamma23", "0.001") == EXIT_OK
    assert (
        run_cli(
            "validate-rates", "--Gamma21", "0.001", "--Gamma31", "0.001",
            "--Gamma23", "0.002",
        )
        == EXIT_OK
    )
    code = run_cli(
        "validate-rates", "--Gamma21", "0.001", "--Gamma31", "0.001",
        "--Gamma23", "0.001",
    )
    assert code == EXIT_RATES
    out = capsys.readouterr().out
    assert "deviation" in out


def test_validate_rates_verb_scenario_and_modes(capsys):
    assert run_cli("validate-rates", "--scenario", "fig6cos") == EXIT_OK
    code = run_cli(
        "validate-rates", "--Gamma21", "0.001", "--Gamma31", "0.001",
        "--Gamma23", "0.001", "--mode", "warn",
    )
    assert code == EXIT_OK
    assert "warning" in capsys.readouterr().err
    assert (
        run_cli("validate-rates", "--scenario", "fig5", "--set", "rates.Gamma31=0.5")
        == EXIT_RATES
    )


# --- calibrate verb ------------------------------------------------------------------


def test_calibrate_quick_verb(tmp_path, capsys):
    code = run_cli("calibrate-fig4", "--quick", "--out", str(tmp_path))
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    values = dict(
        line.split(" = ") for line in printed.strip().splitlines() if " = " in line
    )
    assert abs(float(values["period"]) - 14005.253930) < 0.005
    assert float(values["final_yield"]) > 0.95
    header = (tmp_path / "calibration.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "tau,period,peak_yield,peak_pulse,transfer_pulse"


# --- module execution ------------------------------------------------------------------


def test_python_dash_m_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "combcool", "list-scenarios"],
        capture_output=True,
        text=True,
        cwd=str(tmp_path),
    )
    assert proc.returncode == 0
    assert "fig6cos" in proc.stdout
