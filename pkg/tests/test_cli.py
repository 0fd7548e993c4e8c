from __future__ import annotations

import csv
import json

import pytest

from potts_ees import cli, kernels
from potts_ees.kernels import LumpedKernel
from potts_ees.output import fmt, manifest_path


def _rows(path):
    with path.open(encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def _csv_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("POTTS_EES_THREADS", "POTTS_EES_OUT", "POTTS_EES_SEED", "POTTS_EES_LOG_LEVEL",
                 "POTTS_EES_EXPORT_KERNELS"):
        monkeypatch.delenv(name, raising=False)


def test_fmt_uses_17_significant_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"
    assert fmt(True) == "true"
    assert fmt(None) == ""


def test_selftest_single_check_passes(out_dir, capsys):
    assert cli.main(["selftest", "--only", "row_stochasticity", "--out", str(out_dir)]) == 0
    assert "row_stochasticity: ok" in capsys.readouterr().err


def test_selftest_band_locality_passes(out_dir, capsys):
    assert cli.main(["selftest", "--only", "band_locality", "--out", str(out_dir)]) == 0
    assert "band_locality: ok" in capsys.readouterr().err


def test_selftest_names_a_corrupted_kernel(out_dir, capsys, monkeypatch):
    original = kernels.metropolis_kernel

    def corrupted(lattice, beta):
        k = original(lattice, beta)
        return LumpedKernel(lattice, k.matrix * 0.9, k.kind, beta=beta, reversible_beta=beta)

    monkeypatch.setattr(kernels, "metropolis_kernel", corrupted)
    assert cli.main(["selftest", "--only", "row_stochasticity", "--out", str(out_dir)]) == 1
    err = capsys.readouterr().err
    assert "selftest FAILED: row_stochasticity" in err


@pytest.mark.slow
def test_full_selftest_passes(out_dir):
    assert cli.main(["selftest", "--out", str(out_dir)]) == 0


def test_invalid_config_exits_2(out_dir, tmp_path):
    assert cli.main(["landscape", "--epsilon", "0.1", "--delta", "0.2", "--out", str(out_dir)]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("colour = 4\n", encoding="utf-8")
    assert cli.main(["landscape", "--config", str(bad), "--out", str(out_dir)]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["landscape", "--record", "sometimes"])
    assert info.value.code == 2


def test_stationary_outputs_are_byte_identical(tmp_path):
    args = ["stationary", "--n", "4", "6", "--beta", "0", "2.9", "--out"]
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.main(args + [str(first)]) == 0
    assert cli.main(args + [str(second), "--threads", "2"]) == 0
    assert _csv_bytes(first) == _csv_bytes(second)
    summary = _rows(first / "stationary_summary.csv")
    assert [(r["N"], r["beta"]) for r in summary] == [("4", "0"), ("4", "2.8999999999999999"),
                                                      ("6", "0"), ("6", "2.8999999999999999")]
    assert all(float(r["oracle_tv"]) < 1e-12 for r in summary)
    manifest = json.loads(manifest_path(first / "stationary_summary.csv").read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "stationary"
    assert manifest["config"]["n_values"] == [4, 6]
    assert "git_describe" in manifest and "timestamp" not in manifest


def test_stationary_reports_two_color_contrast(out_dir):
    assert cli.main(["stationary", "--q", "2", "--n", "50", "--beta", "2.5", "--out", str(out_dir)]) == 0
    (row,) = _rows(out_dir / "stationary_summary.csv")
    assert row["balanced_counts"] == "25-25"
    assert row["balanced_strict_min"] == "true"


def test_landscape(out_dir):
    assert cli.main(["landscape", "--beta", "2.9", "3", "--out", str(out_dir)]) == 0
    report = json.loads((out_dir / "maxima_beta2.9.json").read_text(encoding="utf-8"))
    assert len(report["maxima"]) == 4
    assert report["center_status"] == "maximum"
    assert 0 < report["basin_radius_a0"] < 0.3
    degenerate = json.loads((out_dir / "maxima_beta3.json").read_text(encoding="utf-8"))
    assert degenerate["center_status"] == "degenerate"
    assert degenerate["h2_a0_axis"] == 0.0
    assert (out_dir / "landscape_beta2.9.csv").exists()
    assert manifest_path(out_dir / "landscape_beta2.9.csv").exists()


def test_gap_rows_satisfy_cheeger(out_dir):
    argv = ["gap", "--n", "4", "6", "--beta", "2.0", "2.9", "--export-kernels", "--out", str(out_dir)]
    assert cli.main(argv) == 0
    rows = _rows(out_dir / "gap.csv")
    assert len(rows) == 4
    for r in rows:
        assert float(r["gap"]) <= 2 * float(r["phi_family"]) + 1e-12
        assert r["upper_ok"] == "true"
    assert r["lower_ok"] == ""  # N=6 has too many classes for the exhaustive minimum
    kernel = _rows(out_dir / "kernel_metropolis_N4_beta2.csv")
    assert list(kernel[0]) == ["row_index", "col_index", "probability"]
    sidecar = manifest_path(out_dir / "kernel_metropolis_N4_beta2.csv")
    manifest = json.loads(sidecar.read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "gap"
    assert (manifest["N"], manifest["beta"]) == (4, 2.0)
    assert manifest["config"]["n_values"] == [4, 6]


def test_conductance(out_dir):
    argv = ["conductance", "--n", "30", "36", "42", "48", "--beta", "2.0", "--out", str(out_dir)]
    assert cli.main(argv) == 0
    rows = _rows(out_dir / "conductance.csv")
    assert list(rows[0]) == ["N", "beta", "r", "phi", "pi_S", "gap"]
    assert all(float(r["r"]) <= 0.3 + 1e-12 for r in rows)
    ratios = _rows(out_dir / "ball_ratio.csv")
    assert [r["N"] for r in ratios] == ["30", "36", "42", "48"]
    fits = json.loads((out_dir / "fits.json").read_text(encoding="utf-8"))
    assert "ball_ratio_beta2" in fits
    report = json.loads((out_dir / "conductance_N36_beta2.json").read_text(encoding="utf-8"))
    assert (report["N"], report["beta"], report["center"]) == (36, 2.0, "a0")
    assert report["rows"] and all(r["N"] == 36 for r in report["rows"])
    assert [r["r"] for r in report["rows"]] == sorted(r["r"] for r in report["rows"])
    assert set(report["fits"]) == set(fits)
    assert manifest_path(out_dir / "conductance_N36_beta2.json").exists()


def test_escape(out_dir):
    argv = ["escape", "--n", "6", "12", "--beta", "2.0", "--seeds", "0", "1", "--record", "both",
            "--max-sweeps", "200", "--sweeps", "500", "--out", str(out_dir)]
    assert cli.main(argv) == 0
    runs = _rows(out_dir / "escape_runs.csv")
    assert len(runs) == 8
    assert {r["mode"] for r in runs} == {"m0", "live"}
    summary = _rows(out_dir / "escape_summary.csv")
    assert len(summary) == 4
    assert summary[1]["doubling_ratio"] != "" or summary[1]["median"] == "inf"
    fit = json.loads((out_dir / "escape_fit.json").read_text(encoding="utf-8"))
    assert set(fit["autocorrelation"]) == {"2"}
    assert (out_dir / "autocorrelation.csv").exists()


def test_escape_is_reproducible(tmp_path):
    argv = ["escape", "--n", "6", "--beta", "2.9", "--seeds", "0", "1", "2",
            "--max-sweeps", "100", "--sweeps", "200", "--seed", "5", "--out"]
    assert cli.main(argv + [str(tmp_path / "a")]) == 0
    assert cli.main(argv + [str(tmp_path / "b"), "--threads", "3"]) == 0
    assert _csv_bytes(tmp_path / "a") == _csv_bytes(tmp_path / "b")


def test_simulate_writes_strided_trajectories(tmp_path):
    argv = ["simulate", "--n", "12", "--beta", "2.9", "--sweeps", "95", "--stride", "10",
            "--seeds", "0", "1", "--out"]
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.main(argv + [str(first)]) == 0
    assert cli.main(argv + [str(second), "--threads", "2"]) == 0
    assert _csv_bytes(first) == _csv_bytes(second)
    path = first / "trajectory_N12_beta2.9_m0_seed0.csv"
    with path.open(encoding="utf-8", newline="") as f:
        header = next(csv.reader(f))
    assert header == ["sweep", "m1", "m2", "m3", "energy", "dist_a0"]
    rows = _rows(path)
    assert len(rows) == 95 // 10 + 1
    assert [int(r["sweep"]) for r in rows] == list(range(0, 91, 10))
    assert float(rows[0]["dist_a0"]) == 0.0
    assert all(2.0 <= float(r["energy"]) <= 6.0 for r in rows)
    assert (first / "trajectory_N12_beta2.9_m0_seed1.csv").exists()
    manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "simulate"
    assert manifest["config"]["stride"] == 10
    assert (manifest["N"], manifest["mode"], manifest["run_seed"]) == (12, "m0", 0)
