import json
import subprocess
import sys
from pathlib import Path

import pytest

from entshape.harness.claims import CLAIMS, claim
from entshape.harness.config import (
    ConfigError,
    build_config,
    load_config_file,
    parse_value,
)
from entshape.harness.experiments import (
    calibrate_p_prime,
    input_pair_state,
    run,
)
from entshape.harness.report import discrepancy_entry, discrepancy_report, render_report


def cli(*args, env=None):
    import os

    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(
        [sys.executable, "-m", "entshape", *args],
        capture_output=True,
        text=True,
        env=full_env,
    )


def strip_wall_clock(path: Path) -> str:
    return "\n".join(
        line for line in path.read_text().splitlines() if "wall_clock" not in line
    )


class TestConfig:
    def test_parse_values(self):
        assert parse_value("p", "0.3") == 0.3
        assert parse_value("run_count", "100") == 100
        assert parse_value("quiet", "true") is True
        assert parse_value("convention", "oracle") == "oracle"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            parse_value("bogus", "1")

    def test_config_file_roundtrip(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("# comment\np = 0.25\nrun_count = 500  # inline\nconvention = paper\n")
        overrides = load_config_file(path)
        assert overrides == {"p": 0.25, "run_count": 500, "convention": "paper"}

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("p 0.25\n")
        with pytest.raises(ConfigError, match="key = value"):
            load_config_file(path)

    def test_validation_catches_ranges(self):
        with pytest.raises(ConfigError):
            build_config("table1", {"convention": "oracle", "p": 0.9})
        with pytest.raises(ConfigError):
            build_config("table1", {"convention": "oracle", "n_pairs": 3})
        with pytest.raises(ConfigError):
            build_config("table1", {"convention": "oracle", "rounds": 5})
        with pytest.raises(ConfigError):
            build_config("bogus", {})

    def test_convention_must_be_explicit(self):
        with pytest.raises(ConfigError, match="explicitly"):
            build_config("table1", {})
        build_config("selfcheck", {})  # selfcheck needs no convention

    def test_worker_resolution(self, monkeypatch):
        cfg = build_config("selfcheck", {"workers": 3})
        assert cfg.resolved_workers() == 3
        cfg = build_config("selfcheck", {})
        monkeypatch.setenv("ENTSHAPE_WORKERS", "5")
        assert cfg.resolved_workers() == 5
        monkeypatch.setenv("ENTSHAPE_WORKERS", "zero")
        with pytest.raises(ConfigError):
            cfg.resolved_workers()


class TestConventions:
    def test_oracle_one_sided(self):
        state = input_pair_state("oracle", "one", 0.2)
        assert state.coefficients == pytest.approx((0.8, 0.2 / 3, 0.2 / 3, 0.2 / 3), abs=1e-12)

    def test_paper_one_sided(self):
        state = input_pair_state("paper", "one", 0.2)
        assert state.fidelity == pytest.approx(0.85, abs=1e-12)

    def test_two_sided_composition(self):
        one = input_pair_state("oracle", "one", 0.2)
        two = input_pair_state("oracle", "two", 0.2)
        assert two.fidelity < one.fidelity

    def test_calibration_known_solutions(self):
        # Bisection targets cross-checked against direct formula inversions.
        paper = calibrate_p_prime(0.187, "paper", "one", 0.2)
        assert paper["p_prime"] == pytest.approx(0.5022, abs=1e-3)
        assert not paper["feasible"]
        oracle_one = calibrate_p_prime(0.187, "oracle", "one", 0.2)
        assert oracle_one["p_prime"] == pytest.approx(0.2511, abs=1e-3)
        assert not oracle_one["feasible"]
        oracle_two = calibrate_p_prime(0.187, "oracle", "two", 0.2)
        assert oracle_two["p_prime"] == pytest.approx(0.1383, abs=1e-3)
        assert oracle_two["feasible"]
        assert oracle_two["achieved_er"] == pytest.approx(0.187, abs=1e-9)


class TestReport:
    def test_reproduced_by_std_rule(self):
        entry = discrepancy_entry(claim("table1_success"), 0.33, "test")
        assert entry["status"] == "reproduced"  # |0.33 - 0.31| <= 3 * 0.02
        entry = discrepancy_entry(claim("table1_success"), 0.40, "test")
        assert entry["status"] == "discrepant"

    def test_relative_window_for_bare_claims(self):
        entry = discrepancy_entry(claim("h2_0915"), 0.456, "test")
        assert entry["status"] == "reproduced"
        entry = discrepancy_entry(claim("h2_0915"), 0.4196, "test")
        assert entry["status"] == "discrepant"
        assert entry["absolute_gap"] == pytest.approx(0.0364, abs=1e-4)

    def test_zero_claim_has_no_relative_gap(self):
        entry = discrepancy_entry(claim("dd_limit"), 0.2, "test")
        assert entry["status"] == "discrepant"
        assert entry["absolute_gap"] == pytest.approx(0.2, abs=1e-12)
        assert entry["relative_gap"] is None
        assert "relative" not in render_report("x", [entry]).split("gap:")[1].splitlines()[0]

    def test_render_contains_all_entries(self):
        entries = [
            discrepancy_entry(claim("h2_0915"), 0.4196, "direct"),
            discrepancy_entry(claim("table1_success"), 0.33, "exact tree"),
        ]
        text = render_report("table1", entries)
        assert "h2_0915" in text and "table1_success" in text
        assert "[DISCREPANT]" in text and "[REPRODUCED]" in text

    def test_registry_has_mandatory_entries(self):
        for key in ("h2_0915", "hashing_rate_p02", "eb_threshold", "dd_limit"):
            assert key in CLAIMS

    def test_merged_report_deduplicates(self, tmp_path):
        cfg = build_config(
            "table1",
            {"convention": "oracle", "sides": "one", "out_dir": str(tmp_path),
             "run_count": 500, "workers": 1},
        )
        result = run(cfg)
        merged = discrepancy_report([result, result])
        assert merged.count("[DISCREPANT] h2_0915") == 1
        with pytest.raises(ValueError):
            discrepancy_report([])


class TestExperiments:
    def test_table1_writes_report_with_mandatory_entries(self, tmp_path):
        cfg = build_config(
            "table1",
            {
                "convention": "both",
                "out_dir": str(tmp_path),
                "run_count": 2000,
                "workers": 1,
            },
        )
        result = run(cfg)
        assert result.ok
        report = (tmp_path / "table1_discrepancy_report.txt").read_text()
        for key in ("h2_0915", "hashing_rate_p02", "eb_threshold", "dd_limit"):
            assert key in report
        doc = json.loads((tmp_path / "table1_result.json").read_text())
        assert doc["experiment"] == "table1"
        claim_keys = {d["claim"] for d in doc["discrepancies"]}
        assert {"table1_success", "table1_er_global", "pes_calibration"} <= claim_keys

    def test_every_claim_check_has_single_status(self, tmp_path):
        cfg = build_config(
            "table1",
            {"convention": "both", "out_dir": str(tmp_path), "run_count": 1000, "workers": 1},
        )
        result = run(cfg)
        for entry in result.discrepancies:
            assert entry["status"] in ("reproduced", "discrepant")

    def test_flow_round_trip(self, tmp_path):
        cfg = build_config(
            "flow",
            {"convention": "oracle", "sides": "one", "out_dir": str(tmp_path), "t_step": 0.1},
        )
        result = run(cfg)
        assert result.ok
        csv_path = tmp_path / "post_trajectory.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "t,fidelity,er_bits,mixedness"
        first = [float(x) for x in lines[1].split(",")]
        assert first[0] == 0.0
        # repr round-trip: parsing reproduces the in-memory samples exactly
        from entshape.dynamics import trajectory

        post, _ = trajectory(cfg.p, 0.17, 1.0, cfg.t_total, cfg.t_step)
        for line, sample in zip(lines[1:], post.samples):
            parsed = tuple(float(x) for x in line.split(","))
            assert parsed == sample

    def test_flow_points_ordering(self, tmp_path):
        cfg = build_config(
            "flow",
            {"convention": "oracle", "sides": "one", "out_dir": str(tmp_path)},
        )
        result = run(cfg)
        points = {r["name"]: r for r in result.rows}
        assert points["pes_endpoint"]["er_bits"] >= points["post_global_average"]["er_bits"]
        assert points["pes_endpoint"]["mixedness"] <= points["post_global_average"]["mixedness"]

    def test_sweep_csv(self, tmp_path):
        cfg = build_config(
            "sweep",
            {"convention": "oracle", "sides": "one", "out_dir": str(tmp_path), "sweep_count": 3},
        )
        result = run(cfg)
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0].startswith("p,convention,sides")
        assert len(lines) == 1 + 3

    def test_er_experiment(self, tmp_path):
        cfg = build_config(
            "er",
            {"convention": "oracle", "er_state": "werner", "er_param": 0.83, "out_dir": str(tmp_path)},
        )
        result = run(cfg)
        row = result.rows[0]
        assert row["er_numeric"] == pytest.approx(row["er_closed_form"], abs=5e-3)

    def test_selfcheck_passes(self, tmp_path):
        cfg = build_config("selfcheck", {"out_dir": str(tmp_path), "run_count": 2000})
        result = run(cfg)
        assert result.ok
        assert all(row["ok"] for row in result.rows)


class TestCLI:
    def test_check_exit_zero(self, tmp_path):
        proc = cli("check", "--out", str(tmp_path), "--runs", "1500", "--quiet")
        assert proc.returncode == 0, proc.stderr

    def test_missing_convention_exits_two(self, tmp_path):
        proc = cli("table1", "--out", str(tmp_path))
        assert proc.returncode == 2
        assert "convention" in proc.stderr

    def test_unwritable_output_exits_three(self):
        proc = cli(
            "er",
            "--convention",
            "oracle",
            "--out",
            "/proc/entshape_cannot_write_here",
            "--quiet",
        )
        assert proc.returncode == 3, (proc.returncode, proc.stderr)

    def test_table1_determinism(self, tmp_path):
        out = tmp_path / "out"
        args = (
            "table1", "--convention", "both", "--seed", "424242",
            "--runs", "3000", "--out", str(out), "--workers", "1", "--quiet",
        )
        proc = cli(*args)
        assert proc.returncode == 0, proc.stderr
        first = strip_wall_clock(out / "table1_result.json")
        (out / "table1_result.json").rename(out / "first.json")
        proc = cli(*args)
        assert proc.returncode == 0
        second = strip_wall_clock(out / "table1_result.json")
        assert first == second

    def test_serial_matches_workers(self, tmp_path):
        out_serial = tmp_path / "serial"
        out_parallel = tmp_path / "parallel"
        base = ("table1", "--convention", "oracle", "--sides", "one",
                "--seed", "31337", "--runs", "4000", "--quiet")
        proc = cli(*base, "--out", str(out_serial), "--workers", "1")
        assert proc.returncode == 0, proc.stderr
        proc = cli(*base, "--out", str(out_parallel), env={"ENTSHAPE_WORKERS": "8"})
        assert proc.returncode == 0, proc.stderr
        a = json.loads((out_serial / "table1_result.json").read_text())
        b = json.loads((out_parallel / "table1_result.json").read_text())
        assert a["rows"] == b["rows"]
        assert a["discrepancies"] == b["discrepancies"]

    def test_er_cli(self, tmp_path):
        proc = cli(
            "er", "--convention", "oracle", "--state", "werner",
            "--param", "0.9", "--out", str(tmp_path),
        )
        assert proc.returncode == 0, proc.stderr
        assert "er_numeric" in proc.stdout
