"""End-to-end tests of the command-line interface."""

import csv
import io
import json

import numpy as np
import pytest
import yaml

from mixedres.cli import main

SWEEP_CFG = {
    "m": 2,
    "bits": 4,
    "n_a_max": 3,
    "sigma2": [0.2, 1.0, 2.5],
    "dither": {"mode": "quantized-only", "grid_max": 1.0, "grid_step": 0.5},
    "seed": 3,
}


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return str(path)


def _read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestMseCommand:
    CFG = {
        "scenario": "scalar",
        "sigma2_grid": [0.5, 1.0],
        "allocations": [[1, 0], [0, 1]],
        "seed": 7,
    }

    def test_analytic_table(self, tmp_path, capsys):
        cfg = _write(tmp_path, "mse.yaml", self.CFG)
        assert main(["mse", "--config", cfg]) == 0
        out = capsys.readouterr().out
        rows = _read_csv(out)
        assert list(rows[0]) == ["sigma2", "n_a", "n_q", "mse_analytic"]
        assert len(rows) == 4
        by_key = {(r["sigma2"], r["n_a"], r["n_q"]): float(r["mse_analytic"]) for r in rows}
        assert by_key[("1", "1", "0")] == 0.5
        assert by_key[("1", "0", "1")] == pytest.approx(1 - 1 / np.pi, abs=1e-15)

    def test_empirical_columns(self, tmp_path, capsys):
        cfg = dict(self.CFG)
        cfg["empirical"] = {"trials": 4000}
        path = _write(tmp_path, "mse.yaml", cfg)
        assert main(["mse", "--config", path, "--empirical"]) == 0
        rows = _read_csv(capsys.readouterr().out)
        assert set(rows[0]) >= {"mse_empirical", "std_error"}
        for row in rows:
            gap = abs(float(row["mse_empirical"]) - float(row["mse_analytic"]))
            assert gap <= 5 * float(row["std_error"])

    def test_full_precision_round_trip(self, tmp_path, capsys):
        from mixedres.closed_form import mse_pure_quantized

        cfg = _write(tmp_path, "mse.yaml", self.CFG)
        main(["mse", "--config", cfg])
        value = _read_csv(capsys.readouterr().out)[1]["mse_analytic"]
        # 17 significant digits reproduce the double bit for bit.
        assert float(value) == mse_pure_quantized(1, 1, 1.0, 0.5)

    def test_deterministic_output(self, tmp_path, capsys):
        cfg = dict(self.CFG)
        cfg["empirical"] = {"trials": 2000}
        path = _write(tmp_path, "mse.yaml", cfg)
        main(["mse", "--config", path, "--empirical"])
        first = capsys.readouterr().out
        main(["mse", "--config", path, "--empirical"])
        assert capsys.readouterr().out == first

    def test_output_file_lf_endings(self, tmp_path):
        cfg = _write(tmp_path, "mse.yaml", self.CFG)
        out = tmp_path / "table.csv"
        assert main(["mse", "--config", cfg, "--output", str(out)]) == 0
        data = out.read_bytes()
        assert b"\r" not in data
        assert data.decode("utf-8").startswith("sigma2,")

    def test_malformed_config_names_key(self, tmp_path, capsys):
        path = _write(tmp_path, "mse.yaml", {**self.CFG, "sigmas": [1.0]})
        assert main(["mse", "--config", path]) == 2
        assert "sigmas" in capsys.readouterr().err

    def test_missing_required_key(self, tmp_path, capsys):
        path = _write(tmp_path, "mse.yaml", {"scenario": "scalar", "allocations": [[1, 0]]})
        assert main(["mse", "--config", path]) == 2
        assert "sigma2_grid" in capsys.readouterr().err


class TestAllocateCommand:
    def test_sweep_table_columns(self, tmp_path, capsys):
        path = _write(tmp_path, "alloc.yaml", SWEEP_CFG)
        assert main(["allocate", "--config", path]) == 0
        rows = _read_csv(capsys.readouterr().out)
        assert len(rows) == 3
        assert set(rows[0]) >= {
            "sigma2", "mse_all_analog", "mse_all_quantized", "mse_optimal",
            "mse_optimal_dithered", "n_a_star", "n_q_star", "sigma_d2_star",
        }
        for row in rows:
            assert float(row["mse_optimal_dithered"]) <= float(row["mse_optimal"]) + 1e-15

    def test_single_budget_json_with_trace(self, tmp_path, capsys):
        cfg = {"m": 2, "bits": 3, "p_max_norm": 100.0, "sigma2": 0.9}
        path = _write(tmp_path, "alloc.yaml", cfg)
        assert main(["allocate", "--config", path]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert {"n_a_star", "n_q_star", "sigma_d2_star", "mse_star", "trace"} <= set(payload)
        assert len(payload["trace"]) == 100 // (2**3 * 2) + 1

    def test_oracle_flag_reports_deviation(self, tmp_path, capsys):
        cfg = {"m": 2, "bits": 3, "p_max_norm": 100.0, "sigma2": 0.9}
        path = _write(tmp_path, "alloc.yaml", cfg)
        assert main(["allocate", "--config", path, "--oracle"]) == 0
        captured = capsys.readouterr()
        payload = json.loads(captured.out)
        assert payload["oracle_deviation"] <= 1e-12
        assert "oracle deviation" in captured.err

    def test_infeasible_budget_warns(self, tmp_path, capsys):
        cfg = {"m": 8, "bits": 4, "p_max_norm": 10.0, "sigma2": 1.0}
        path = _write(tmp_path, "alloc.yaml", cfg)
        assert main(["allocate", "--config", path]) == 0
        captured = capsys.readouterr()
        payload = json.loads(captured.out)
        assert (payload["n_a_star"], payload["n_q_star"]) == (0, 0)
        assert payload["mse_star"] == 8.0
        assert "infeasible" in captured.err

    def test_oracle_too_large_exits_numerical(self, tmp_path, capsys):
        cfg = {"m": 10, "bits": 6, "n_a_max": 20, "sigma2": 1.0}
        path = _write(tmp_path, "alloc.yaml", cfg)
        assert main(["allocate", "--config", path, "--oracle"]) == 3
        assert "error" in capsys.readouterr().err


class TestDitherCommand:
    def test_requires_dither_block(self, tmp_path, capsys):
        cfg = {"m": 2, "bits": 3, "p_max_norm": 60.0, "sigma2": 1.0}
        path = _write(tmp_path, "dither.yaml", cfg)
        assert main(["dither", "--config", path]) == 2
        assert "dither" in capsys.readouterr().err

    def test_json_result(self, tmp_path, capsys):
        cfg = {
            "m": 2, "bits": 3, "p_max_norm": 60.0, "sigma2": 1.5,
            "dither": {"mode": "both", "grid_max": 1.0, "grid_step": 0.25},
        }
        path = _write(tmp_path, "dither.yaml", cfg)
        assert main(["dither", "--config", path]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mode"] == "both"
        grid_len = 5
        assert len(payload["trace"]) == grid_len * (60 // (2**3 * 2) + 1)

    def test_csv_trace(self, tmp_path, capsys):
        cfg = {
            "m": 1, "bits": 2, "p_max_norm": 12.0, "sigma2": 1.0,
            "dither": {"mode": "quantized-only", "grid_max": 0.5, "grid_step": 0.5},
        }
        path = _write(tmp_path, "dither.yaml", cfg)
        assert main(["dither", "--config", path, "--format", "csv"]) == 0
        rows = _read_csv(capsys.readouterr().out)
        assert list(rows[0]) == ["n_a", "n_q", "sigma_d2", "mse"]


class TestSimulateCommand:
    def test_scalar_json(self, tmp_path, capsys):
        cfg = {
            "scenario": "scalar", "n_a": 1, "n_q": 0, "sigma2": 1.0,
            "trials": 20000, "seed": 5,
        }
        path = _write(tmp_path, "sim.yaml", cfg)
        assert main(["simulate", "--config", path]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["analytic_mse"] == 0.5
        assert abs(payload["empirical_mse"] - 0.5) <= 4 * payload["std_error"]

    def test_mimo_closed_filter_with_bbit_adc(self, tmp_path, capsys):
        cfg = {
            "scenario": "mimo", "m": 3, "n_a": 1, "n_q": 2, "rho": 1.0,
            "sigma2": 1.0, "trials": 20000, "filter": "closed",
            "analog_bits": 6, "analog_range": [-5.0, 5.0], "seed": 6,
        }
        path = _write(tmp_path, "sim.yaml", cfg)
        assert main(["simulate", "--config", path]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert abs(payload["empirical_mse"] - payload["analytic_mse"]) <= 4 * payload["std_error"]

    def test_seed_flag_overrides(self, tmp_path, capsys):
        cfg = {"scenario": "scalar", "n_a": 1, "n_q": 1, "sigma2": 1.0, "trials": 5000}
        path = _write(tmp_path, "sim.yaml", cfg)
        main(["simulate", "--config", path, "--seed", "1"])
        first = capsys.readouterr().out
        main(["simulate", "--config", path, "--seed", "2"])
        second = capsys.readouterr().out
        assert first != second


class TestBenchCommand:
    def test_csv_columns(self, tmp_path, capsys):
        cfg = {
            "m_list": [1, 2], "n_a_max_list": [2], "bits": 4,
            "repeats": 3, "direct_repeats": 1, "warmup": 1,
        }
        path = _write(tmp_path, "bench.yaml", cfg)
        assert main(["bench", "--config", path]) == 0
        rows = _read_csv(capsys.readouterr().out)
        assert list(rows[0]) == ["M", "n_a_max", "t_closed_ms", "t_direct_ms"]
        assert len(rows) == 2
        for row in rows:
            assert float(row["t_direct_ms"]) > float(row["t_closed_ms"]) > 0

    def test_repeats_flag(self, tmp_path, capsys):
        cfg = {
            "m_list": [1], "n_a_max_list": [2], "bits": 3,
            "direct_repeats": 1, "warmup": 0,
        }
        path = _write(tmp_path, "bench.yaml", cfg)
        assert main(["bench", "--config", path, "--repeats", "2"]) == 0
        assert len(_read_csv(capsys.readouterr().out)) == 1


class TestConfigHandling:
    def test_yaml_round_trip_is_lossless(self):
        dumped = yaml.safe_dump(SWEEP_CFG)
        assert yaml.safe_load(dumped) == SWEEP_CFG

    def test_unreadable_config(self, capsys):
        assert main(["mse", "--config", "/nonexistent/x.yaml"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_non_mapping_config(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        assert main(["mse", "--config", str(path)]) == 2

    def test_wrong_type_named(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("m: two\nbits: 3\np_max_norm: 10.0\nsigma2: 1.0\n", encoding="utf-8")
        assert main(["allocate", "--config", str(path)]) == 2
        assert "'m'" in capsys.readouterr().err
