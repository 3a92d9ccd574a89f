"""Config parsing, CSV artifacts, exit codes, reproducibility of the runner."""

import json
import math
import os
import statistics

import numpy as np
import pytest

from cdmafusion import ParseError
from cdmafusion.cli import main, parse_config
from cdmafusion.spreading import generate, save_csv


def read_csv(path):
    """Split an artifact into (meta lines, header columns, data rows)."""
    meta, header, rows = [], None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            meta.append(line[2:])
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, header, rows


def config_file(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestParseConfig:
    def test_minimal(self):
        cfg = parse_config("{}", mode="analyze")
        assert cfg.mode == "analyze"
        assert (cfg.params.N, cfg.params.Ns) == (128, 128)
        assert cfg.seed == 0
        assert cfg.mc.trials_per_hypothesis == 100_000
        assert cfg.mc.seed == 0
        assert cfg.grid_N == (8, 16, 32, 64, 128)
        assert cfg.grid_alpha == (0.5, 1.0, 2.0, 4.0)
        assert cfg.cell_seeds == 20

    def test_mode_from_config(self):
        assert parse_config('{"mode": "asymptotic"}').mode == "asymptotic"

    def test_mode_agreement(self):
        assert parse_config('{"mode": "analyze"}', mode="analyze").mode == "analyze"
        with pytest.raises(ParseError, match="mode mismatch"):
            parse_config('{"mode": "analyze"}', mode="converge")

    def test_mode_required(self):
        with pytest.raises(ParseError, match="no mode"):
            parse_config("{}")

    def test_unknown_mode(self):
        with pytest.raises(ParseError, match="unknown mode"):
            parse_config('{"mode": "frobnicate"}')

    def test_duplicate_keys_rejected(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse_config('{"seed": 1, "seed": 2}', mode="analyze")

    @pytest.mark.parametrize(
        "doc,fragment",
        [
            ('{"bogus": 1}', "unknown key"),
            ('{"params": {"bogus": 1}}', "unknown key"),
            ('{"detector": {"bogus": 1}}', "unknown key"),
            ('{"mc": {"bogus": 1}}', "unknown key"),
            ('{"grid": {"bogus": 1}}', "unknown key"),
            ('{"schema": 2}', "unsupported schema"),
            ('{"seed": -1}', "seed"),
            ('{"seed": 1.5}', "integer"),
            ('{"seed": true}', "integer"),
            ('{"params": {"N": 1.5}}', "integer"),
            ('{"params": {"P": "ten"}}', "number"),
            ('{"params": {"P": true}}', "number"),
            ('{"params": {"Ns": 4, "alpha": 1.0}}', "not both"),
            ('{"detector": {"criterion": "minimax"}}', "criterion"),
            ('{"detector": {"alpha_fa": 0.1}}', "alpha_fa"),
            ('{"detector": {"criterion": "fixed", "tau_prime": 0.0, "alpha_fa": 0.1}}', "alpha_fa"),
            ('{"detector": {"criterion": "np", "alpha_fa": 0.1, "tau_prime": 0.0}}', "tau_prime"),
            ('{"grid": {"N": []}}', "non-empty"),
            ('{"grid": {"N": [8, 8]}}', "ascending"),
            ('{"grid": {"N": [16, 8]}}', "ascending"),
            ('{"grid": {"N": [8.5]}}', "integer"),
            ('{"grid": {"alpha": [1.0, 0.5]}}', "ascending"),
            ('{"grid": {"alpha": [-1.0]}}', "> 0"),
            ('{"grid": {"seeds": 0}}', "seeds"),
            ('{"params": 3}', "object"),
            ("[1, 2]", "object"),
        ],
    )
    def test_rejections(self, doc, fragment):
        with pytest.raises(ParseError, match=fragment):
            parse_config(doc, mode="analyze")

    def test_matrix_path_mode_restriction(self):
        parse_config('{"matrix_path": "m.csv"}', mode="analyze")
        parse_config('{"matrix_path": "m.csv"}', mode="montecarlo")
        with pytest.raises(ParseError, match="matrix_path"):
            parse_config('{"matrix_path": "m.csv"}', mode="converge")

    def test_invalid_json_reports_position(self):
        with pytest.raises(ParseError, match="line"):
            parse_config('{\n  "seed": }', mode="analyze")

    def test_invalid_utf8(self):
        with pytest.raises(ParseError, match="UTF-8"):
            parse_config(b'\xff\xfe{"mode": "analyze"}')

    def test_alpha_rounds_sensor_count(self):
        cfg = parse_config('{"params": {"N": 10, "alpha": 0.25}}', mode="analyze")
        assert cfg.params.Ns == 3  # 2.5 rounds half away from zero

    def test_priors_derived(self):
        cfg = parse_config('{"params": {"p0": 0.7}}', mode="analyze")
        assert cfg.params.p1 == pytest.approx(0.3, abs=1e-15)

    def test_mc_seed_defaults_to_master(self):
        cfg = parse_config('{"seed": 77}', mode="montecarlo")
        assert cfg.mc.seed == 77
        cfg2 = parse_config('{"seed": 77, "mc": {"seed": 5}}', mode="montecarlo")
        assert cfg2.mc.seed == 5

    def test_invalid_model_value_raises_invalid_param(self):
        from cdmafusion import InvalidParam

        with pytest.raises(InvalidParam):
            parse_config('{"params": {"P": -3.0}}', mode="analyze")


class TestRunnerModes:
    def run_main(self, argv):
        return main(argv)

    def test_analyze_artifact(self, tmp_path):
        cfg = config_file(
            tmp_path,
            {"mode": "analyze", "seed": 3, "params": {"N": 16, "Ns": 16},
             "output": str(tmp_path / "a.csv")},
        )
        assert self.run_main(["--config", cfg, "--quiet"]) == 0
        meta, header, rows = read_csv(tmp_path / "a.csv")
        assert header == ["N", "alpha", "Ns", "seed", "tau_prime", "qf", "pf", "pm", "pe"]
        assert len(rows) == 1
        assert rows[0][0] == "16" and rows[0][3] == "3"
        assert any(line.startswith("artifact=cdmafusion-") for line in meta)
        assert any("spreading_generator=philox4x64-colmajor-v1" in line for line in meta)
        pf, pm, pe = map(float, rows[0][6:9])
        assert pe == pytest.approx(0.5 * pf + 0.5 * pm, abs=1e-9)

    def test_analyze_matches_library(self, tmp_path):
        from cdmafusion import DetectorSpec, SystemParams, exact_performance

        out = tmp_path / "a.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "analyze", "seed": 9, "params": {"N": 12, "Ns": 7}, "output": str(out)},
        )
        assert self.run_main(["--config", cfg, "--quiet"]) == 0
        _, _, rows = read_csv(out)
        p = SystemParams(N=12, Ns=7, P=10.0, m=1.0, sigma_v2=1.0, sigma_w2=1.0)
        rep = exact_performance(p, generate(12, 7, 9), DetectorSpec())
        assert float(rows[0][8]) == pytest.approx(rep.pe, rel=1e-8)

    def test_asymptotic_reference_row(self, tmp_path):
        out = tmp_path / "asy.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "asymptotic", "params": {"N": 10, "Ns": 10}, "output": str(out)},
        )
        assert self.run_main(["--config", cfg, "--quiet"]) == 0
        _, header, rows = read_csv(out)
        assert header == ["N", "alpha", "Ns", "gamma", "beta0", "mu", "tau_prime", "pf", "pm", "pe"]
        assert rows[0][:4] == ["10", "1", "10", "0.5"]
        assert rows[0][4] == "0.732050808"
        assert rows[0][5] == "0.373205081"
        assert rows[0][9] == "0.0508240771"

    def test_montecarlo_artifact(self, tmp_path):
        out = tmp_path / "mc.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "montecarlo", "seed": 5, "params": {"N": 8, "Ns": 8},
             "mc": {"trials": 4000}, "output": str(out)},
        )
        assert self.run_main(["--config", cfg, "--quiet"]) == 0
        meta, header, rows = read_csv(out)
        assert header[:6] == ["N", "alpha", "Ns", "seed", "trials", "tau_prime"]
        assert header[6:] == [
            "pf_mc", "pm_mc", "pe_mc", "stderr_pf", "stderr_pm", "stderr_pe",
            "pf_exact", "pm_exact", "pe_exact",
        ]
        assert rows[0][4] == "4000"
        assert any("mc_rng=philox4x64-seedseq-chunk16384-v1" in line for line in meta)
        assert any("normal_sampler=numpy-ziggurat-v1" in line for line in meta)
        # worker hints must never appear in the artifact
        assert not any("worker" in line for line in meta)
        pf_mc, pf_exact = float(rows[0][6]), float(rows[0][12])
        assert abs(pf_mc - pf_exact) <= 5 * max(float(rows[0][9]), 1e-12)

    def test_converge_row_count(self, tmp_path):
        out = tmp_path / "c.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "converge", "seed": 1, "params": {"N": 8, "alpha": 1.0},
             "grid": {"N": [8, 16], "seeds": 3}, "output": str(out)},
        )
        assert self.run_main(["--config", cfg, "--quiet"]) == 0
        meta, header, rows = read_csv(out)
        assert header == ["statistic", "N", "alpha", "Ns", "seed", "observed",
                          "predicted", "abs_error", "rel_error"]
        # six records per (N, seed) cell: snr, decomposition_residual,
        # diag_leave_out, diag_full, cross_mean, mil_residual
        assert len(rows) == 2 * 3 * 6
        assert any("seeds_per_cell=3" in line for line in meta)
        stats = {r[0] for r in rows}
        assert stats == {"snr", "decomposition_residual", "diag_leave_out",
                         "diag_full", "cross_mean", "mil_residual"}
        # mil rows have no defined relative error
        mil = [r for r in rows if r[0] == "mil_residual"]
        assert all(r[8] == "nan" for r in mil)

    def test_sweep_limits_artifact(self, tmp_path):
        out = tmp_path / "lim.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "sweep-limits", "grid": {"N": [8, 16], "alpha": [0.5, 1.0]},
             "output": str(out)},
        )
        assert self.run_main(["--config", cfg, "--quiet"]) == 0
        _, header, rows = read_csv(out)
        assert header == ["N", "alpha", "pe_asymptotic", "pe_large_alpha_limit", "pe_single_sensor"]
        assert len(rows) == 4
        for r in rows:
            assert float(r[3]) < float(r[4])  # floor beats one sensor here

    def test_sweep_grid_artifact(self, tmp_path):
        out = tmp_path / "grid.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "sweep-grid", "seed": 2,
             "grid": {"N": [8, 16], "alpha": [1.0, 2.0], "seeds": 3},
             "output": str(out)},
        )
        assert self.run_main(["--config", cfg, "--quiet"]) == 0
        meta, header, rows = read_csv(out)
        assert header == ["N", "alpha", "Ns", "seed", "pe_exact", "pe_asymptotic", "rel_gap"]
        assert len(rows) == 2 * 2 * 3
        assert any("seeds_per_cell=3" in line for line in meta)
        # per-cell seeds differ and are derived deterministically
        seeds = {r[3] for r in rows}
        assert len(seeds) == len(rows)
        for r in rows:
            gap = abs(float(r[4]) - float(r[5])) / float(r[5])
            assert float(r[6]) == pytest.approx(gap, rel=1e-6)


class TestReproducibility:
    def test_byte_identical_reruns(self, tmp_path):
        doc = {"mode": "sweep-grid", "seed": 11,
               "grid": {"N": [8, 16], "alpha": [0.5, 1.0], "seeds": 4}}
        cfg = config_file(tmp_path, doc)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["--config", cfg, "--out", str(a), "--quiet"]) == 0
        assert main(["--config", cfg, "--out", str(b), "--quiet"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_worker_count_invisible(self, tmp_path):
        doc = {"mode": "sweep-grid", "seed": 11,
               "grid": {"N": [8, 16], "alpha": [0.5, 1.0], "seeds": 4}}
        cfg = config_file(tmp_path, doc)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["--config", cfg, "--out", str(a), "--quiet"]) == 0
        assert main(["--config", cfg, "--out", str(b), "--workers", "4", "--quiet"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_montecarlo_worker_invariance(self, tmp_path):
        doc = {"mode": "montecarlo", "seed": 4, "params": {"N": 8, "Ns": 8},
               "mc": {"trials": 40000}}
        cfg = config_file(tmp_path, doc)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["--config", cfg, "--out", str(a), "--quiet"]) == 0
        assert main(["--config", cfg, "--out", str(b), "--workers", "4", "--quiet"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override_changes_everything(self, tmp_path):
        doc = {"mode": "montecarlo", "params": {"N": 8, "Ns": 8}, "mc": {"trials": 2000}}
        cfg = config_file(tmp_path, doc)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["--config", cfg, "--out", str(a), "--seed", "1", "--quiet"]) == 0
        assert main(["--config", cfg, "--out", str(b), "--seed", "2", "--quiet"]) == 0
        ra = read_csv(a)[2][0]
        rb = read_csv(b)[2][0]
        assert ra[3] != rb[3]  # spreading seed
        assert ra[6] != rb[6]  # simulated pf

    def test_no_mode_without_config(self):
        assert main(["--quiet"]) == 1


class TestMatrixPath:
    def test_roundtrip(self, tmp_path):
        S = generate(8, 8, seed=123)
        mat = tmp_path / "sigs.csv"
        save_csv(S, mat)
        out = tmp_path / "a.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "analyze", "params": {"N": 8, "Ns": 8},
             "matrix_path": str(mat), "output": str(out)},
        )
        assert main(["--config", cfg, "--quiet"]) == 0
        meta, _, rows = read_csv(out)
        assert any(f"matrix_source={mat}" in line for line in meta)
        assert rows[0][3] == "123"  # seed restored from the matrix header

    def test_headerless_matrix_empty_seed(self, tmp_path):
        mat = tmp_path / "sigs.csv"
        scale = 1.0 / math.sqrt(2.0)
        mat.write_text(f"{scale:.17g},{scale:.17g}\n{scale:.17g},-{scale:.17g}\n")
        out = tmp_path / "a.csv"
        cfg = config_file(
            tmp_path,
            {"mode": "analyze", "params": {"N": 2, "Ns": 2},
             "matrix_path": str(mat), "output": str(out)},
        )
        assert main(["--config", cfg, "--quiet"]) == 0
        _, _, rows = read_csv(out)
        assert rows[0][3] == ""

    def test_dimension_mismatch_exits_1(self, tmp_path):
        S = generate(8, 4, seed=0)
        mat = tmp_path / "sigs.csv"
        save_csv(S, mat)
        cfg = config_file(
            tmp_path,
            {"mode": "analyze", "params": {"N": 8, "Ns": 8},
             "matrix_path": str(mat), "output": str(tmp_path / "a.csv")},
        )
        assert main(["--config", cfg, "--quiet"]) == 1

    def test_missing_matrix_exits_1(self, tmp_path):
        cfg = config_file(
            tmp_path,
            {"mode": "analyze", "matrix_path": str(tmp_path / "nope.csv"),
             "output": str(tmp_path / "a.csv")},
        )
        assert main(["--config", cfg, "--quiet"]) == 1


class TestExitCodes:
    def test_missing_config_file(self):
        assert main(["analyze", "--config", "/no/such/file.json", "--quiet"]) == 1

    def test_bad_param_value(self, tmp_path):
        cfg = config_file(tmp_path, {"mode": "analyze", "params": {"P": -1.0},
                                     "output": str(tmp_path / "a.csv")})
        assert main(["--config", cfg, "--quiet"]) == 1

    def test_missing_output(self, tmp_path):
        cfg = config_file(tmp_path, {"mode": "analyze"})
        assert main(["--config", cfg, "--quiet"]) == 1

    def test_unwritable_output_is_runtime_failure(self, tmp_path):
        target = tmp_path / "missing-dir" / "a.csv"
        cfg = config_file(tmp_path, {"mode": "analyze", "output": str(target),
                                     "params": {"N": 8, "Ns": 8}})
        assert main(["--config", cfg, "--quiet"]) == 2
        assert not target.exists()

    def test_bad_seed_override(self, tmp_path):
        cfg = config_file(tmp_path, {"mode": "analyze", "output": str(tmp_path / "a.csv")})
        assert main(["--config", cfg, "--seed", "-3", "--quiet"]) == 1

    def test_success_prints_row_count(self, tmp_path, capsys):
        cfg = config_file(tmp_path, {"mode": "asymptotic", "params": {"N": 8, "Ns": 8},
                                     "output": str(tmp_path / "a.csv")})
        assert main(["--config", cfg]) == 0
        assert "wrote 1 rows" in capsys.readouterr().out


class TestGridInvariant:
    def test_median_error_monotone_in_load(self, tmp_path):
        # with enough per-cell seeds the median exact error probability is
        # non-increasing in the load at every spreading length; 2000 seeds
        # per cell puts the median standard error well below the cell gaps
        out = tmp_path / "grid.csv"
        doc = {"mode": "sweep-grid", "seed": 0,
               "grid": {"seeds": 2000}, "mc": {"workers": 4}}
        cfg = config_file(tmp_path, doc)
        assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
        _, header, rows = read_csv(out)
        i_n, i_a, i_pe = header.index("N"), header.index("alpha"), header.index("pe_exact")
        cells = {}
        for r in rows:
            cells.setdefault((int(r[i_n]), float(r[i_a])), []).append(float(r[i_pe]))
        Ns = sorted({k[0] for k in cells})
        alphas = sorted({k[1] for k in cells})
        assert len(rows) == len(Ns) * len(alphas) * 2000
        for N in Ns:
            medians = [statistics.median(cells[(N, a)]) for a in alphas]
            for a, b in zip(medians, medians[1:]):
                assert b <= a, f"median pe rose with load at N={N}: {medians}"
