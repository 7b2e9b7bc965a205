import json

import numpy as np
import pytest

from hype_attention.bench import BenchRefused, run_bench
from hype_attention.cli import main
from hype_attention.config import ConfigError, parse_config
from hype_attention.encoding import HypeHeadParams, build_bias_hype
from hype_attention.report import (format_value, matrix_from_csv, matrix_from_json,
                                   matrix_to_csv)
from hype_attention.suites import run_suites


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert (cfg.L, cfg.d, cfg.heads, cfg.width) == (128, 16, 4, "f64")
        assert len(cfg.head_params) == 4 and not cfg.shared_mask
        assert cfg.tol_equivalence == 1e-12

    def test_parse_values(self):
        cfg = parse_config("""
            # comment
            L = 32
            heads = 2
            mu = 0.01, 0.02   # per head
            tau = 2
            causal = true
            width = f32
        """)
        assert cfg.head_params == [HypeHeadParams(0.01, 2.0), HypeHeadParams(0.02, 2.0)]
        assert cfg.causal is True
        assert cfg.tol_equivalence == 1e-4 and cfg.tol_attention == 1e-3

    def test_shared_single_mu(self):
        assert parse_config("heads = 8\nmu = 0.001").shared_mask

    @pytest.mark.parametrize("text", [
        "L = -1", "bogus = 1", "L 12", "mu = auto:x", "heads = 2\nmu = 1,2,3",
        "width = f16", "causal = maybe", "L = 1.5", "tau = nan",
    ])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_overrides_win(self):
        cfg = parse_config("seed = 3\nwidth = f32", seed=9, width="f64")
        assert cfg.seed == 9 and cfg.width == "f64"


class TestReport:
    def test_shortest_roundtrip_format(self):
        assert format_value(-0.0) == "0"
        assert format_value(np.sinh(0.1)) == "0.10016675001984403"
        assert format_value(np.float32(np.sinh(0.1)), np.float32) == "0.10016675"
        assert float(format_value(1e-300)) == 1e-300
        assert float(format_value(3.5e20)) == 3.5e20

    @pytest.mark.parametrize("width", ["f32", "f64"])
    def test_csv_roundtrip_bit_exact(self, width):
        bias = build_bias_hype(20, HypeHeadParams(0.37, 1.9), width=width).values
        back = matrix_from_csv(matrix_to_csv(bias), width)
        assert back.dtype == bias.dtype
        assert np.array_equal(back, bias)


class TestVerify:
    def test_default_config_passes(self, capsys):
        assert main(["verify"]) == 0
        assert "all checks passed" in capsys.readouterr().out

    def test_single_token(self, tmp_path):
        assert main(["verify", "--config", write(tmp_path, "L = 1")]) == 0

    def test_overflow_is_clean_failure(self, tmp_path, capsys):
        assert main(["verify", "--config", write(tmp_path, "L = 128\nmu = 10")]) == 1
        err = capsys.readouterr().err
        assert "overflows f64" in err and "mu=10.0" in err
        assert "Traceback" not in err

    def test_single_width(self, tmp_path):
        assert main(["verify", "--width", "f32"]) == 0

    def test_usage_errors(self, tmp_path):
        assert main(["verify", "--config", str(tmp_path / "missing.cfg")]) == 2
        assert main(["verify", "--config", write(tmp_path, "L = zero")]) == 2
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--width", "f16"])
        assert exc.value.code == 2

    def test_report_file_and_parallel_agree(self, tmp_path):
        seq, par = tmp_path / "seq.json", tmp_path / "par.json"
        assert main(["verify", "--out", str(seq)]) == 0
        assert main(["verify", "--out", str(par), "--parallel"]) == 0
        a, b = json.loads(seq.read_text()), json.loads(par.read_text())
        assert a["passed"] and a["suites"] == b["suites"]

    def test_first_failure_named(self, tmp_path, capsys):
        assert main(["verify", "--config", write(tmp_path, "tol_grid = 0")]) == 1
        assert "first failure -> FAIL grid[" in capsys.readouterr().err

    def test_causal_config(self, tmp_path):
        assert main(["verify", "--config", write(tmp_path, "causal = true\nL = 48")]) == 0

    def test_run_suites_lists_every_suite(self):
        report = run_suites(parse_config("L = 16"))
        assert set(report["suites"]) == {"equivalence", "antisymmetry", "alibi", "stacking",
                                         "grid", "gradient"}


class TestBiasDump:
    def test_csv_example(self, tmp_path):
        out = tmp_path / "bias.csv"
        assert main(["bias-dump", "--L", "2", "--mu", "0.1", "--out", str(out)]) == 0
        assert out.read_text() == "0,-0.10016675001984403\n0.10016675001984403,0\n"

    def test_zero_slope(self, capsys):
        assert main(["bias-dump", "--L", "3", "--mu", "0"]) == 0
        assert capsys.readouterr().out == "0,0,0\n0,0,0\n0,0,0\n"

    @pytest.mark.parametrize("width", ["f32", "f64"])
    def test_json_roundtrip(self, tmp_path, width):
        out = tmp_path / "bias.json"
        assert main(["bias-dump", "--L", "9", "--mu", "0.3", "--tau", "1.7", "--format", "json",
                     "--width", width, "--out", str(out)]) == 0
        back = matrix_from_json(out.read_text())
        assert np.array_equal(back, build_bias_hype(9, HypeHeadParams(0.3, 1.7), width).values)

    def test_errors(self, tmp_path):
        assert main(["bias-dump", "--L", "128", "--mu", "10"]) == 1
        assert main(["bias-dump", "--mu", "0.1"]) == 2
        assert main(["bias-dump", "--L", "2", "--mu", "0.1",
                     "--out", str(tmp_path / "no" / "such" / "dir.csv")]) == 2

    def test_from_config(self, tmp_path, capsys):
        assert main(["bias-dump", "--config", write(tmp_path, "L = 2\nmu = 0.1\nheads = 1")]) == 0
        assert capsys.readouterr().out.startswith("0,-0.10016675001984403")


class TestBench:
    def test_counts_and_ratio(self):
        r = run_bench(parse_config("L = 64\nheads = 1\nd = 4"))
        assert r.stored_pe_values_hype == 256
        assert r.stored_pe_values_explicit == 4096
        assert r.stored_pe_values_explicit / r.stored_pe_values_hype == 16
        assert r.max_equivalence_error <= 1e-12

    def test_scaling_law(self):
        a = run_bench(parse_config("L = 64\nheads = 2\nd = 4\nmu = 0.001"))
        b = run_bench(parse_config("L = 128\nheads = 2\nd = 4\nmu = 0.001"))
        assert b.stored_pe_values_hype == 2 * a.stored_pe_values_hype
        assert b.stored_pe_values_explicit == 4 * a.stored_pe_values_explicit

    def test_distinct_head_masks_counted_per_head(self):
        r = run_bench(parse_config("L = 32\nheads = 4\nd = 4\nmu = auto:64"))
        assert r.stored_pe_values_explicit == 4 * 32 ** 2

    def test_deterministic_apart_from_timing(self):
        cfg = "L = 32\nheads = 2\nd = 4\nseed = 5"
        a, b = run_bench(parse_config(cfg)).to_dict(), run_bench(parse_config(cfg)).to_dict()
        for key in ("wall_time_concat", "wall_time_explicit"):
            a.pop(key), b.pop(key)
        assert a == b

    def test_refuses_oversized(self):
        with pytest.raises(BenchRefused):
            run_bench(parse_config("L = 5000"))
        with pytest.raises(ConfigError):
            run_bench(parse_config("L = 8\ntrials = 3"))

    def test_cli_outputs(self, tmp_path):
        cfg = write(tmp_path, "L = 64\nheads = 2\nd = 4\nmu = 0.002")
        out = tmp_path / "bench.json"
        assert main(["bench", "--config", cfg, "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert set(doc) == {"config", "stored_pe_values_hype", "stored_pe_values_explicit",
                            "wall_time_concat", "wall_time_explicit", "max_equivalence_error",
                            "width", "seed"}
        assert doc["stored_pe_values_hype"] == 4 * 64 * 2
        csv_out = tmp_path / "bench.csv"
        assert main(["bench", "--config", cfg, "--format", "csv", "--out", str(csv_out)]) == 0
        header, row = csv_out.read_text().splitlines()[:2]
        assert "stored_pe_values_hype" in header.split(",")
        assert main(["bench", "--config", write(tmp_path, "L = 9000", "big.cfg")]) == 2

    def test_tolerance_violation_exits_1(self, tmp_path):
        cfg = write(tmp_path, "L = 64\nheads = 1\nd = 4\ntol_attention = 0")
        assert main(["bench", "--config", cfg, "--out", str(tmp_path / "r.json")]) == 1
