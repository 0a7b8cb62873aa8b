import math

import numpy as np
import pytest

from nonlocal_trace.harness import (ConfigError, ExperimentConfig, FunctionDef, Row, default_config, format_config,
                                    load_config, rows_to_csv, run_study, summarize)
from nonlocal_trace.harness.cli import main
from nonlocal_trace.harness.config import STUDIES, desk_betas
from nonlocal_trace.harness.report import COLUMNS, checked, err_ok, read_csv

SMALL_TRACE = """
[study]
name = trace
seed = 7

[grid]
d = 1
p = 2
beta = 0, 1/2
delta = 1/2, 1/4

[functions]
tilt = (1 + x) * bump(x, 1.5)
tilt.support = 1.5
"""


@pytest.fixture
def small_trace(tmp_path):
    path = tmp_path / "trace.ini"
    path.write_text(SMALL_TRACE)
    return path


def test_desk_grid():
    assert desk_betas(2, 2) == (0.0, 1.0, 1.8, 2.2, 3.0)
    cfg = default_config("trace")
    assert cfg.betas(1, 2) == desk_betas(1, 2)


@pytest.mark.parametrize("study", STUDIES)
def test_defaults_are_valid_and_round_trip(study, tmp_path):
    cfg = default_config(study)
    path = tmp_path / "cfg.ini"
    path.write_text(format_config(cfg))
    assert load_config(path, study) == cfg


def test_load_overlays_defaults(small_trace):
    cfg = load_config(small_trace)
    assert cfg.study == "trace" and cfg.seed == 7 and cfg.quad.seed == 7
    assert cfg.beta == (0.0, 0.5) and cfg.delta == (0.5, 0.25)
    assert cfg.functions == (FunctionDef("tilt", "(1 + x) * bump(x, 1.5)", 1.5),)
    assert cfg.domain == default_config("trace").domain


def test_study_name_mismatch(small_trace):
    with pytest.raises(ConfigError):
        load_config(small_trace, "embedding")


@pytest.mark.parametrize("grid, message", [
    ("beta = 3", "outside"),
    ("delta = 0", "positive"),
    ("d = 4", "d must be"),
])
def test_invalid_grids(tmp_path, grid, message):
    path = tmp_path / "bad.ini"
    keys = {"d": "d = 1", "p": "p = 2"}
    keys[grid.split()[0]] = grid
    path.write_text("[study]\nname = trace\n[grid]\n" + "\n".join(keys.values()) + "\n")
    with pytest.raises(ConfigError, match=message):
        load_config(path)


def test_malformed_file(tmp_path):
    path = tmp_path / "dup.ini"
    path.write_text("[study]\nname = trace\n[grid]\nd = 1\nd = 2\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(path)


def test_extension_study_constraints():
    base = default_config("inverse-trace")
    with pytest.raises(ConfigError, match="excluded"):
        ExperimentConfig(**{**base.__dict__, "beta": (1.0,)})
    with pytest.raises(ConfigError, match="cap"):
        ExperimentConfig(**{**base.__dict__, "delta": (1.0,)})


def test_function_without_support_is_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[study]\nname = trace\n[functions]\nf = x\n")
    with pytest.raises(ConfigError, match="support"):
        load_config(path)


def test_error_rule():
    assert err_ok(1.0, 0.1)
    assert not err_ok(1.0, 0.11)
    assert err_ok(0.0, 0.0)
    assert not err_ok(math.nan, 0.0)
    row = checked(Row("trace", lhs=1.0, rhs=2.0, err_lhs=0.5), True)
    assert not row.passed and "10%" in row.note


def test_csv_formatting():
    row = Row("trace", 1, np.float64(2.0), 0.5, None, None, "f", "rho", 1.25, 2.0, np.float64(0.625),
              n_evals=np.int64(12), passed=np.bool_(True))
    lines = rows_to_csv([row]).splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert lines[1] == "trace,1,2.0,0.5,,,f,rho,1.25,2.0,0.625,0.0,0.0,12,,true,"


def test_spread_summary():
    cfg = default_config("trace")
    rows = [Row("trace", 1, 2.0, 0.0, dl, None, "f", "rho", ratio=r, passed=True)
            for dl, r in ((0.5, 1.0), (0.25, 3.0), (0.125, 2.0))]
    (summary,) = summarize(cfg, rows)
    assert summary.quantity == "rho_spread_over_delta" and summary.ratio == 3.0 and summary.passed
    rows.append(Row("trace", 1, 2.0, 0.0, 0.0625, None, "f", "rho", ratio=0.5, passed=True))
    (summary,) = summarize(cfg, rows)
    assert summary.ratio == 6.0 and not summary.passed


def test_failed_constituents_fail_the_summary():
    cfg = default_config("trace")
    rows = [Row("trace", 1, 2.0, 0.0, 0.5, None, "f", "rho", ratio=1.0, passed=True),
            Row("trace", 1, 2.0, 0.0, 0.25, None, "f", "rho", ratio=1.0, passed=False)]
    (summary,) = summarize(cfg, rows)
    assert not summary.passed


def test_rerun_is_byte_identical(small_trace):
    cfg = load_config(small_trace)
    first = rows_to_csv(run_study(cfg))
    assert first == rows_to_csv(run_study(cfg))
    assert rows_to_csv(run_study(cfg, jobs=2)) == first


def test_cli_study_writes_csv_and_figure(small_trace, tmp_path, capsys):
    out = tmp_path / "out" / "trace.csv"
    code = main(["study", "trace", "--config", str(small_trace), "--out", str(out)])
    assert code == 0
    assert out.with_suffix(".svg").read_text().lstrip().startswith("<?xml")
    rows = read_csv(out)
    assert {r["quantity"] for r in rows} == {"rho", "rho_spread_over_delta"}
    assert all(r["passed"] == "true" and r["wall_ms"] == "" for r in rows)
    assert "0 failed" in capsys.readouterr().out


def test_cli_figure_is_reproducible(small_trace, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["study", "trace", "--config", str(small_trace), "--out", str(a)])
    main(["study", "trace", "--config", str(small_trace), "--out", str(b)])
    assert a.with_suffix(".svg").read_bytes() == b.with_suffix(".svg").read_bytes()


def test_cli_timing_column(small_trace, tmp_path):
    out = tmp_path / "t.csv"
    main(["study", "trace", "--config", str(small_trace), "--out", str(out), "--record-timing", "--no-plot"])
    assert all(float(r["wall_ms"]) >= 0 for r in read_csv(out) if r["quantity"] == "rho")
    assert not out.with_suffix(".svg").exists()


def test_cli_exit_code_on_failure(tmp_path):
    # a rough field with a strong singularity cannot be integrated: the study reports failure
    path = tmp_path / "rough.ini"
    path.write_text("[study]\nname = trace\n[grid]\nd = 2\np = 2\nbeta = 2.5\ndelta = 0.5\n"
                    "[functions]\nkink = max(0, 1 - abs(x)) * bump(y, 1)\nkink.support = 1.5\n"
                    "kink.smoothness = C0\n")
    assert main(["study", "trace", "--config", str(path), "--out", str(tmp_path / "r.csv"), "--no-plot"]) == 1


def test_cli_norm(capsys):
    assert main(["norm", "--expr", "x", "--kind", "S", "--domain=-1,2"]) == 0
    out = capsys.readouterr().out
    assert float(out.split()[0].split("=")[1]) == pytest.approx(1.5, rel=1e-10)


def test_cli_extend(capsys):
    assert main(["extend", "--expr", "2", "--beta", "0", "--delta", "0.25", "--points", "-0.1", "0.3"]) == 0
    values = [float(line.split()[1]) for line in capsys.readouterr().out.splitlines()]
    assert values == [2.0, pytest.approx(2.0)]


def test_cli_validate_cover(capsys):
    assert main(["validate-cover", "--delta", "0.1"]) == 0
    assert '"ok": true' in capsys.readouterr().out


def test_cli_usage_errors(capsys, tmp_path):
    assert main(["norm", "--expr", "import os"]) == 2
    missing = tmp_path / "nope.ini"
    assert main(["study", "trace", "--config", str(missing)]) == 2
    with pytest.raises(SystemExit):
        main(["study", "no-such-study"])
