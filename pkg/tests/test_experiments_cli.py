import argparse
import math

import pytest
from hypothesis import given, strategies as st

from dgstokes.cli import main, parse_etas, parse_levels
from dgstokes.experiments import (
    BASE_COLUMNS, ExperimentConfig, ExperimentReport, compute_eoc, format_table, run_case,
)


def test_eoc_examples():
    counts = [16, 64, 256]
    assert compute_eoc([1.0, 0.5, 0.25], counts) == [None, pytest.approx(0.5), pytest.approx(0.5)]
    assert compute_eoc([2.0, 2.0], [16, 64]) == [None, 0.0]
    assert round(compute_eoc([8.2516e-3, 3.8937e-3], [4 ** 5, 4 ** 6])[1], 2) == 0.54
    eoc = compute_eoc([9.2180e-4, 4.5621e-4], [4 ** 8, 4 ** 9])[1]
    assert eoc == pytest.approx(math.log2(9.2180 / 4.5621) / 2, rel=1e-14)
    assert round(eoc, 2) == 0.51
    assert compute_eoc([0.0, 1.0, -1.0], counts) == [None, None, None]
    with pytest.raises(ValueError):
        compute_eoc([1.0], [1, 2])


@given(st.floats(1e-12, 1e3), st.floats(0.05, 3.0))
def test_eoc_recovers_power_law(c, rate):
    counts = [4 ** k for k in range(2, 6)]
    errors = [c * n ** (-rate) for n in counts]
    for e in compute_eoc(errors, counts)[1:]:
        assert e == pytest.approx(rate, rel=1e-9)


row_values = st.floats(1e-12, 1e3, allow_nan=False)


@given(st.lists(st.tuples(st.integers(0, 9), row_values, row_values), min_size=1, max_size=6))
def test_csv_round_trip(data):
    rows = [{"N": N, "ntri": 4 ** (N + 1), "err_u_dg": float(f"{u:.5e}"), "eoc_u": None,
             "err_p_l2": float(f"{p:.5e}"), "eoc_p": 0.5} for N, u, p in data]
    rep = ExperimentReport(list(BASE_COLUMNS), rows, {"k": [1, 2]})
    back = ExperimentReport.from_csv(rep.to_csv())
    assert back.rows == rows and back.metadata == rep.metadata and back.columns == rep.columns


def test_config_defaults_and_validation():
    assert ExperimentConfig().mesh == "crisscross" and ExperimentConfig().etas == (6.0,)
    lock = ExperimentConfig(case="locking")
    assert lock.mesh == "diagonal" and lock.etas == (10.0, 100.0, 1000.0)
    for bad in (dict(case="x"), dict(smoother="x"), dict(mesh="x"), dict(levels=(3, 1)),
                dict(etas=(0.0,)), dict(penalty="x"), dict(ell=0), dict(mu=-1.0)):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


def test_run_case_is_deterministic(tmp_path):
    cfg = ExperimentConfig(case="smooth", smoother="qopt", levels=(0, 2), out=str(tmp_path / "a.csv"))
    r1 = run_case(cfg)
    r2 = run_case(cfg)
    assert r1.rows == r2.rows
    assert [r["N"] for r in r1.rows] == [0, 1, 2] and r1.rows[0]["eoc_u"] is None
    assert ExperimentReport.read(cfg.out).rows == r1.rows
    assert "err_u_dg" in format_table(r1)


def test_locking_report_columns():
    rep = run_case(ExperimentConfig(case="locking", smoother="stnd", levels=(1, 2), etas=(10.0, 100.0)))
    assert len(rep.rows) == 4 and rep.series("err_u_dg1", eta=100.0)[0] > 0
    assert rep.rows[2]["eoc_u"] is None          # rates restart for every eta
    text = rep.plot_data()
    assert text.splitlines()[0] == "series,ntri,error"
    assert "err_u_dg1_eta100_full" in text


def test_argument_parsers():
    assert parse_levels("2..6") == (2, 6) and parse_levels("3") == (3, 3)
    assert parse_etas("10,100") == (10.0, 100.0)
    with pytest.raises(argparse.ArgumentTypeError):
        parse_levels("a..b")
    with pytest.raises(argparse.ArgumentTypeError):
        parse_etas("x")


def test_cli_exit_codes(tmp_path, monkeypatch):
    out = tmp_path / "r.csv"
    plot = tmp_path / "p.csv"
    code = main(["run", "--case", "jump", "--smoother", "prob", "--levels", "1..2", "--quiet",
                 "--out", str(out), "--plot-data", str(plot)])
    assert code == 0
    rep = ExperimentReport.read(out)
    assert [r["N"] for r in rep.rows] == [1, 2]
    assert math.isfinite(rep.rows[1]["eoc_u"])
    assert plot.read_text().startswith("series,ntri,error")
    assert main(["run", "--levels", "4..2", "--quiet"]) == 2
    assert main(["run", "--eta", "-1", "--quiet"]) == 2
    def boom(config, verbose=False):
        raise RuntimeError("solver diverged")
    monkeypatch.setattr("dgstokes.cli.run_case", boom)
    assert main(["run", "--levels", "0..0", "--quiet"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--case", "nope"])
    assert exc.value.code == 2
