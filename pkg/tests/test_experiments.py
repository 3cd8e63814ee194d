import csv
import math
import os

import numpy as np
import pytest

from parafreq import cli
from parafreq import experiments as ex

EIGEN_CFG = """\
# heat equation, first Dirichlet mode
p = 2
q = 1
domain.left = 0
domain.right = 3.141592653589793
domain.cells = 32
initial.kind = eigenmode
scheme.dt = 1e-3
t_span = 0, 0.2
checks = identity_I_prime, monotonicity, convexity
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_kv():
    d = ex.parse_kv("a = 1  # comment\n\n b.c=x y\n# only comment\na = 2\n")
    assert d == {"a": "2", "b.c": "x y"}
    with pytest.raises(ex.ConfigError):
        ex.parse_kv("no equals sign")


def test_config_validation():
    with pytest.raises(ex.ConfigError, match="unknown check"):
        ex.ExperimentConfig.from_dict({"checks": "monotonicity, bogus"})
    with pytest.raises(ex.ConfigError, match="unknown config keys"):
        ex.ExperimentConfig.from_dict({"domian.cells": "32"})
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_dict({"p": "0.5"})
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_dict({"t_span": "1, 0"})
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_dict({"perturbation.c": "0.5", "perturbation.C": "0.1"})
    cfg = ex.ExperimentConfig.from_dict({"domain.kind": "ball", "domain.n": "3", "scheme.dt": "1e-4"})
    assert cfg.params.n == 3 and cfg.scheme.dt == 1e-4


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, math.pi * 1e-300, -2.5e17):
        assert float(ex.fmt(x)) == x
    assert ex.fmt(True) == "true" and ex.fmt(3) == "3"


def test_simulate_eigenmode_passes(tmp_path):
    cfg = write(tmp_path, "run.cfg", EIGEN_CFG)
    assert cli.main(["simulate", cfg]) == 0
    with open(tmp_path / "series.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ex.SERIES_COLUMNS
    assert len(rows) == 201 + 1
    report = (tmp_path / "report.txt").read_text()
    assert "result = pass" in report and "wall_time" not in report


def test_simulate_trivial_run(tmp_path):
    cfg = write(tmp_path, "zero.cfg", EIGEN_CFG.replace("eigenmode", "zero"))
    assert cli.main(["simulate", cfg]) == 0
    assert "trivial = true" in (tmp_path / "report.txt").read_text()
    with open(tmp_path / "series.csv") as fh:
        row = list(csv.reader(fh))[1]
    assert row[3] == ex.UNDEFINED


def test_simulate_unknown_check_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "bad.cfg", EIGEN_CFG.replace("convexity", "frobnicate"))
    assert cli.main(["simulate", cfg]) == 2
    assert "frobnicate" in capsys.readouterr().err


def test_simulate_verdict_failure_exits_1(tmp_path):
    # the extinction check needs delta < 0; on the heat equation it fails
    cfg = write(tmp_path, "fail.cfg", EIGEN_CFG.replace("convexity", "extinction_bound"))
    assert cli.main(["simulate", cfg]) == 1
    assert "result = fail" in (tmp_path / "report.txt").read_text()


def test_simulate_solver_error_exits_2(tmp_path):
    text = EIGEN_CFG.replace("scheme.dt = 1e-3", "scheme.kind = euler\nscheme.dt = 0.5").replace(
        "t_span = 0, 0.2", "t_span = 0, 500")
    cfg = write(tmp_path, "unstable.cfg", text)
    assert cli.main(["simulate", cfg]) == 2
    assert "error = StabilityError" in (tmp_path / "report.txt").read_text()


def test_series_round_trip_and_verify(tmp_path):
    cfg = write(tmp_path, "run.cfg", EIGEN_CFG)
    cli.main(["simulate", cfg])
    s = ex.read_series(str(tmp_path / "series.csv"), 2.0, 1.0)
    assert len(s) == 201 and s.dt == pytest.approx(1e-3)
    code = cli.main(["verify", str(tmp_path / "series.csv"), "--checks", "identity_I_prime,monotonicity",
                     "--p", "2", "--q", "1"])
    assert code == 0
    assert cli.main(["verify", str(tmp_path / "series.csv"), "--checks", "nope", "--p", "2", "--q", "1"]) == 2


def test_barenblatt_table(tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["barenblatt", "--n", "1", "--p", "2", "--q", "2", "--C", "1", "--t", "1,2", "4",
                     "-o", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ex.BARENBLATT_COLUMNS
    I = [float(r[1]) for r in rows[1:]]
    np.testing.assert_allclose([I[1] / I[0], I[2] / I[1]], 2 ** (-2 / 3), rtol=1e-12)
    for r in rows[1:]:
        assert float(r[2]) == pytest.approx(float(r[1]), rel=1e-6)
    rows = ex.run_barenblatt(1, 2, 1, 1.0, [1.0])
    assert rows[0][3] == -0.25


def test_barenblatt_regime_error(capsys):
    assert cli.main(["barenblatt", "--n", "3", "--p", "2", "--q", "0.25", "--t", "1"]) == 2


def test_spectral_table(capsys):
    assert cli.main(["spectral", "--modes", "1", "1", "--t-range", "-2", "-1", "--samples", "3"]) == 0
    out = capsys.readouterr()
    assert out.out.splitlines()[0] == "t,I,N"
    assert "growth = exponential" in out.err
    assert cli.main(["spectral", "--modes", "0", "--t-range", "-2", "-1", "--samples", "3"]) == 0
    assert "polynomial(0)" in capsys.readouterr().err


def test_parse_axis():
    assert ex.parse_axis("seed=1..3") == ("seed", ["1", "2", "3"])
    assert ex.parse_axis("resolution=64,128") == ("domain.cells", ["64", "128"])
    with pytest.raises(ex.ConfigError):
        ex.parse_axis("p")


def test_sweep_delta_filter_and_aggregate(tmp_path):
    template = {"domain.cells": "16", "initial.kind": "eigenmode", "t_span": "0, 0.01",
                "checks": "monotonicity"}
    cells = ex.sweep_cells(template, [("p", ["1.5", "2", "3"]), ("q", ["0.5", "1", "2"])], delta_nonneg=True)
    assert len(cells) == 6
    text, code = ex.run_sweep(template, [("p", ["2", "3"]), ("q", ["1", "2"])], str(tmp_path), workers=2)
    assert code == 0
    assert len([f for f in os.listdir(tmp_path) if f.endswith(".report")]) == 4
    assert "monotonicity_N_G,4,4,1" in text


def test_sweep_records_cell_errors(tmp_path):
    template = {"domain.cells": "16", "initial.kind": "eigenmode", "scheme.dt": "1e-3", "t_span": "0, 0.01",
                "checks": "monotonicity"}
    text, code = ex.run_sweep(template, [("p", ["2", "0.5"])], str(tmp_path), workers=1)
    assert code == 2
    assert ",error," in text and ",pass," in text
