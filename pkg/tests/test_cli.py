import csv

import numpy as np
import pytest

from gprc.cli import main, read_data
from gprc.errors import ConfigError, InsufficientDataError


def write_column(path, values):
    path.write_text("\n".join(repr(float(v)) for v in values) + "\n")
    return str(path)


def parse_output(text):
    return {k: v for k, v in (line.split(None, 1) for line in text.splitlines() if line.strip())}


# data files ----------------------------------------------------------------


def test_read_data_skips_comments_and_blank_lines(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("# header\n1.0\n\n2.5  # trailing\n3\n")
    np.testing.assert_array_equal(read_data(p, "iid"), [1.0, 2.5, 3.0])


def test_read_data_regression_and_spatial(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2,3\n4,5,6\n")
    X, y = read_data(p, "regression")
    assert X.shape == (2, 2) and list(y) == [3.0, 6.0]
    s = read_data(p, "spatial", target=(9.0, 9.0))
    assert s.locations.shape == (3, 2) and list(s.locations[-1]) == [9.0, 9.0]


def test_read_data_reports_bad_line(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("1.0\n2.0\nthree\n")
    with pytest.raises(ConfigError) as info:
        read_data(p, "iid")
    assert info.value.line == 3


def test_read_data_ragged_rows(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("1,2\n3\n")
    with pytest.raises(ConfigError) as info:
        read_data(p, "regression")
    assert info.value.line == 2


def test_read_data_single_row(tmp_path):
    with pytest.raises(InsufficientDataError):
        read_data(write_column(tmp_path / "d.txt", [1.0]), "iid")


# commands ------------------------------------------------------------------


def test_scenarios_list(capsys):
    assert main(["scenarios", "list"]) == 0
    out = capsys.readouterr().out
    for sid in ("gamma_true", "pareto", "regression_gev", "ts3", "sp2"):
        assert sid in out


def test_calibrate_gamma_draws(tmp_path, capsys):
    y = np.random.default_rng(0).gamma(3.0, 0.5, size=400)
    path = write_column(tmp_path / "g.txt", y)
    rc = main(["calibrate", path, "--model", "gamma", "--alpha", "0.05", "--B", "100"])
    out = parse_output(capsys.readouterr().out)
    assert rc == 0
    assert 0.7 <= float(out["eta_hat"]) <= 1.4
    assert out["converged"] == "true"
    assert float(out["quantile"]) > 0


def test_calibrate_single_row_is_an_error(tmp_path, capsys):
    path = write_column(tmp_path / "one.txt", [2.0])
    assert main(["calibrate", path, "--model", "gamma", "--alpha", "0.1"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "at least two" in err


def test_calibrate_malformed_file_names_line(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("1.0\n2.0\n3.x\n")
    assert main(["calibrate", str(p), "--model", "gamma", "--alpha", "0.1"]) == 2
    assert "line 3" in capsys.readouterr().err


def test_calibrate_timeseries_flag_on_iid_file(tmp_path, capsys):
    y = np.random.default_rng(1).normal(size=120)
    path = write_column(tmp_path / "s.txt", y)
    rc = main(["calibrate", path, "--model", "nig_normal", "--alpha", "0.1", "--B", "50",
               "--timeseries"])
    assert rc in (0, 3)
    out = parse_output(capsys.readouterr().out)
    assert float(out["eta_hat"]) > 0


def test_calibrate_trace_csv(tmp_path, capsys):
    y = np.random.default_rng(2).gamma(2.0, 1.0, size=60)
    path = write_column(tmp_path / "g.txt", y)
    trace = tmp_path / "trace.csv"
    rc = main(["calibrate", path, "--model", "gamma", "--alpha", "0.1", "--B", "40",
               "--trace", str(trace)])
    out = parse_output(capsys.readouterr().out)
    with open(trace) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "eta", "coverage"]
    assert len(rows) >= 2
    assert float(rows[-1][1]) == pytest.approx(float(out["eta_hat"]), rel=1e-5)
    assert rc in (0, 3)


def test_calibrate_regression_file(tmp_path, capsys):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 2))
    y = 1.0 + X @ [0.5, -1.0] + rng.normal(size=80)
    p = tmp_path / "reg.csv"
    rows = np.column_stack([X, y])
    p.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in rows))
    rc = main(["calibrate", str(p), "--model", "regression", "--alpha", "0.1", "--B", "50",
               "--at", "0.5,-0.5"])
    assert rc in (0, 3)
    out = parse_output(capsys.readouterr().out)
    assert np.isfinite(float(out["quantile"]))


def test_calibrate_regression_bad_at(tmp_path, capsys):
    p = tmp_path / "reg.csv"
    p.write_text("1,2,3\n4,5,6\n7,8,10\n")
    assert main(["calibrate", str(p), "--model", "regression", "--alpha", "0.1",
                 "--at", "1"]) == 2
    assert "--at" in capsys.readouterr().err


@pytest.mark.slow
def test_calibrate_spatial_file(tmp_path, capsys):
    from gprc.simgen import spatial_sample

    locs, field, _ = spatial_sample("sp1", 60, np.random.default_rng(4))
    p = tmp_path / "sp.txt"
    lines = (f"{float(a)!r} {float(b)!r} {float(v)!r}" for (a, b), v in zip(locs[:-1], field[:-1]))
    p.write_text("\n".join(lines))
    rc = main(["calibrate", str(p), "--model", "gp", "--alpha", "0.1", "--B", "30"])
    assert rc in (0, 3)
    out = parse_output(capsys.readouterr().out)
    assert np.isfinite(float(out["quantile"]))


def test_experiment_command(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'scenario = "gamma_true"\nn = 25\nalpha = [0.1]\nR = 3\nB = 30\nseed = 5\n'
        'methods = ["gprc", "bayes_eta1"]\noutput = "out/summary.csv"\n')
    assert main(["experiment", str(cfg), "--threads", "1"]) == 0
    out = capsys.readouterr().out
    assert "gprc" in out and "bayes_eta1" in out
    assert (tmp_path / "out" / "summary.csv").exists()


def test_experiment_bad_config(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('scenario = "gamma_true"\nn = 25\nalpha = [0.1]\nmethods = ["oops"]\n')
    assert main(["experiment", str(cfg)]) == 2
    assert "methods" in capsys.readouterr().err
