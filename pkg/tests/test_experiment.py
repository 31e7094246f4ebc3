import csv
from pathlib import Path

import numpy as np
import pytest

from gprc.errors import ConfigError
from gprc.experiment import (
    ExperimentConfig,
    default_threads,
    load_config,
    parse_config,
    run_experiment,
    run_replication,
)


def small(**kw):
    base = dict(scenario="gamma_true", n=30, alphas=(0.1,), R=4, B=40, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


# parsing -------------------------------------------------------------------


def test_parse_minimal_document():
    cfg = parse_config({"scenario": "pareto", "n": 50, "alpha": 0.05})
    assert cfg.model == "lognormal"
    assert cfg.alphas == (0.05,)
    assert cfg.bootstrap_kind == "iid"


def test_parse_tables():
    cfg = parse_config({
        "scenario": {"id": "pareto", "params": {"a": 3.0}},
        "model": {"id": "lognormal", "prior": {"b": 2.0}},
        "n": 50, "alpha": [0.1, 0.05], "methods": ["gprc", "plugin"],
        "calibration": {"kappa0": 0.5, "max_iter": 500},
    })
    assert cfg.scenario_params == {"a": 3.0}
    assert cfg.prior == {"b": 2.0}
    assert cfg.methods == ("gprc", "plugin")
    assert cfg.kappa0 == 0.5 and cfg.max_iter == 500


@pytest.mark.parametrize("doc, path", [
    ({"scenario": "nope", "n": 10, "alpha": 0.1}, "scenario.id"),
    ({"scenario": "pareto", "n": 1, "alpha": 0.1}, "n"),
    ({"scenario": "pareto", "n": 10, "alpha": [0.1, "x"]}, "alpha[1]"),
    ({"scenario": "pareto", "n": 10, "alpha": 1.5}, "alpha"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "methods": ["magic"]}, "methods"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "model": "gp"}, "model.id"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "model": "banana"}, "model.id"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "calibration": {"speed": 1}},
     "calibration.speed"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "calibration": {"bootstrap": "spatial"}},
     "calibration.bootstrap"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1,
      "model": {"id": "lognormal", "prior": {"zeta": 1.0}}}, "model.prior"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "threads": 0}, "threads"),
    ({"scenario": "pareto", "n": 10}, "alpha"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "colour": "red"}, "colour"),
    ({"scenario": "pareto", "n": 10, "alpha": 0.1, "methods": ["bootstrap_raw"]}, "methods"),
])
def test_parse_errors_name_the_field(doc, path):
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    assert info.value.path == path
    assert str(info.value).startswith(f"{path}: ")


def test_load_config_reports_line(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('scenario = "pareto"\nn = 10\nalpha = [0.1,\n')
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert info.value.line is not None and info.value.line >= 3
    assert "line" in str(info.value)


def test_load_config_resolves_paths_relative_to_file(tmp_path):
    sub = tmp_path / "cfg"
    sub.mkdir()
    p = sub / "run.toml"
    p.write_text('scenario = "gamma_true"\nn = 20\nalpha = 0.1\noutput = "out/summary.csv"\n')
    cfg = load_config(p)
    assert cfg.output == str(sub / "out" / "summary.csv")


def test_default_threads_env(monkeypatch):
    monkeypatch.setenv("GPRC_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("GPRC_THREADS", "many")
    with pytest.raises(ConfigError):
        default_threads()


# running -------------------------------------------------------------------


def test_single_replication_single_row():
    summary, tidy = run_experiment(small(R=1, methods=("bayes_eta1",)), threads=1)
    assert len(summary) == 1 and len(tidy) == 1
    row = summary[0]
    assert row["eta_hat"] == 1.0
    assert row["coverage"] in (0.0, 1.0)


def test_summary_shape_and_fields():
    summary, tidy = run_experiment(small(alphas=(0.1, 0.05), methods=("gprc", "plugin")),
                                   threads=1)
    assert [(r["method"], r["alpha"]) for r in summary] == [
        ("gprc", 0.1), ("gprc", 0.05), ("plugin", 0.1), ("plugin", 0.05)]
    assert len(tidy) == 4 * 4
    gp = summary[0]
    assert 0.0 <= gp["coverage"] <= 1.0 and gp["eta_hat"] > 0
    assert np.isfinite(gp["relative_score"])


def test_reruns_are_byte_identical(tmp_path):
    paths = []
    for k in range(2):
        out = tmp_path / f"s{k}.csv"
        tidy = tmp_path / f"t{k}.csv"
        run_experiment(small(output=str(out), tidy_output=str(tidy)), threads=1)
        paths.append((out.read_bytes(), tidy.read_bytes()))
    assert paths[0] == paths[1]


def test_thread_count_does_not_change_output(tmp_path):
    blobs = []
    for threads in (1, 2):
        tidy = tmp_path / f"t{threads}.csv"
        run_experiment(small(R=6, tidy_output=str(tidy)), threads=threads)
        blobs.append(tidy.read_bytes())
    assert blobs[0] == blobs[1]


def test_replications_are_independent_of_R():
    a = run_replication(small(R=3), 2)
    b = run_replication(small(R=10), 2)
    assert a[0] == b[0]
    assert [r.q_hat for r in a[1]] == [r.q_hat for r in b[1]]


def test_seed_changes_output():
    a, _ = run_experiment(small(seed=1, R=3), threads=1)
    b, _ = run_experiment(small(seed=2, R=3), threads=1)
    assert a[0]["score"] != b[0]["score"]


def test_replication_errors_are_recorded_not_fatal(tmp_path):
    # n = 2 with a block bootstrap is too short for the AR(1) fit
    cfg = small(scenario="ts1", n=2, R=2, B=10, methods=("gprc", "plugin"),
                tidy_output=str(tmp_path / "t.csv"))
    summary, tidy = run_experiment(cfg, threads=1)
    assert any(r["error"] for r in tidy)
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(tidy)
    assert any(r["error"] for r in rows)
    assert summary[0]["errors"] >= 1


def test_csv_columns(tmp_path):
    from gprc.experiment import TIDY_COLUMNS
    from gprc.metrics import SUMMARY_COLUMNS

    cfg = small(output=str(tmp_path / "a" / "s.csv"), tidy_output=str(tmp_path / "a" / "t.csv"))
    run_experiment(cfg, threads=1)
    with open(tmp_path / "a" / "s.csv") as fh:
        assert tuple(next(csv.reader(fh))) == tuple(SUMMARY_COLUMNS)
    with open(tmp_path / "a" / "t.csv") as fh:
        assert tuple(next(csv.reader(fh))) == TIDY_COLUMNS


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.toml")),
                         ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.output.startswith(str(path.parent))
