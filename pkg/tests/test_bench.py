import csv
import io

import numpy as np
import pytest

from residci import bench
from residci.bench import ExperimentConfig, TestSpec, mean_se, precision_recall, rejection_rates, run


def parse(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_rejection_rates_on_uniform_grid():
    p = np.arange(1, 1001) / 1000
    for alpha, rate, _ in rejection_rates(p, [0.001, 0.01, 0.05, 0.2, 1.0]):
        assert rate == pytest.approx(alpha, abs=1e-12)


def test_mean_se():
    v = [1.0, 2.0, 4.0, 5.0]
    m, se = mean_se(v)
    assert m == 3.0 and se == pytest.approx(np.std(v, ddof=1) / 2)
    assert mean_se([0.3]) == (0.3, 0.0)


def test_precision_recall_conventions():
    assert precision_recall([], []) == (1.0, 1.0)
    assert precision_recall([True, False], [True, True]) == (1.0, 0.5)
    assert precision_recall([False, False], [False, True]) == (1.0, 0.0)


def test_test_spec_parsing():
    assert TestSpec.parse("q") == TestSpec("q", "glm")
    assert TestSpec.parse("q:forest") == TestSpec("q", "forest")
    assert TestSpec.parse("g2mc") == TestSpec("g2mc", "")
    with pytest.raises(ValueError):
        TestSpec.parse("chi")


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("calibration", replicates=0)
    cfg = ExperimentConfig("discrimination")
    assert cfg.beta == list(bench.BETA_GRID)


def test_calibration_rows():
    cfg = ExperimentConfig("calibration", tests=["q:saturated", "g2"], n=[50], k=[1], alpha=[0.05, 0.5],
                           replicates=20)
    rows = parse(run(cfg))
    assert list(rows[0]) == bench.HEADER
    rates = [r for r in rows if r["metric"] == "type1_error"]
    assert len(rates) == 4
    for r in rates:
        assert 0 <= float(r["value"]) <= 1 and r["replicates"] == "20" and r["beta"] == ""
    assert sum(r["metric"] == "degenerate" for r in rows) == 2


def test_discrimination_null_effect():
    cfg = ExperimentConfig("discrimination", tests=["q:glm", "g2"], n=[300], k=[1], beta=[0.0],
                           replicates=30)
    for r in parse(run(cfg)):
        if r["metric"] == "accuracy":
            assert abs(float(r["value"]) - 0.5) <= 0.1


def test_discrimination_ordinal_runs():
    cfg = ExperimentConfig("discrimination", tests=["q:glm"], n=[200], k=[1], replicates=3,
                           protocol="ordinal")
    rows = parse(run(cfg))
    assert rows[0]["beta"] == "" and rows[0]["metric"] == "accuracy"


def test_modeltest_oracle_is_perfect():
    cfg = ExperimentConfig("modeltest", tests=["oracle"], n=[100], p_edge=[0.2, 1.0], n_vars=6, replicates=3)
    rows = parse(run(cfg))
    for r in rows:
        if r["metric"] in ("precision", "recall"):
            assert float(r["value"]) == 1.0
    claims = {r["p_edge"]: float(r["value"]) for r in rows if r["metric"] == "claims"}
    assert claims["1"] == 0.0


def test_structure_oracle_f1_is_one():
    cfg = ExperimentConfig("structure", tests=["oracle"], n=[100], p_edge=[0.3], n_vars=8, replicates=4)
    f1 = [float(r["value"]) for r in parse(run(cfg)) if r["metric"] == "f1"]
    assert f1 == [1.0]


def test_structure_file_mode(fixtures):
    cfg = ExperimentConfig("structure", tests=["g2"], n=[200, 400], replicates=2,
                           data=str(fixtures / "small_dag.csv"), schema=str(fixtures / "small_dag_schema.json"),
                           truth=str(fixtures / "small_dag_truth.txt"))
    rows = [r for r in parse(run(cfg)) if r["metric"] == "f1"]
    assert [r["n"] for r in rows] == ["200", "400"]
    assert all(r["p_edge"] == "" for r in rows)


def test_adult_pipeline_on_synthetic_file(adult_like):
    data, schema = adult_like()
    full = bench.prepare_adult(data, schema)
    assert full.meta("age").levels == bench.AGE_LABELS and full.meta("age").kind == "ordinal"
    assert full.meta("hours-per-week").levels == bench.HOURS_LABELS
    truth = bench.dependence_truth(full)
    assert frozenset(("sex", "relationship")) in truth
    cfg = ExperimentConfig("adult", tests=["g2"], n=[200], replicates=2, data=str(data), schema=str(schema))
    rows = parse(run(cfg))
    assert {r["metric"] for r in rows} == {"precision", "recall", "f1", "edges"}


def test_adult_missing_file():
    with pytest.raises(FileNotFoundError):
        run(ExperimentConfig("adult", data="/nonexistent/adult.csv"))


def test_runtime_rows():
    cfg = ExperimentConfig("runtime", tests=["q:glm", "g2"], k=[1, 2, 3], tests_per_point=3)
    rows = parse(run(cfg))
    assert [(r["test"], r["k"]) for r in rows] == [("q", "1"), ("q", "2"), ("q", "3"),
                                                   ("g2", "1"), ("g2", "2"), ("g2", "3")]
    assert all(float(r["value"]) > 0 for r in rows)


def test_parallel_output_is_identical():
    cfg = dict(tests=["q:glm", "g2"], n=[60], k=[1, 2], replicates=6, alpha=[0.05])
    a = run(ExperimentConfig("calibration", jobs=1, **cfg))
    b = run(ExperimentConfig("calibration", jobs=2, **cfg))
    assert a == b


def test_shipped_adult_schema_loads_eleven_columns(tmp_path):
    from residci.data import read_schema

    schema = read_schema(bench.default_adult_schema())
    names = [e["name"] for e in schema]
    assert len(names) == 11
    rng = np.random.default_rng(1)
    n = 300
    values = {e["name"]: [f"{e['name']}_{v}" for v in rng.integers(0, 3, n)] for e in schema}
    values["age"] = [str(v) for v in rng.integers(17, 90, n)]
    values["hours-per-week"] = [str(v) for v in rng.integers(1, 99, n)]
    values["income"] = list(rng.choice(["<=50K", ">50K"], n))
    header = names + ["fnlwgt"]
    lines = [",".join(header)] + [",".join([values[c][i] for c in names] + ["1"]) for i in range(n)]
    path = tmp_path / "adult.csv"
    path.write_text("\n".join(lines) + "\n")
    ds = bench.prepare_adult(path, bench.default_adult_schema())
    assert ds.names == names
    assert ds.meta("age").kind == "ordinal" and ds.meta("income").kind == "binary"


@pytest.mark.slow
def test_runtime_budgets():
    cfg = ExperimentConfig("runtime", tests=["q:glm", "g2", "g2mc"], k=[3, 10], tests_per_point=10)
    t = {(r["test"], r["k"]): float(r["value"]) for r in parse(run(cfg))}
    assert t[("q", "10")] < 1.0
    assert t[("g2mc", "3")] >= 10 * t[("g2", "3")]
