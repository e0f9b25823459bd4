import csv
import io

import numpy as np
import pytest

from anneal_co.bench import (
    CSV_COLUMNS,
    BenchConfig,
    ConfigError,
    MethodSpec,
    TrainConfig,
    ablate_beta,
    ablate_schedule,
    aggregate,
    parse_tau0,
    prepare,
    reference_value,
    run_benchmark,
    run_training,
)
from anneal_co.energy import Kind, make_instance
from anneal_co.graph import generate_ba
from anneal_co.oracle import brute_force_optimum
from anneal_co.solver import Solution

SMALL = {
    "name": "tiny",
    "dataset": {"kind": "mds", "count": 4, "n_min": 10, "n_max": 14, "seed": 3},
    "methods": ["annealed", "constant", "mfa", "greedy"],
    "seeds": [0, 1],
    "solver": {"K": 40, "steps_per_temperature": 4},
    "timing": False,
}


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_report_columns_and_bounds():
    report = run_benchmark(BenchConfig.from_dict(SMALL))
    rows = _rows(report.to_csv())
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[1] for r in rows[1:]] == ["annealed", "constant", "mfa", "greedy"]
    for r in report.rows:
        assert 0 < r.mean_ratio <= 1 + 1e-12
        assert r.feasibility_rate == 1.0
        assert r.seed_count == 2
    assert "mean_ratio" in report.to_table().splitlines()[0]


def test_rb_ratios_never_exceed_one():
    cfg = BenchConfig.from_dict(
        {
            "dataset": {"kind": "mis", "generator": "rb", "count": 3, "groups": 4, "group_size": 3, "seed": 1},
            "methods": ["annealed", "mfa", "greedy"],
            "seeds": [0],
            "solver": {"K": 40, "steps_per_temperature": 4},
            "timing": False,
        }
    )
    for item in prepare(cfg):
        assert item.reference == -4.0
    for row in run_benchmark(cfg).rows:
        assert row.mean_ratio <= 1.0


def test_byte_identical_across_runs_and_threads():
    cfg = BenchConfig.from_dict(SMALL)
    a = run_benchmark(cfg).to_csv()
    assert run_benchmark(cfg).to_csv() == a
    assert run_benchmark(cfg, threads=2).to_csv() == a


def test_missing_reference_is_reported_as_na():
    cfg = BenchConfig.from_dict({**SMALL, "exact_cap": 5, "methods": ["greedy"]})
    row = _rows(run_benchmark(cfg).to_csv())[1]
    assert row[3] == "NA" and row[4] == "NA"
    assert float(row[7]) > 0


def test_reference_values():
    inst = make_instance("mds", generate_ba(12, 2, 0))
    assert reference_value(inst, None, 20) == brute_force_optimum(inst)[0]
    assert reference_value(inst, -7.0, 20) == -7.0
    assert reference_value(inst, None, 10) is None


def test_mincut_rows_report_conductance():
    cfg = BenchConfig.from_dict(
        {
            "dataset": {"kind": "mincut", "generator": "gnp", "p": 0.4, "count": 3, "n_min": 8, "n_max": 10},
            "methods": ["greedy", "mfa"],
            "seeds": [0],
            "solver": {"K": 20},
            "timing": False,
        }
    )
    report = run_benchmark(cfg)
    assert report.metric == "conductance"
    assert "mean_conductance" in report.to_table()
    for row in report.rows:
        assert row.mean_ratio >= 0 and row.feasibility_rate == 1.0


def test_aggregate_std_is_over_seed_means():
    runs = [
        [Solution(np.zeros(1), 1.0, True, 1.0), Solution(np.zeros(1), 1.0, True, 0.5)],
        [Solution(np.zeros(1), 1.0, True, 1.0), Solution(np.zeros(1), 1.0, True, 0.5)],
    ]
    row = aggregate("d", "m", runs, Kind.MDS)
    assert row.mean_ratio == 0.75 and row.std_ratio == 0.25


def test_beta_ablation_grid():
    cfg = BenchConfig.from_dict({**SMALL, "seeds": [0]})
    report = ablate_beta(cfg, [0.0, 1.0])
    rows = _rows(report.to_csv())
    assert rows[0][:2] == ["dataset", "beta"]
    assert [r[1] for r in rows[1:]] == ["0", "1"]
    weighted = BenchConfig.from_dict({**SMALL, "dataset": {**SMALL["dataset"], "weights": "random"}})
    with pytest.raises(ConfigError):
        ablate_beta(weighted)


def test_schedule_ablation_shape_and_degenerate_flag():
    cfg = BenchConfig.from_dict({**SMALL, "seeds": [0]})
    kinds, grid = ["linear", "convex"], [0.0, 2.0, "L"]
    report = ablate_schedule(cfg, kinds, grid)
    rows = _rows(report.to_csv())[1:]
    assert len(rows) == len(kinds) * len(grid)
    assert [(r[1], r[2]) for r in rows] == [(k, str(t)) for k in kinds for t in grid]
    assert [r[3] for r in rows] == ["true", "false", "false"] * 2
    assert report.cell("convex", "L").extra["kind"] == "convex"


def test_parse_tau0():
    assert parse_tau0(0.5) == ("abs", 0.5)
    assert parse_tau0("L") == ("rel", 1.0)
    assert parse_tau0("0.01L") == ("rel", 0.01)
    for bad in (-1.0, "x", "abcL", True):
        with pytest.raises(ConfigError):
            parse_tau0(bad)


def test_config_errors():
    for bad in (
        {"methods": ["nope"]},
        {"methods": ["mfa", "mfa"]},
        {"dataset": {"colour": 1}},
        {"solver": {"steps_per_temperature": 0}},
        {"seeds": []},
    ):
        with pytest.raises(ConfigError):
            BenchConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        MethodSpec.parse({"name": "x", "base": "annealed", "extra": 1})


def test_seed_override_counts_up():
    cfg = BenchConfig.from_dict({"seeds": [4, 9]}, seed=10)
    assert cfg.seeds == (10, 11)


def test_training_runs_are_deterministic():
    data = {
        "dataset": {"count": 8, "n_min": 8, "n_max": 10},
        "validation": {"count": 3, "n_min": 8, "n_max": 10, "seed": 5},
        "seeds": [0, 1],
        "epochs": 3,
    }
    cfg = TrainConfig.from_dict(data)
    report = run_training(cfg)
    assert [r.method for r in report.runs] == ["annealed", "annealed", "constant", "constant"]
    assert report.to_csv() == run_training(cfg, threads=2).to_csv()
    assert report.per_seed_csv() == run_training(cfg).per_seed_csv()
    for r in report.runs:
        assert 0 < r.val_ratio <= 1 and r.rel_change > 0
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({**data, "clip_norm": 0})
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({**data, "learning_rate": 1})
