import json

import pytest

from anneal_co.cli import build_parser, main
from anneal_co.graph import Graph, generate_ba, write_graph

TINY_BENCH = {
    "dataset": {"kind": "mds", "count": 3, "n_min": 9, "n_max": 12},
    "methods": ["annealed", "greedy"],
    "seed_count": 2,
    "solver": {"K": 30, "steps_per_temperature": 3},
}


def _config(tmp_path, data, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_help_documents_every_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--seed", "--config", "--out-dir", "--threads", "--no-timing"):
        assert flag in text
    for cmd in ("generate", "solve", "train", "bench", "ablate-beta", "ablate-schedule", "oracle-check"):
        assert cmd in text


def test_unknown_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_global_flags_work_after_the_subcommand():
    args = build_parser().parse_args(["bench", "--threads", "3", "--seed", "4"])
    assert args.threads == 3 and args.seed == 4 and args.out_dir == "out"
    args = build_parser().parse_args(["--threads", "2", "bench"])
    assert args.threads == 2


def test_solve_writes_solution_json(tmp_path):
    g = tmp_path / "g.txt"
    write_graph(generate_ba(12, 2, 1), g)
    cfg = _config(tmp_path, {"kind": "mis", "graph": "g.txt", "reference": "exact", "solver": {"K": 30}})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out-dir", str(out), "solve", "--no-timing"]) == 0
    data = json.loads((out / "solution.json").read_text())
    assert data["kind"] == "mis" and data["solution"]["feasible"]
    assert 0 < data["solution"]["ratio"] <= 1
    first = (out / "solution.json").read_bytes()
    assert main(["--config", cfg, "--out-dir", str(out), "solve", "--no-timing"]) == 0
    assert (out / "solution.json").read_bytes() == first


def test_solve_greedy_and_mincut(tmp_path):
    g = tmp_path / "g.json"
    write_graph(Graph(4, [(0, 1), (1, 2), (2, 3)]), g)
    out = tmp_path / "o"
    code = main(["solve", "--graph", str(g), "--kind", "mincut", "--method", "greedy",
                 "--volume-bounds", "1", "3", "--out-dir", str(out)])
    assert code == 0
    data = json.loads((out / "solution.json").read_text())
    assert data["solution"]["conductance"] >= 0
    assert main(["solve", "--graph", str(g), "--kind", "mincut", "--out-dir", str(out)]) == 2


def test_runtime_errors_exit_one(tmp_path):
    assert main(["solve", "--graph", str(tmp_path / "missing.txt"), "--out-dir", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["bench", "--config", str(bad), "--out-dir", str(tmp_path)]) == 1
    cfg = _config(tmp_path, {"methods": ["nope"]})
    assert main(["bench", "--config", cfg, "--out-dir", str(tmp_path)]) == 1
    assert main(["solve", "--out-dir", str(tmp_path)]) == 2


def test_generate_writes_graphs_and_manifest(tmp_path):
    out = tmp_path / "gen"
    args = ["generate", "--kind", "mis", "--generator", "rb", "--count", "2", "--format", "dimacs",
            "--out-dir", str(out), "--seed", "3"]
    assert main(args) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["instances"]) == 2
    assert manifest["instances"][0]["known_optimum"] is not None
    assert all((out / e["file"]).exists() for e in manifest["instances"])


def test_oracle_check_exit_codes(tmp_path):
    assert main(["oracle-check", "--kind", "mds", "--n", "7", "--count", "15", "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "oracle_check.json").read_text())
    assert report["unbiased"] == 15 and report["failures"] == []
    code = main(["oracle-check", "--kind", "mis", "--n", "7", "--count", "40",
                 "--penalty-scale", "0.5", "--out-dir", str(tmp_path)])
    assert code == 1
    assert main(["oracle-check", "--kind", "mis", "--n", "40", "--out-dir", str(tmp_path)]) == 2


def _tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.mark.parametrize(
    "command, data",
    [
        (["bench"], TINY_BENCH),
        (["ablate-beta", "--grid", "0,1"], TINY_BENCH),
        (["ablate-schedule", "--kinds", "linear", "--tau0", "0,L"], TINY_BENCH),
        (["train"], {"dataset": {"count": 6, "n_min": 8, "n_max": 9},
                     "validation": {"count": 2, "n_min": 8, "n_max": 9, "seed": 1},
                     "seed_count": 2, "epochs": 2}),
        (["generate", "--count", "3"], {}),
    ],
)
def test_outputs_are_byte_identical_across_runs_and_threads(tmp_path, command, data):
    cfg = _config(tmp_path, data)
    outs = []
    for k, threads in enumerate(["1", "1", "2"]):
        out = tmp_path / f"run{k}"
        assert main(command + ["--config", cfg, "--out-dir", str(out), "--threads", threads, "--no-timing"]) == 0
        outs.append(_tree(out))
    assert outs[0] == outs[1] == outs[2]
    assert outs[0]
