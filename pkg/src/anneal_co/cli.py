"""Command-line entry point (``anneal-co``).

Every subcommand writes its outputs under ``--out-dir``; JSON files are
written with sorted keys so reruns are byte-identical. Wall-clock columns are
the only nondeterministic values; ``--no-timing`` writes them as zero.
"""

from __future__ import annotations

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import bench
from .baselines import greedy
from .energy import Kind, make_instance
from .graph import FORMATS, Graph, GraphFormatError, load_graph, write_graph
from .instances import DatasetSpec, build_dataset, random_instance
from .oracle import exact_optimum, unbiasedness_check
from .solver import SolverConfig, solve

SUFFIX = {"edge-list": ".txt", "dimacs": ".col", "json": ".json"}


class UsageError(Exception):
    """Bad arguments detected after parsing; exits with status 2."""


def _read_config(args) -> dict:
    if not args.config:
        return {}
    return bench.load_config(args.config)


def _timing(args) -> bool | None:
    return False if args.no_timing else None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    data = _read_config(args)
    data = dict(data.get("dataset", data))
    for key, value in (
        ("kind", args.kind),
        ("generator", args.generator),
        ("count", args.count),
        ("n_min", args.n_min),
        ("n_max", args.n_max),
        ("weights", args.weights),
    ):
        if value is not None:
            data[key] = value
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        spec = DatasetSpec.from_dict(data)
    except (TypeError, ValueError) as err:
        raise bench.ConfigError(f"bad dataset spec: {err}") from err
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = args.format
    manifest = []
    for k, (inst, known) in enumerate(build_dataset(spec)):
        name = f"{spec.label}-{k:04d}{SUFFIX[fmt]}"
        write_graph(inst.graph, out / name, fmt)
        entry = {"file": name, "n": inst.n, "m": inst.graph.m, "known_optimum": known}
        if inst.volume_bounds is not None:
            entry["volume_bounds"] = list(inst.volume_bounds)
        manifest.append(entry)
    payload = {"dataset": {**asdict(spec), "files": list(spec.files)}, "instances": manifest}
    bench.dump_json(payload, out / "manifest.json")
    print(f"wrote {len(manifest)} graphs and {out / 'manifest.json'}")
    return 0


def _solve_graph(data: dict, args, base: Path) -> Graph:
    if args.graph:
        return load_graph(args.graph, args.format)
    g = data.get("graph")
    if isinstance(g, dict):
        return Graph.from_dict(g)
    if isinstance(g, str):
        return load_graph(base / g, data.get("format"))
    raise UsageError("solve needs a graph: pass --graph or set \"graph\" in the config")


def cmd_solve(args) -> int:
    data = _read_config(args)
    base = Path(args.config).parent if args.config else Path(".")
    graph = _solve_graph(data, args, base)
    kind = Kind.parse(args.kind or data.get("kind", "mds"))
    bounds = data.get("volume_bounds")
    if args.volume_bounds is not None:
        bounds = args.volume_bounds
    if kind is Kind.MINCUT and bounds is None:
        raise UsageError("mincut needs volume bounds (--volume-bounds LO HI)")
    inst = make_instance(
        kind,
        graph,
        penalty_scale=float(data.get("penalty_scale", 1.0)),
        volume_bounds=None if bounds is None else tuple(float(b) for b in bounds),
    )
    method = bench.MethodSpec.parse(data.get("method", "annealed") if args.method is None else args.method)
    solver = bench._apply(SolverConfig(), data.get("solver", {}))
    if args.seed is not None:
        solver = replace(solver, seed=args.seed)
    reference = data.get("reference")
    if reference == "exact":
        reference = None if kind is Kind.MINCUT else exact_optimum(inst)[0]
    timing = not args.no_timing
    if method.base == "greedy":
        sol = greedy(inst, reference=reference, timing=timing)
    else:
        sol = solve(inst, method.config(solver), reference=reference, timing=timing)
    payload = {
        "kind": kind.value,
        "method": method.name,
        "n": inst.n,
        "seed": solver.seed,
        "solution": sol.to_dict(),
    }
    if "conductance" in sol.extra:
        c = sol.extra["conductance"]
        payload["solution"]["conductance"] = c if np.isfinite(c) else None
    bench.dump_json(payload, Path(args.out_dir) / "solution.json")
    print(json.dumps(payload["solution"], sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    cfg = bench.BenchConfig.from_dict(_read_config(args), seed=args.seed, timing=_timing(args))
    report = bench.run_benchmark(cfg, threads=args.threads)
    paths = bench.write_report(report, args.out_dir, args.stem or "bench")
    sys.stdout.write(report.to_table())
    print("wrote " + ", ".join(map(str, paths)))
    return 0


def _grid(text: str | None, numeric: bool = True):
    if text is None:
        return None
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError("empty grid")
    if not numeric:
        return items
    out = []
    for t in items:
        try:
            out.append(float(t))
        except ValueError:
            out.append(t)
    return out


def cmd_ablate_beta(args) -> int:
    data = _read_config(args)
    cfg = bench.BenchConfig.from_dict(data, seed=args.seed, timing=_timing(args))
    grid = _grid(args.grid) or data.get("beta_grid", bench.DEFAULT_BETA_GRID)
    if any(isinstance(b, str) for b in grid):
        raise UsageError("--grid takes numbers")
    report = bench.ablate_beta(cfg, grid, threads=args.threads)
    paths = bench.write_report(report, args.out_dir, args.stem or "ablate_beta")
    sys.stdout.write(report.to_table())
    print("wrote " + ", ".join(map(str, paths)))
    return 0


def cmd_ablate_schedule(args) -> int:
    data = _read_config(args)
    cfg = bench.BenchConfig.from_dict(data, seed=args.seed, timing=_timing(args))
    kinds = _grid(args.kinds, numeric=False) or data.get("schedule_kinds", ["linear", "concave", "convex"])
    tau0 = _grid(args.tau0) or data.get("tau0_grid", list(bench.DEFAULT_TAU0_GRID))
    for t in tau0:
        bench.parse_tau0(t)
    report = bench.ablate_schedule(cfg, kinds, tau0, threads=args.threads)
    paths = bench.write_report(report, args.out_dir, args.stem or "ablate_schedule")
    sys.stdout.write(report.to_table())
    print("wrote " + ", ".join(map(str, paths)))
    return 0


def cmd_train(args) -> int:
    cfg = bench.TrainConfig.from_dict(_read_config(args), seed=args.seed)
    report = bench.run_training(cfg, threads=args.threads)
    out = Path(args.out_dir)
    stem = args.stem or "train"
    _write(out / f"{stem}.csv", report.to_csv())
    _write(out / f"{stem}_runs.csv", report.per_seed_csv())
    for run in report.runs:
        tag = f"{stem}_{run.method}_seed{run.seed}"
        _write(out / f"{tag}_metrics.csv", run.result.metrics_csv())
        _write(out / f"{tag}_params.json", run.result.params.to_json() + "\n")
    sys.stdout.write(report.to_csv())
    return 0


def cmd_oracle_check(args) -> int:
    kind = Kind.parse(args.kind)
    if not 1 <= args.n <= 20:
        raise UsageError("--n must be between 1 and 20 for exhaustive checks")
    if args.count < 1:
        raise UsageError("--count must be positive")
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    failures = []
    for k in range(args.count):
        inst = random_instance(kind, args.n, rng, penalty_scale=args.penalty_scale)
        if not unbiasedness_check(inst):
            failures.append(k)
    payload = {
        "kind": kind.value,
        "n": args.n,
        "count": args.count,
        "penalty_scale": args.penalty_scale,
        "seed": 0 if args.seed is None else args.seed,
        "unbiased": args.count - len(failures),
        "failures": failures,
    }
    bench.dump_json(payload, Path(args.out_dir) / "oracle_check.json")
    status = "ok" if not failures else "FAILED"
    print(f"{kind.value}: {payload['unbiased']}/{args.count} unbiased ({status})")
    return 0 if not failures else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(None), help="base seed (overrides the config)")
    parser.add_argument("--config", default=d(None), help="JSON config file")
    parser.add_argument("--out-dir", default=d("out"), help="directory for outputs (default: out)")
    parser.add_argument("--threads", type=int, default=d(1), help="worker processes (default: 1)")
    parser.add_argument(
        "--no-timing",
        action="store_true",
        default=d(False),
        help="write wall times as 0 so outputs are byte-identical across runs",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anneal-co",
        description="Annealed energy-based solvers for MIS, max clique, MDS and local min-cut.",
    )
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=fn)
        return p

    p = add("generate", cmd_generate, "write a generated dataset as graph files plus manifest.json")
    p.add_argument("--kind", choices=[k.value for k in Kind], help="problem kind (affects RB optima and mincut windows)")
    p.add_argument("--generator", choices=["ba", "rb", "gnp"], help="graph family")
    p.add_argument("--count", type=int, help="number of graphs")
    p.add_argument("--n-min", type=int, help="smallest node count (ba, gnp)")
    p.add_argument("--n-max", type=int, help="largest node count (ba, gnp)")
    p.add_argument("--weights", choices=["unit", "integer", "random"], help="node weight mode")
    p.add_argument("--format", choices=FORMATS, default="edge-list", help="output graph format")

    p = add("solve", cmd_solve, "solve one instance and write solution.json")
    p.add_argument("--graph", help="graph file (overrides the config's \"graph\")")
    p.add_argument("--format", choices=FORMATS, help="graph file format (default: from the suffix)")
    p.add_argument("--kind", choices=[k.value for k in Kind], help="problem kind")
    p.add_argument("--method", choices=list(bench.BASES), help="solver method")
    p.add_argument("--volume-bounds", type=float, nargs=2, metavar=("LO", "HI"), help="mincut volume window")

    p = add("train", cmd_train, "train the amortized model (annealed, and constant for comparison)")
    p.add_argument("--stem", help="output file stem (default: train)")

    p = add("bench", cmd_bench, "run every configured method and write a CSV and a text table")
    p.add_argument("--stem", help="output file stem (default: bench)")

    p = add("ablate-beta", cmd_ablate_beta, "sweep a global multiplier on the default penalties")
    p.add_argument("--grid", help="comma-separated multipliers (default: 0,0.25,0.5,0.75,1,2,3,5)")
    p.add_argument("--stem", help="output file stem (default: ablate_beta)")

    p = add("ablate-schedule", cmd_ablate_schedule, "sweep schedule shape and starting temperature")
    p.add_argument("--kinds", help="comma-separated schedule shapes (default: linear,concave,convex)")
    p.add_argument("--tau0", help="comma-separated starting temperatures; 'L' or '<s>L' scale the Lipschitz bound")
    p.add_argument("--stem", help="output file stem (default: ablate_schedule)")

    p = add("oracle-check", cmd_oracle_check, "check exhaustively that random instances keep their optima")
    p.add_argument("--kind", required=True, choices=[k.value for k in Kind], help="problem kind")
    p.add_argument("--n", type=int, default=12, help="nodes per instance (default: 12)")
    p.add_argument("--count", type=int, default=200, help="number of instances (default: 200)")
    p.add_argument("--penalty-scale", type=float, default=1.0, help="multiplier on the default penalties")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return 2
    except (bench.ConfigError, GraphFormatError, OSError, ValueError) as err:
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
