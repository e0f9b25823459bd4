"""Benchmark harness: datasets with reference optima, method runs and CSV reports.

A benchmark config is a JSON object::

    {
      "name": "mds-desk",
      "dataset": {"kind": "mds", "generator": "ba", "count": 50, ...},
      "methods": ["annealed", "mfa", "greedy",
                  {"name": "annealed-convex", "base": "annealed",
                   "solver": {"schedule_kind": "convex"}}],
      "seeds": [0, 1, 2, 3, 4],
      "solver": {"steps_per_temperature": 50, "lr_scale": 0.4},
      "exact_cap": 40,
      "timing": true
    }

``seeds`` may be replaced by ``"seed_count"``, counted up from ``"seed"``.
Method bases are ``annealed`` (noisy gradient descent on the cooling
schedule), ``constant`` (same budget at a fixed ``tauK``), ``mfa`` and
``greedy``. Ratios use the exact optimum (brute force or branch and bound up
to ``exact_cap`` nodes) or the generator's known optimum; mincut rows report
mean conductance in the ratio columns instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .baselines import greedy
from .energy import Kind, ProblemInstance
from .instances import DatasetSpec, build_dataset
from .oracle import exact_optimum
from .schedule import constant_schedule, make_schedule
from .solver import Solution, SolverConfig, solve_many

BASES = ("annealed", "constant", "mfa", "greedy")
CSV_COLUMNS = (
    "dataset",
    "method",
    "seed_count",
    "mean_ratio",
    "std_ratio",
    "mean_time_s",
    "feasibility_rate",
    "mean_objective",
)
DEFAULT_BETA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 3.0, 5.0)
DEFAULT_TAU0_GRID = (0.0, 0.1, 0.5, 1.0, 2.0, 5.0, "0.01L", "L")
DEFAULT_EXACT_CAP = 40


class ConfigError(ValueError):
    """Malformed benchmark configuration."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    name: str
    base: str
    solver: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, item: str | dict) -> "MethodSpec":
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError(f"method entries need a name, got {item!r}")
        base = item.get("base", item["name"])
        if base not in BASES:
            raise ConfigError(f"unknown method base {base!r}; expected one of {BASES}")
        extra = set(item) - {"name", "base", "solver"}
        if extra:
            raise ConfigError(f"unknown method keys: {sorted(extra)}")
        return cls(item["name"], base, dict(item.get("solver", {})))

    def config(self, solver: SolverConfig) -> SolverConfig:
        cfg = _apply(solver, self.solver)
        if self.base == "mfa":
            return replace(cfg, optimizer="mfa")
        if self.base == "constant":
            return replace(cfg, optimizer="langevin", schedule=constant_schedule(cfg.tauK, cfg.K))
        return replace(cfg, optimizer="langevin") if self.base == "annealed" else cfg


def _apply(solver: SolverConfig, overrides: dict) -> SolverConfig:
    if not overrides:
        return solver
    data = solver.to_dict()
    data.update(overrides)
    try:
        return SolverConfig.from_dict(data)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad solver settings: {err}") from err


@dataclass(frozen=True)
class BenchConfig:
    name: str
    dataset: DatasetSpec
    methods: tuple[MethodSpec, ...]
    seeds: tuple[int, ...]
    solver: SolverConfig
    exact_cap: int = DEFAULT_EXACT_CAP
    timing: bool = True
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, data: dict, seed: int | None = None, timing: bool | None = None) -> "BenchConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        try:
            dataset = DatasetSpec.from_dict(data.get("dataset", {}))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad dataset spec: {err}") from err
        methods = tuple(MethodSpec.parse(m) for m in data.get("methods", ["annealed", "mfa", "greedy"]))
        if len({m.name for m in methods}) != len(methods):
            raise ConfigError("method names must be unique")
        base_seed = int(data.get("seed", 0)) if seed is None else int(seed)
        if "seeds" in data and seed is None:
            seeds = tuple(int(s) for s in data["seeds"])
        else:
            count = int(data.get("seed_count", len(data.get("seeds", [])) or 5))
            seeds = tuple(range(base_seed, base_seed + count))
        if not seeds:
            raise ConfigError("need at least one seed")
        solver = _apply(SolverConfig(), data.get("solver", {}))
        return cls(
            name=str(data.get("name", dataset.label)),
            dataset=dataset,
            methods=methods,
            seeds=seeds,
            solver=solver,
            exact_cap=int(data.get("exact_cap", DEFAULT_EXACT_CAP)),
            timing=bool(data.get("timing", True)) if timing is None else timing,
            raw=data,
        )


def load_config(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from err


# ---------------------------------------------------------------------------
# Datasets and references
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Item:
    instance: ProblemInstance
    reference: float | None


def reference_value(inst: ProblemInstance, known: float | None, exact_cap: int) -> float | None:
    if known is not None:
        return float(known)
    if inst.kind is Kind.MINCUT or inst.n > exact_cap:
        return None
    return exact_optimum(inst)[0]


def _reference_task(args) -> float | None:
    return reference_value(*args)


def prepare(config: BenchConfig, threads: int = 1) -> list[Item]:
    pairs = build_dataset(config.dataset)
    refs = _map(_reference_task, [(inst, known, config.exact_cap) for inst, known in pairs], threads)
    return [Item(inst, ref) for (inst, _), ref in zip(pairs, refs)]


def _map(fn: Callable, tasks: Sequence, threads: int) -> list:
    """Ordered map, in-process or over worker processes; results do not depend on ``threads``."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# Running methods
# ---------------------------------------------------------------------------


def run_method(
    method: MethodSpec,
    inst: ProblemInstance,
    reference: float | None,
    seeds: Sequence[int],
    solver: SolverConfig,
    timing: bool = True,
) -> list[Solution]:
    """One solution per seed. Greedy is seed-free and runs once."""
    if method.base == "greedy":
        sol = greedy(inst, reference=reference, timing=timing)
        return [sol] * len(seeds)
    return solve_many(inst, method.config(solver), seeds, reference=reference, timing=timing)


def _method_task(args) -> list[Solution]:
    return run_method(*args)


def _fmt(v: float | None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return format(float(v), ".10g")


@dataclass
class Row:
    """Aggregate over ``instances x seeds`` runs of one method on one dataset."""

    dataset: str
    method: str
    seed_count: int
    mean_ratio: float | None
    std_ratio: float | None
    mean_time_s: float
    feasibility_rate: float
    mean_objective: float
    extra: dict = field(default_factory=dict)

    def cells(self) -> list[str]:
        return [
            self.dataset,
            self.method,
            str(self.seed_count),
            _fmt(self.mean_ratio),
            _fmt(self.std_ratio),
            _fmt(self.mean_time_s),
            _fmt(self.feasibility_rate),
            _fmt(self.mean_objective),
        ]


def aggregate(dataset: str, method: str, runs: list[list[Solution]], kind: Kind) -> Row:
    """``runs[i][s]`` is the solution for instance ``i`` and seed ``s``.

    ``std_ratio`` is the spread of the per-seed dataset means.
    """
    S = len(runs[0]) if runs else 0
    sols = [sol for per in runs for sol in per]
    if kind is Kind.MINCUT:
        metric = np.array([[s.extra["conductance"] for s in per] for per in runs], dtype=float)
    elif all(s.ratio is not None for s in sols):
        metric = np.array([[s.ratio for s in per] for per in runs], dtype=float)
    else:
        metric = None
    mean = std = None
    if metric is not None and metric.size:
        mean = float(metric.mean())
        std = float(metric.mean(axis=0).std())
    return Row(
        dataset=dataset,
        method=method,
        seed_count=S,
        mean_ratio=mean,
        std_ratio=std,
        mean_time_s=float(np.mean([s.wall_time for s in sols])) if sols else 0.0,
        feasibility_rate=float(np.mean([s.feasible for s in sols])) if sols else 0.0,
        mean_objective=float(np.mean([s.objective for s in sols])) if sols else 0.0,
        extra={"per_seed": None if metric is None else metric.mean(axis=0).tolist()},
    )


@dataclass
class BenchReport:
    rows: list[Row]
    columns: tuple[str, ...] = CSV_COLUMNS
    metric: str = "ratio"

    def row(self, method: str) -> Row:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    def to_table(self) -> str:
        header = list(self.columns)
        if self.metric != "ratio":
            header = [h.replace("ratio", self.metric) for h in header]
        body = [r.cells() for r in self.rows]
        widths = [max(len(h), *(len(b[k]) for b in body)) if body else len(h) for k, h in enumerate(header)]
        lines = ["  ".join(h.ljust(wd) for h, wd in zip(header, widths))]
        lines.append("  ".join("-" * wd for wd in widths))
        lines += ["  ".join(c.ljust(wd) for c, wd in zip(b, widths)) for b in body]
        return "\n".join(lines) + "\n"


def _metric_name(kind: Kind) -> str:
    return "conductance" if kind is Kind.MINCUT else "ratio"


def run_benchmark(config: BenchConfig, threads: int = 1, items: list[Item] | None = None) -> BenchReport:
    """Every method on every instance and seed."""
    items = prepare(config, threads) if items is None else items
    kind = Kind.parse(config.dataset.kind)
    tasks = [
        (m, it.instance, it.reference, config.seeds, config.solver, config.timing)
        for m in config.methods
        for it in items
    ]
    results = _map(_method_task, tasks, threads)
    rows = []
    for k, m in enumerate(config.methods):
        runs = results[k * len(items) : (k + 1) * len(items)]
        rows.append(aggregate(config.name, m.name, runs, kind))
    return BenchReport(rows, metric=_metric_name(kind))


# ---------------------------------------------------------------------------
# Ablations
# ---------------------------------------------------------------------------


def _check_unweighted_mds(config: BenchConfig) -> None:
    if Kind.parse(config.dataset.kind) is not Kind.MDS or config.dataset.weights != "unit":
        raise ConfigError("the penalty ablation expects an unweighted mds dataset")


def ablate_beta(
    config: BenchConfig,
    grid: Iterable[float] = DEFAULT_BETA_GRID,
    threads: int = 1,
    items: list[Item] | None = None,
    method: str = "annealed",
) -> BenchReport:
    """Solve with every default penalty multiplied by each ``beta`` in ``grid``."""
    _check_unweighted_mds(config)
    items = prepare(config, threads) if items is None else items
    grid = [float(b) for b in grid]
    m = MethodSpec(method, method)
    tasks = [
        (m, it.instance.scaled(b), it.reference, config.seeds, config.solver, config.timing)
        for b in grid
        for it in items
    ]
    results = _map(_method_task, tasks, threads)
    rows = []
    for k, b in enumerate(grid):
        runs = results[k * len(items) : (k + 1) * len(items)]
        row = aggregate(config.name, _fmt(b), runs, Kind.MDS)
        row.extra["beta"] = b
        rows.append(row)
    cols = ("dataset", "beta") + CSV_COLUMNS[2:]
    return BenchReport(rows, columns=cols)


def parse_tau0(value: float | str) -> tuple[str, float]:
    """``("abs", t)`` for a number, ``("rel", s)`` for ``"sL"`` (``s`` times the Lipschitz bound)."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value < 0:
            raise ConfigError("tau0 must be nonnegative")
        return "abs", float(value)
    if isinstance(value, str):
        text = value.strip()
        if text in ("L", "auto"):
            return "rel", 1.0
        if text.endswith("L"):
            try:
                return "rel", float(text[:-1])
            except ValueError:
                pass
    raise ConfigError(f"tau0 entries are numbers, 'auto', 'L' or '<s>L'; got {value!r}")


def _schedule_config(solver: SolverConfig, kind: str, tau0: float | str) -> tuple[SolverConfig, bool]:
    mode, val = parse_tau0(tau0)
    if mode == "rel":
        cfg = replace(solver, schedule=None, schedule_kind=kind, tau0="auto", tau0_scale=val)
        return cfg, val == 0
    if val <= solver.tauK:
        # zero (or sub-floor) start: nothing to anneal, run at tauK throughout
        return replace(solver, schedule=constant_schedule(solver.tauK, solver.K)), True
    return replace(solver, schedule=make_schedule(kind, val, solver.tauK, solver.K)), False


def ablate_schedule(
    config: BenchConfig,
    kinds: Iterable[str] = ("linear", "concave", "convex"),
    tau0_grid: Iterable[float | str] = DEFAULT_TAU0_GRID,
    threads: int = 1,
    items: list[Item] | None = None,
) -> BenchReport:
    """Grid over schedule shape and starting temperature (one row per cell)."""
    if Kind.parse(config.dataset.kind) is not Kind.MDS:
        raise ConfigError("the schedule ablation expects an mds dataset")
    items = prepare(config, threads) if items is None else items
    cells = []
    for kind in kinds:
        for t0 in tau0_grid:
            cfg, degenerate = _schedule_config(config.solver, kind, t0)
            cells.append((kind, t0, cfg, degenerate))
    m = MethodSpec("annealed", "annealed")
    tasks = [(m, it.instance, it.reference, config.seeds, cfg, config.timing) for _, _, cfg, _ in cells for it in items]
    results = _map(_method_task, tasks, threads)
    rows = []
    for k, (kind, t0, _, degenerate) in enumerate(cells):
        runs = results[k * len(items) : (k + 1) * len(items)]
        row = aggregate(config.name, kind, runs, Kind.MDS)
        row.extra.update(kind=kind, tau0=str(t0), degenerate=degenerate)
        rows.append(row)
    return ScheduleReport(rows)


class ScheduleReport(BenchReport):
    def __init__(self, rows: list[Row]):
        super().__init__(rows, columns=("dataset", "kind", "tau0", "degenerate") + CSV_COLUMNS[2:])

    def cell(self, kind: str, tau0: float | str) -> Row:
        for r in self.rows:
            if r.extra["kind"] == kind and r.extra["tau0"] == str(tau0):
                return r
        raise KeyError((kind, tau0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            c = r.cells()
            w.writerow([c[0], r.extra["kind"], r.extra["tau0"], str(r.extra["degenerate"]).lower()] + c[2:])
        return buf.getvalue()

    def to_table(self) -> str:
        split = [line.split(",") for line in self.to_csv().splitlines()]
        widths = [max(len(r[k]) for r in split) for k in range(len(split[0]))]
        out = ["  ".join(c.ljust(wd) for c, wd in zip(r, widths)) for r in split]
        out.insert(1, "  ".join("-" * wd for wd in widths))
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_report(report: BenchReport, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    txt_path = out / f"{stem}.txt"
    csv_path.write_text(report.to_csv())
    txt_path.write_text(report.to_table())
    return csv_path, txt_path


def dump_json(data: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# Amortized training runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol for the amortized model.

    ``compare`` also trains at a constant ``tauK`` with the same budget and
    seeds, for the annealed-versus-constant comparison.
    """

    name: str
    dataset: DatasetSpec
    validation: DatasetSpec | None
    seeds: tuple[int, ...]
    epochs: int = 100
    lr: float = 0.1
    clip_norm: float | None = 1.0
    batch_size: int = 8
    schedule_kind: str = "linear"
    tauK: float = 1e-3
    per_batch: bool = False
    n_layers: int = 2
    hidden: int = 16
    compare: bool = True
    exact_cap: int = DEFAULT_EXACT_CAP

    _KEYS = frozenset(
        "name dataset validation seeds seed seed_count epochs lr clip_norm batch_size schedule_kind "
        "tauK per_batch n_layers hidden compare exact_cap timing".split()
    )

    @classmethod
    def from_dict(cls, data: dict, seed: int | None = None) -> "TrainConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - cls._KEYS
        if unknown:
            raise ConfigError(f"unknown training keys: {sorted(unknown)}")
        try:
            dataset = DatasetSpec.from_dict(data.get("dataset", {"count": 200}))
            val = data.get("validation")
            validation = DatasetSpec.from_dict(val) if val is not None else None
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad dataset spec: {err}") from err
        base_seed = int(data.get("seed", 0)) if seed is None else int(seed)
        if "seeds" in data and seed is None:
            seeds = tuple(int(s) for s in data["seeds"])
        else:
            seeds = tuple(range(base_seed, base_seed + int(data.get("seed_count", 1))))
        clip = data.get("clip_norm", 1.0)
        cfg = cls(
            name=str(data.get("name", dataset.label)),
            dataset=dataset,
            validation=validation,
            seeds=seeds,
            epochs=int(data.get("epochs", 100)),
            lr=float(data.get("lr", 0.1)),
            clip_norm=None if clip is None else float(clip),
            batch_size=int(data.get("batch_size", 8)),
            schedule_kind=str(data.get("schedule_kind", "linear")),
            tauK=float(data.get("tauK", 1e-3)),
            per_batch=bool(data.get("per_batch", False)),
            n_layers=int(data.get("n_layers", 2)),
            hidden=int(data.get("hidden", 16)),
            compare=bool(data.get("compare", True)),
            exact_cap=int(data.get("exact_cap", DEFAULT_EXACT_CAP)),
        )
        if not cfg.seeds or cfg.epochs < 1 or cfg.batch_size < 1 or cfg.lr < 0:
            raise ConfigError("need seeds, epochs >= 1, batch_size >= 1 and lr >= 0")
        if cfg.clip_norm is not None and cfg.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive or null")
        return cfg


@dataclass
class TrainRun:
    method: str
    seed: int
    result: Any
    val_ratio: float | None
    rel_change: float


def _train_task(args) -> TrainRun:
    from .amortized import param_rel_change, train, validation_ratio

    cfg, method, seed, schedule, data, val = args
    res = train(
        data,
        cfg.epochs,
        schedule,
        lr=cfg.lr,
        seed=seed,
        batch_size=cfg.batch_size,
        n_layers=cfg.n_layers,
        hidden=cfg.hidden,
        validation=val,
        val_every=cfg.epochs,
        per_batch=cfg.per_batch,
        clip_norm=cfg.clip_norm,
    )
    ratio = validation_ratio(res.params, val) if val else None
    return TrainRun(method, seed, res, ratio, param_rel_change(res.initial, res.params))


@dataclass
class TrainReport:
    name: str
    runs: list[TrainRun]

    COLUMNS = ("dataset", "method", "seed_count", "mean_val_ratio", "std_val_ratio", "mean_rel_change", "std_rel_change")

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.runs))

    def of(self, method: str) -> list[TrainRun]:
        return [r for r in self.runs if r.method == method]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for m in self.methods():
            runs = self.of(m)
            ratios = [r.val_ratio for r in runs]
            has = all(v is not None for v in ratios)
            rc = np.array([r.rel_change for r in runs])
            w.writerow(
                [
                    self.name,
                    m,
                    len(runs),
                    _fmt(float(np.mean(ratios)) if has else None),
                    _fmt(float(np.std(ratios)) if has else None),
                    _fmt(float(rc.mean())),
                    _fmt(float(rc.std())),
                ]
            )
        return buf.getvalue()

    def per_seed_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("method", "seed", "val_ratio", "rel_change", "final_loss"))
        for r in self.runs:
            w.writerow([r.method, r.seed, _fmt(r.val_ratio), _fmt(r.rel_change), _fmt(r.result.metrics[-1]["loss"])])
        return buf.getvalue()


def run_training(cfg: TrainConfig, threads: int = 1) -> TrainReport:
    from .amortized import default_training_schedule

    data = [inst for inst, _ in build_dataset(cfg.dataset)]
    val = None
    if cfg.validation is not None:
        pairs = build_dataset(cfg.validation)
        refs = _map(_reference_task, [(inst, known, cfg.exact_cap) for inst, known in pairs], threads)
        val = [(inst, ref) for (inst, _), ref in zip(pairs, refs)]
        if any(ref is None for _, ref in val):
            raise ConfigError("validation instances need reference optima; lower n_max or raise exact_cap")
    steps = cfg.epochs
    if cfg.per_batch:
        steps = cfg.epochs * -(-len(data) // cfg.batch_size)
    schedules = [("annealed", default_training_schedule(data, steps, cfg.schedule_kind, cfg.tauK))]
    if cfg.compare:
        schedules.append(("constant", constant_schedule(cfg.tauK, max(steps - 1, 1))))
    tasks = [(cfg, name, seed, sched, data, val) for name, sched in schedules for seed in cfg.seeds]
    return TrainReport(cfg.name, _map(_train_task, tasks, threads))

