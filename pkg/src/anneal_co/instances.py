"""Random instance factories and the dataset specs used by the benchmarks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .energy import Kind, ProblemInstance, make_instance
from .graph import Graph, generate_ba, generate_gnp, generate_rb, load_graph


def random_weights(n: int, rng: np.random.Generator, mode: str) -> np.ndarray:
    if mode == "unit":
        return np.ones(n)
    if mode == "integer":
        return rng.integers(1, 4, n).astype(float)
    if mode == "random":
        return np.round(rng.uniform(0.5, 2.0, n), 3)
    raise ValueError(f"unknown weight mode {mode!r}")


def random_volume_window(graph: Graph, rng: np.random.Generator) -> tuple[float, float]:
    """Integer window at least one max-degree wide, so single flips can always enter it."""
    vol = int(graph.degrees.sum())
    dmax = int(graph.degrees.max()) if graph.n else 0
    hi_start = max(vol - dmax, 0)
    d0 = int(rng.integers(0, hi_start + 1))
    d1 = min(vol, d0 + dmax + int(rng.integers(0, dmax + 1)))
    return float(d0), float(d1)


def random_instance(
    kind: Kind | str,
    n: int,
    rng: np.random.Generator,
    weights: str = "random",
    penalty_scale: float = 1.0,
    density: tuple[float, float] = (0.2, 0.6),
) -> ProblemInstance:
    """Small G(n, p) instance with default penalties times ``penalty_scale``."""
    kind = Kind.parse(kind)
    p = float(rng.uniform(*density))
    g = generate_gnp(n, p, int(rng.integers(2**31)))
    if kind is Kind.MINCUT:
        while g.m == 0:
            g = generate_gnp(n, p, int(rng.integers(2**31)))
        ew = random_weights(g.m, rng, weights)
        g = Graph(n, g.edges, None, ew)
        return make_instance(kind, g, penalty_scale=penalty_scale, volume_bounds=random_volume_window(g, rng))
    g = g.with_node_weights(random_weights(n, rng, weights))
    return make_instance(kind, g, penalty_scale=penalty_scale)


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a list of instances; see :func:`build_dataset`.

    ``generator`` is ``"ba"``, ``"rb"``, ``"gnp"`` or ``"files"``.
    """

    kind: str = "mds"
    generator: str = "ba"
    count: int = 50
    n_min: int = 20
    n_max: int = 30
    m_attach: int = 4
    p: float = 0.3
    groups: int = 6
    group_size: int = 4
    r: float = 1.0
    weights: str = "unit"
    seed: int = 0
    files: tuple[str, ...] = ()
    name: str = ""

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DatasetSpec":
        data = dict(data)
        if "files" in data:
            data["files"] = tuple(data["files"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown dataset keys: {sorted(unknown)}")
        return cls(**data)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.generator == "ba":
            return f"{self.kind}-ba{self.m_attach}-n{self.n_min}-{self.n_max}"
        if self.generator == "rb":
            return f"{self.kind}-rb{self.groups}x{self.group_size}"
        return f"{self.kind}-{self.generator}"


def build_dataset(spec: DatasetSpec) -> list[tuple[ProblemInstance, float | None]]:
    """Instances paired with a generator-known optimum (RB) or ``None``."""
    rng = np.random.default_rng(spec.seed)
    kind = Kind.parse(spec.kind)
    out: list[tuple[ProblemInstance, float | None]] = []
    if spec.generator == "files":
        for path in spec.files:
            g = load_graph(path)
            bounds = random_volume_window(g, rng) if kind is Kind.MINCUT else None
            out.append((make_instance(kind, g, volume_bounds=bounds), None))
        return out
    for _ in range(spec.count):
        sub = int(rng.integers(2**31))
        known = None
        if spec.generator == "ba":
            n = int(rng.integers(spec.n_min, spec.n_max + 1))
            g = generate_ba(n, spec.m_attach, sub)
        elif spec.generator == "gnp":
            n = int(rng.integers(spec.n_min, spec.n_max + 1))
            g = generate_gnp(n, spec.p, sub)
        elif spec.generator == "rb":
            g, size = generate_rb(spec.groups, spec.group_size, spec.p, spec.r, sub)
            if kind is Kind.MIS and spec.weights == "unit":
                known = -float(size)
        else:
            raise ValueError(f"unknown generator {spec.generator!r}")
        if spec.weights != "unit":
            g = g.with_node_weights(random_weights(g.n, rng, spec.weights))
        bounds = random_volume_window(g, rng) if kind is Kind.MINCUT else None
        out.append((make_instance(kind, g, volume_bounds=bounds), known))
    return out
