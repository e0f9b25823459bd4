"""Penalized energies for the four graph problems.

Every problem is ``argmin c(x)`` over ``x in {0,1}^n`` subject to indicator
constraints; the energy adds ``beta * violation`` for each constraint:

* ``mis``    maximum weight independent set, one penalty per edge
* ``clique`` maximum weight clique, one penalty per non-adjacent pair
* ``mds``    minimum weight dominating set, one penalty per node
* ``mincut`` minimum cut with a volume window ``[D0, D1]``, one scalar penalty

The default penalties are the smallest values for which the energy's global
minima are exactly the optimal feasible solutions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from .graph import Graph, complement_edge_stream


class Kind(str, Enum):
    MIS = "mis"
    CLIQUE = "clique"
    MDS = "mds"
    MINCUT = "mincut"

    @classmethod
    def parse(cls, value: "str | Kind") -> "Kind":
        if isinstance(value, Kind):
            return value
        aliases = {
            "maxclique": "clique",
            "max-clique": "clique",
            "mindominatingset": "mds",
            "min-dominating-set": "mds",
            "min-cut": "mincut",
            "independent-set": "mis",
        }
        v = value.lower()
        return cls(aliases.get(v, v))

    @property
    def maximize(self) -> bool:
        return self in (Kind.MIS, Kind.CLIQUE)


class PenaltyError(ValueError):
    """Penalties are below the threshold a guarantee depends on."""


class InfeasibleError(ValueError):
    """No feasible assignment exists (or none could be reached)."""


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    kind: Kind
    graph: Graph
    penalties: np.ndarray
    volume_bounds: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = Kind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        pen = np.array(self.penalties, dtype=float)
        expected = {
            Kind.MIS: (self.graph.m,),
            Kind.CLIQUE: (len(self.complement_edges),),
            Kind.MDS: (self.graph.n,),
            Kind.MINCUT: (),
        }[kind]
        if kind is Kind.MINCUT and pen.shape == (1,):
            pen = pen.reshape(())
        if pen.shape != expected:
            raise ValueError(f"{kind.value} penalties must have shape {expected}, got {pen.shape}")
        if np.any(pen < 0) or not np.all(np.isfinite(pen)):
            raise ValueError("penalties must be finite and nonnegative")
        pen.setflags(write=False)
        object.__setattr__(self, "penalties", pen)
        if kind is Kind.MINCUT:
            if self.volume_bounds is None:
                raise ValueError("mincut needs volume_bounds (D0, D1)")
            d0, d1 = (float(v) for v in self.volume_bounds)
            if not 0 <= d0 <= d1 <= self.total_volume:
                raise ValueError(
                    f"volume bounds must satisfy 0 <= D0 <= D1 <= vol(V)={self.total_volume}, "
                    f"got ({d0}, {d1})"
                )
            object.__setattr__(self, "volume_bounds", (d0, d1))
        elif self.volume_bounds is not None:
            raise ValueError("volume_bounds only apply to mincut")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def weights(self) -> np.ndarray:
        return self.graph.node_weights

    @cached_property
    def complement_edges(self) -> list[tuple[int, int]]:
        return list(complement_edge_stream(self.graph))

    @cached_property
    def total_volume(self) -> float:
        return float(self.graph.degrees.sum())

    @cached_property
    def pair_matrix(self) -> np.ndarray:
        """Symmetric matrix of pairwise penalties (mis / clique)."""
        n = self.n
        if self.kind is Kind.MIS:
            return self.graph.adjacency_matrix(self.penalties)
        b = np.zeros((n, n))
        if self.complement_edges:
            e = np.array(self.complement_edges)
            b[e[:, 0], e[:, 1]] = self.penalties
            b[e[:, 1], e[:, 0]] = self.penalties
        return b

    @cached_property
    def closed_matrix(self):
        """Closed-neighbourhood indicator ``I + A`` (mds)."""
        a = self.graph.adjacency_matrix(np.ones(self.graph.m))
        if isinstance(a, np.ndarray):
            return a + np.eye(self.n)
        import scipy.sparse as sp

        return (a + sp.identity(self.n, format="csr")).tocsr()

    @cached_property
    def edge_matrix(self):
        """Edge-weight adjacency (mincut)."""
        return self.graph.adjacency_matrix()

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.graph.degrees.astype(float)

    def with_penalties(self, penalties) -> "ProblemInstance":
        return ProblemInstance(self.kind, self.graph, penalties, self.volume_bounds, dict(self.meta))

    def scaled(self, factor: float) -> "ProblemInstance":
        return self.with_penalties(np.asarray(self.penalties) * factor)

    def to_dict(self) -> dict:
        pen = self.penalties
        return {
            "kind": self.kind.value,
            "graph": self.graph.to_dict(),
            "penalties": float(pen) if pen.ndim == 0 else [float(v) for v in pen],
            "volume_bounds": list(self.volume_bounds) if self.volume_bounds else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        kind = Kind.parse(data["kind"])
        graph = Graph.from_dict(data["graph"])
        bounds = data.get("volume_bounds")
        pen = data.get("penalties")
        if pen is None:
            pen = default_penalties(kind, graph)
        return cls(kind, graph, pen, tuple(bounds) if bounds else None)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def default_penalties(kind: Kind | str, graph: Graph, rule: str = "min"):
    """Smallest penalties that keep the energy unbiased.

    ``rule="max"`` gives the looser ``max(w_i, w_j)`` pair condition instead
    of ``min(w_i, w_j)`` for mis / clique; other kinds ignore it.
    """
    kind = Kind.parse(kind)
    w = graph.node_weights
    pick = np.minimum if rule == "min" else np.maximum
    if rule not in ("min", "max"):
        raise ValueError(f"rule must be 'min' or 'max', got {rule!r}")
    if kind is Kind.MIS:
        e = graph.edge_array()
        return pick(w[e[:, 0]], w[e[:, 1]]) if len(e) else np.zeros(0)
    if kind is Kind.CLIQUE:
        pairs = list(complement_edge_stream(graph))
        if not pairs:
            return np.zeros(0)
        e = np.array(pairs)
        return pick(w[e[:, 0]], w[e[:, 1]])
    if kind is Kind.MDS:
        return np.array([min(w[k] for k in graph.closed_neighborhood(i)) for i in range(graph.n)])
    # mincut: largest absolute weighted degree
    if graph.m == 0:
        return np.float64(0.0)
    a = np.abs(graph.adjacency_matrix(dense=False))
    return np.float64(np.max(np.asarray(a.sum(axis=1)).ravel()))


def make_instance(
    kind: Kind | str,
    graph: Graph,
    *,
    penalty_scale: float = 1.0,
    rule: str = "min",
    volume_bounds: tuple[float, float] | None = None,
) -> ProblemInstance:
    kind = Kind.parse(kind)
    pen = np.asarray(default_penalties(kind, graph, rule), dtype=float) * penalty_scale
    return ProblemInstance(kind, graph, pen, volume_bounds)


# ---------------------------------------------------------------------------
# Energies on assignments
# ---------------------------------------------------------------------------


def _as_batch(inst: ProblemInstance, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != inst.n:
        raise ValueError(f"assignment length {arr.shape[1]} does not match n={inst.n}")
    return arr.astype(float), single


def objective(inst: ProblemInstance, x):
    """Original objective ``c(x)`` (no penalties). Accepts one row or a batch."""
    X, single = _as_batch(inst, x)
    if inst.kind is Kind.MINCUT:
        out = _cut(inst, X)
    elif inst.kind is Kind.MDS:
        out = X @ inst.weights
    else:
        out = -(X @ inst.weights)
    return float(out[0]) if single else out


def _cut(inst: ProblemInstance, X: np.ndarray) -> np.ndarray:
    e = inst.graph.edge_array()
    if not len(e):
        return np.zeros(len(X))
    diff = X[:, e[:, 0]] != X[:, e[:, 1]]
    return diff @ inst.graph.edge_weights


def _volume_violation(inst: ProblemInstance, vol: np.ndarray) -> np.ndarray:
    d0, d1 = inst.volume_bounds
    return np.maximum(vol - d1, 0.0) + np.maximum(d0 - vol, 0.0)


def penalty_term(inst: ProblemInstance, x):
    """``sum_i beta_i * psi_i(x)``; for mincut the hinge volume penalty."""
    X, single = _as_batch(inst, x)
    if inst.kind in (Kind.MIS, Kind.CLIQUE):
        out = 0.5 * np.einsum("bi,bi->b", X @ inst.pair_matrix, X)
    elif inst.kind is Kind.MDS:
        covered = X @ inst.closed_matrix
        out = (np.asarray(covered) == 0) @ inst.penalties
    else:
        out = float(inst.penalties) * _volume_violation(inst, X @ inst.degrees)
    return float(out[0]) if single else out


def energy(inst: ProblemInstance, x):
    """Penalized energy ``f(x) = c(x) + sum beta psi(x)``; batch-aware."""
    c = objective(inst, x)
    return c + penalty_term(inst, x)


def violations(inst: ProblemInstance, x) -> int:
    """Number of violated constraints (mincut: 1 if the volume is out of range)."""
    X, _ = _as_batch(inst, x)
    row = X[0]
    if inst.kind is Kind.MIS:
        e = inst.graph.edge_array()
        return int(np.sum(row[e[:, 0]] * row[e[:, 1]])) if len(e) else 0
    if inst.kind is Kind.CLIQUE:
        return sum(1 for i, j in inst.complement_edges if row[i] and row[j])
    if inst.kind is Kind.MDS:
        return int(np.sum(np.asarray(row @ inst.closed_matrix) == 0))
    return int(_volume_violation(inst, np.array([row @ inst.degrees]))[0] > 0)


def is_feasible(inst: ProblemInstance, x) -> bool:
    return violations(inst, x) == 0


def feasible_mask(inst: ProblemInstance, X: np.ndarray) -> np.ndarray:
    """Vectorised feasibility for a batch of assignments."""
    X = np.asarray(X, dtype=float)
    if inst.kind is Kind.MIS:
        e = inst.graph.edge_array()
        if not len(e):
            return np.ones(len(X), dtype=bool)
        return ~np.any((X[:, e[:, 0]] * X[:, e[:, 1]]) > 0, axis=1)
    if inst.kind is Kind.CLIQUE:
        if not inst.complement_edges:
            return np.ones(len(X), dtype=bool)
        e = np.array(inst.complement_edges)
        return ~np.any((X[:, e[:, 0]] * X[:, e[:, 1]]) > 0, axis=1)
    if inst.kind is Kind.MDS:
        return np.all(np.asarray(X @ inst.closed_matrix) > 0, axis=1)
    return _volume_violation(inst, X @ inst.degrees) == 0


def discrete_gap(inst: ProblemInstance, x, i: int) -> float:
    """``f(x with x_i=1) - f(x with x_i=0)``."""
    if not 0 <= i < inst.n:
        raise IndexError(f"node {i} out of range for n={inst.n}")
    X = np.tile(np.asarray(x, dtype=float), (2, 1))
    X[0, i] = 1.0
    X[1, i] = 0.0
    e = energy(inst, X)
    return float(e[0] - e[1])


def lipschitz_bound(inst: ProblemInstance) -> float:
    """Upper bound on ``|discrete_gap(x, i)|`` over all ``x`` and ``i``."""
    w = np.abs(inst.weights)
    if inst.n == 0:
        return 0.0
    if inst.kind in (Kind.MIS, Kind.CLIQUE):
        per_node = w + np.abs(inst.pair_matrix).sum(axis=1)
    elif inst.kind is Kind.MDS:
        per_node = w + np.asarray(inst.closed_matrix @ inst.penalties).ravel()
    else:
        absdeg = np.asarray(np.abs(inst.edge_matrix).sum(axis=1)).ravel()
        return float(absdeg.max() + float(inst.penalties) * inst.degrees.max())
    return float(np.max(per_node))


# ---------------------------------------------------------------------------
# Repair
# ---------------------------------------------------------------------------


def _check_penalties(inst: ProblemInstance) -> None:
    floor = np.asarray(default_penalties(inst.kind, inst.graph), dtype=float)
    if np.any(np.asarray(inst.penalties) < floor - 1e-12):
        raise PenaltyError(
            "penalties are below the sharp defaults; repair would not be energy-nonincreasing"
        )


def repair(inst: ProblemInstance, x, *, check_penalties: bool = True) -> np.ndarray:
    """Turn ``x`` into a feasible assignment whose energy is no larger.

    mis / clique drop the lighter endpoint of each violated pair; mds adds the
    lightest node of each undominated closed neighbourhood; mincut flips single
    nodes toward the volume window, picking the lowest resulting energy.
    Ties go to the lowest node index.
    """
    if check_penalties:
        _check_penalties(inst)
    x = np.array(x, dtype=np.int8).copy()
    if x.shape != (inst.n,):
        raise ValueError(f"assignment length {x.shape} does not match n={inst.n}")
    w = inst.weights
    if inst.kind in (Kind.MIS, Kind.CLIQUE):
        pairs = inst.graph.edges if inst.kind is Kind.MIS else inst.complement_edges
        for i, j in pairs:
            if x[i] and x[j]:
                x[j if w[j] < w[i] else i] = 0
        return x
    if inst.kind is Kind.MDS:
        g = inst.graph
        covered = np.zeros(inst.n, dtype=int)
        for v in np.flatnonzero(x):
            for k in g.closed_neighborhood(int(v)):
                covered[k] += 1
        for t in range(inst.n):
            if covered[t]:
                continue
            hood = g.closed_neighborhood(t)
            k = min(hood, key=lambda v: (w[v], v))
            x[k] = 1
            for v in g.closed_neighborhood(k):
                covered[v] += 1
        return x
    return _repair_mincut(inst, x)


def _repair_mincut(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.degrees
    viol = float(_volume_violation(inst, np.array([x @ d]))[0])
    for _ in range(4 * inst.n + 4):
        if viol == 0:
            return x
        vol = float(x @ d)
        d0, d1 = inst.volume_bounds
        # flip direction that shrinks the violation
        flip_from = 1 if vol > d1 else 0
        cands = np.flatnonzero((x == flip_from) & (d > 0))
        if not len(cands):
            break
        X = np.tile(x, (len(cands), 1)).astype(float)
        X[np.arange(len(cands)), cands] = 1 - flip_from
        new_viol = _volume_violation(inst, X @ d)
        ok = new_viol < viol
        if not np.any(ok):
            break
        en = np.where(ok, energy(inst, X), np.inf)
        best = int(np.lexsort((cands, en))[0])
        x = X[best].astype(np.int8)
        viol = float(new_viol[best])
    if viol == 0:
        return x
    raise InfeasibleError("could not reach the volume window by single flips")
