"""Weighted undirected graphs, random generators and file ingestion."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Invalid graph structure (self-loop, duplicate edge, bad index)."""


class GraphFormatError(GraphError):
    """A graph file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Graph:
    """Immutable weighted undirected simple graph on nodes ``0..n-1``.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``, in
    lexicographic order; ``edge_weights[k]`` belongs to ``edges[k]``.
    """

    def __init__(
        self,
        n: int,
        edges: Iterable[Sequence[int]] = (),
        node_weights: Sequence[float] | None = None,
        edge_weights: Sequence[float] | None = None,
    ):
        if n < 0:
            raise GraphError(f"node count must be nonnegative, got {n}")
        raw = [tuple(int(v) for v in e) for e in edges]
        if edge_weights is None:
            ew = [1.0] * len(raw)
        else:
            ew = [float(w) for w in edge_weights]
            if len(ew) != len(raw):
                raise GraphError("edge_weights length does not match edges")

        pairs: dict[tuple[int, int], float] = {}
        for (i, j), w in zip(raw, ew):
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            key = (i, j) if i < j else (j, i)
            if key in pairs:
                raise GraphError(f"duplicate edge {key}")
            if not math.isfinite(w):
                raise GraphError(f"non-finite weight on edge {key}")
            pairs[key] = w

        order = sorted(pairs)
        self.n = int(n)
        self.edges: tuple[tuple[int, int], ...] = tuple(order)
        self.edge_weights = np.array([pairs[e] for e in order], dtype=float)

        if node_weights is None:
            self.node_weights = np.ones(n)
        else:
            self.node_weights = np.array(node_weights, dtype=float)
            if self.node_weights.shape != (n,):
                raise GraphError("node_weights must have length n")
            if not np.all(np.isfinite(self.node_weights)):
                raise GraphError("node weights must be finite")

        adj: list[list[int]] = [[] for _ in range(n)]
        for i, j in order:
            adj[i].append(j)
            adj[j].append(i)
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in adj)
        self.degrees = np.array([len(a) for a in adj], dtype=int)

        self.node_weights.setflags(write=False)
        self.edge_weights.setflags(write=False)
        self.degrees.setflags(write=False)
        self._edge_index = {e: k for k, e in enumerate(order)}

    @property
    def m(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in self._edge_index

    def edge_weight(self, i: int, j: int) -> float:
        return float(self.edge_weights[self._edge_index[(i, j) if i < j else (j, i)]])

    def edge_array(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` integer array."""
        if not self.edges:
            return np.zeros((0, 2), dtype=int)
        return np.array(self.edges, dtype=int)

    def adjacency_matrix(self, weights: Sequence[float] | None = None, dense: bool | None = None):
        """Symmetric adjacency matrix with the given per-edge values.

        Dense for small graphs (numpy is much faster there), CSR otherwise.
        """
        vals = self.edge_weights if weights is None else np.asarray(weights, dtype=float)
        e = self.edge_array()
        if dense is None:
            dense = self.n <= 512
        if dense:
            a = np.zeros((self.n, self.n))
            if len(e):
                a[e[:, 0], e[:, 1]] = vals
                a[e[:, 1], e[:, 0]] = vals
            return a
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.concatenate([vals, vals])
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def closed_neighborhood(self, i: int) -> tuple[int, ...]:
        return tuple(sorted((i,) + self.adjacency[i]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.edges == other.edges
            and np.array_equal(self.edge_weights, other.edge_weights)
            and np.array_equal(self.node_weights, other.node_weights)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [[i, j, float(w)] for (i, j), w in zip(self.edges, self.edge_weights)],
            "node_weights": [float(w) for w in self.node_weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Graph":
        try:
            n = int(data["n"])
            edges, weights = [], []
            for item in data.get("edges", []):
                if len(item) not in (2, 3):
                    raise GraphFormatError(f"edge entry must be [i, j] or [i, j, w], got {item!r}")
                edges.append((int(item[0]), int(item[1])))
                weights.append(float(item[2]) if len(item) == 3 else 1.0)
            nw = data.get("node_weights")
        except (KeyError, TypeError) as exc:
            raise GraphFormatError(f"malformed graph object: {exc}") from exc
        return cls(n, edges, nw, weights)

    def with_node_weights(self, node_weights: Sequence[float]) -> "Graph":
        return Graph(self.n, self.edges, node_weights, self.edge_weights)

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        perm = list(perm)
        nw = np.empty(self.n)
        nw[perm] = self.node_weights
        edges = [(perm[i], perm[j]) for i, j in self.edges]
        return Graph(self.n, edges, nw, self.edge_weights)


def complement_edge_stream(g: Graph) -> Iterator[tuple[int, int]]:
    """Yield every non-adjacent pair ``(i, j)``, ``i < j``, in lexicographic order."""
    for i in range(g.n):
        nbrs = set(g.adjacency[i])
        for j in range(i + 1, g.n):
            if j not in nbrs:
                yield (i, j)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def generate_ba(n: int, m_attach: int, seed: int) -> Graph:
    """Barabasi-Albert graph grown from a complete core on ``m_attach + 1`` nodes.

    Each later node attaches to ``m_attach`` distinct existing nodes chosen
    with probability proportional to degree.
    """
    if m_attach < 1 or n <= m_attach:
        raise ValueError(f"need n > m_attach >= 1, got n={n}, m_attach={m_attach}")
    rng = np.random.default_rng(seed)
    core = m_attach + 1
    edges = [(i, j) for i in range(core) for j in range(i + 1, core)]
    # one entry per edge endpoint: uniform draws from it are degree-proportional
    targets = [v for e in edges for v in e]
    for new in range(core, n):
        chosen: list[int] = []
        seen: set[int] = set()
        while len(chosen) < m_attach:
            v = targets[int(rng.integers(len(targets)))]
            if v not in seen:
                seen.add(v)
                chosen.append(v)
        for v in chosen:
            edges.append((v, new))
            targets.extend((v, new))
    return Graph(n, edges)


def generate_rb(
    groups: int,
    group_size: int,
    p: float,
    r: float,
    seed: int,
) -> tuple[Graph, int]:
    """RB-style hard independent-set instance with a planted solution.

    Nodes are split into ``groups`` cliques of ``group_size``. Then
    ``round(r * groups * ln(groups))`` random group pairs each receive
    ``round(p * group_size**2)`` random edges between the two groups. One
    hidden node per group is never joined to another hidden node, so an
    independent set of size ``groups`` always exists and is maximum.

    Returns the graph and the known optimum (the independent-set size).
    """
    if groups < 2 or group_size < 2:
        raise ValueError("groups and group_size must both be >= 2")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    rng = np.random.default_rng(seed)
    n = groups * group_size
    hidden = [g * group_size + int(rng.integers(group_size)) for g in range(groups)]
    edge_set: set[tuple[int, int]] = set()
    for g in range(groups):
        base = g * group_size
        for a in range(group_size):
            for b in range(a + 1, group_size):
                edge_set.add((base + a, base + b))

    n_pairs = int(round(r * groups * math.log(groups)))
    per_pair = int(round(p * group_size * group_size))
    for _ in range(n_pairs):
        g1, g2 = sorted(rng.choice(groups, size=2, replace=False).tolist())
        cand = [
            (g1 * group_size + a, g2 * group_size + b)
            for a in range(group_size)
            for b in range(group_size)
            if not (g1 * group_size + a == hidden[g1] and g2 * group_size + b == hidden[g2])
        ]
        k = min(per_pair, len(cand))
        if k == 0:
            continue
        for idx in rng.choice(len(cand), size=k, replace=False):
            edge_set.add(cand[int(idx)])
    return Graph(n, sorted(edge_set)), groups


def generate_gnp(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p); used for small random test instances."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return Graph(n, zip(iu[keep].tolist(), ju[keep].tolist()))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

FORMATS = ("edge-list", "dimacs", "json")


def _normalize_format(fmt: str) -> str:
    f = fmt.lower().replace("_", "-")
    if f in ("edgelist", "edges", "txt"):
        f = "edge-list"
    if f not in FORMATS:
        raise ValueError(f"unknown graph format {fmt!r}; expected one of {FORMATS}")
    return f


def guess_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix in (".col", ".dimacs", ".clq"):
        return "dimacs"
    return "edge-list"


def _build(n: int, edges: list, weights: list, node_weights, lines: list[int]) -> Graph:
    # re-raise structural problems with the offending line attached
    seen: dict[tuple[int, int], int] = {}
    for (i, j), ln in zip(edges, lines):
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"edge ({i}, {j}) out of range for n={n}", ln)
        if i == j:
            raise GraphFormatError(f"self-loop at node {i}", ln)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {key} (first on line {seen[key]})", ln)
        seen[key] = ln
    return Graph(n, edges, node_weights, weights)


def parse_edge_list(text: str) -> Graph:
    n = None
    edges, weights, lines = [], [], []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            if n is None:
                if len(toks) != 1:
                    raise GraphFormatError("first line must hold the node count", ln)
                n = int(toks[0])
                continue
            if len(toks) not in (2, 3):
                raise GraphFormatError(f"expected 'i j [w]', got {line!r}", ln)
            edges.append((int(toks[0]), int(toks[1])))
            weights.append(float(toks[2]) if len(toks) == 3 else 1.0)
            lines.append(ln)
        except ValueError as exc:
            if isinstance(exc, GraphFormatError):
                raise
            raise GraphFormatError(f"cannot parse {line!r}: {exc}", ln) from exc
    if n is None:
        raise GraphFormatError("empty edge-list file")
    return _build(n, edges, weights, None, lines)


def parse_dimacs(text: str) -> Graph:
    n = None
    node_weights = None
    edges, weights, lines = [], [], []
    for ln, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split()
        if not toks or toks[0] == "c":
            continue
        try:
            if toks[0] == "p":
                if len(toks) != 4 or toks[1] not in ("edge", "col"):
                    raise GraphFormatError(f"bad problem line {raw.strip()!r}", ln)
                n = int(toks[2])
                node_weights = [1.0] * n
            elif toks[0] == "e":
                if n is None:
                    raise GraphFormatError("edge before 'p' line", ln)
                if len(toks) not in (3, 4):
                    raise GraphFormatError(f"expected 'e i j [w]', got {raw.strip()!r}", ln)
                edges.append((int(toks[1]) - 1, int(toks[2]) - 1))
                weights.append(float(toks[3]) if len(toks) == 4 else 1.0)
                lines.append(ln)
            elif toks[0] == "n":
                if n is None:
                    raise GraphFormatError("node weight before 'p' line", ln)
                i = int(toks[1]) - 1
                if not 0 <= i < n:
                    raise GraphFormatError(f"node {i + 1} out of range", ln)
                node_weights[i] = float(toks[2])
            else:
                raise GraphFormatError(f"unknown line type {toks[0]!r}", ln)
        except (ValueError, IndexError) as exc:
            if isinstance(exc, GraphFormatError):
                raise
            raise GraphFormatError(f"cannot parse {raw.strip()!r}: {exc}", ln) from exc
    if n is None:
        raise GraphFormatError("missing 'p edge n m' line")
    return _build(n, edges, weights, node_weights, lines)


def parse_json(text: str) -> Graph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(exc.msg, exc.lineno) from exc
    return Graph.from_dict(data)


def load_graph(path: str | Path, format: str | None = None) -> Graph:
    """Read a graph file. ``format`` defaults to a guess from the suffix."""
    fmt = _normalize_format(format or guess_format(path))
    text = Path(path).read_text()
    return {"edge-list": parse_edge_list, "dimacs": parse_dimacs, "json": parse_json}[fmt](text)


def _fmt_w(w: float) -> str:
    return repr(float(w))


def format_graph(g: Graph, format: str) -> str:
    fmt = _normalize_format(format)
    unit_edges = bool(np.all(g.edge_weights == 1.0))
    if fmt == "edge-list":
        out = [str(g.n)]
        for (i, j), w in zip(g.edges, g.edge_weights):
            out.append(f"{i} {j}" if unit_edges else f"{i} {j} {_fmt_w(w)}")
        return "\n".join(out) + "\n"
    if fmt == "dimacs":
        out = [f"p edge {g.n} {g.m}"]
        for i, w in enumerate(g.node_weights):
            if w != 1.0:
                out.append(f"n {i + 1} {_fmt_w(w)}")
        for (i, j), w in zip(g.edges, g.edge_weights):
            out.append(f"e {i + 1} {j + 1}" if unit_edges else f"e {i + 1} {j + 1} {_fmt_w(w)}")
        return "\n".join(out) + "\n"
    return json.dumps(g.to_dict(), sort_keys=True) + "\n"


def write_graph(g: Graph, path: str | Path, format: str | None = None) -> None:
    fmt = _normalize_format(format or guess_format(path))
    Path(path).write_text(format_graph(g, fmt))
