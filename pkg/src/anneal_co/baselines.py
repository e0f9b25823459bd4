"""Greedy reference heuristics. Ties always go to the lowest node index."""

from __future__ import annotations

import time

import numpy as np

from .energy import Kind, ProblemInstance, is_feasible, objective, repair


def _greedy_mis(inst: ProblemInstance) -> np.ndarray:
    g = inst.graph
    w = inst.weights
    alive = np.ones(inst.n, dtype=bool)
    deg = g.degrees.astype(float).copy()
    x = np.zeros(inst.n, dtype=np.int8)
    while alive.any():
        score = np.where(alive, w / (deg + 1.0), -np.inf)
        v = int(np.argmax(score))
        x[v] = 1
        for u in g.closed_neighborhood(v):
            if alive[u]:
                alive[u] = False
                for t in g.adjacency[u]:
                    deg[t] -= 1
    return x


def _greedy_clique(inst: ProblemInstance) -> np.ndarray:
    g = inst.graph
    w = inst.weights
    nbrs = [set(a) for a in g.adjacency]
    best, best_w = [], -np.inf
    for seed in sorted(range(inst.n), key=lambda i: (-w[i], i)):
        clique = [seed]
        cand = set(nbrs[seed])
        while cand:
            v = min(cand, key=lambda i: (-w[i], i))
            clique.append(v)
            cand &= nbrs[v]
        cw = float(w[clique].sum())
        if cw > best_w:
            best, best_w = clique, cw
    x = np.zeros(inst.n, dtype=np.int8)
    x[best] = 1
    return x


def _greedy_mds(inst: ProblemInstance) -> np.ndarray:
    g = inst.graph
    w = inst.weights
    closed = [g.closed_neighborhood(i) for i in range(inst.n)]
    dominated = np.zeros(inst.n, dtype=bool)
    x = np.zeros(inst.n, dtype=np.int8)
    while not dominated.all():
        best, best_score = -1, -np.inf
        for v in range(inst.n):
            if x[v]:
                continue
            gain = sum(w[u] for u in closed[v] if not dominated[u])
            if not any(not dominated[u] for u in closed[v]):
                continue
            score = gain / w[v] if w[v] > 0 else np.inf
            if score > best_score:
                best, best_score = v, score
        x[best] = 1
        dominated[list(closed[best])] = True
    return x


def _greedy_mincut(inst: ProblemInstance) -> np.ndarray:
    d = inst.degrees
    _, d1 = inst.volume_bounds
    x = np.zeros(inst.n, dtype=np.int8)
    vol = 0.0
    for v in sorted(range(inst.n), key=lambda i: (-d[i], i)):
        if vol + d[v] <= d1:
            x[v] = 1
            vol += d[v]
    return repair(inst, x, check_penalties=False)


_RULES = {
    Kind.MIS: _greedy_mis,
    Kind.CLIQUE: _greedy_clique,
    Kind.MDS: _greedy_mds,
    Kind.MINCUT: _greedy_mincut,
}


def greedy(inst: ProblemInstance, reference: float | None = None, timing: bool = True):
    """Run the kind's greedy rule and wrap the result in a ``Solution``."""
    from .solver import Solution, conductance, quality_ratio

    t0 = time.perf_counter()
    x = _RULES[inst.kind](inst)
    elapsed = time.perf_counter() - t0 if timing else 0.0
    obj = objective(inst, x)
    ratio = None
    if reference is not None and inst.kind is not Kind.MINCUT:
        ratio = quality_ratio(inst.kind, obj, reference)
    sol = Solution(x, obj, is_feasible(inst, x), ratio, elapsed)
    if inst.kind is Kind.MINCUT:
        sol.extra["conductance"] = conductance(inst, x)
    return sol
