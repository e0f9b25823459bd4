"""Exact ground truth for small instances.

Assignments are indexed by bitmask: bit ``i`` of the index is ``x_i``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .energy import InfeasibleError, Kind, ProblemInstance, energy, feasible_mask, objective

MAX_BRUTE_FORCE_N = 24
MAX_EBM_N = 20
MAX_LIMIT_N = 16
_CHUNK = 1 << 16


class SizeError(ValueError):
    """Instance too large for exhaustive enumeration."""


def _require(inst: ProblemInstance, cap: int) -> None:
    if inst.n > cap:
        raise SizeError(f"n={inst.n} exceeds the enumeration cap {cap}")


def assignment_bits(start: int, stop: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


def _chunks(n: int) -> Iterator[tuple[int, np.ndarray]]:
    total = 1 << n
    for start in range(0, total, _CHUNK):
        yield start, assignment_bits(start, min(start + _CHUNK, total), n)


def enumerate_energies(inst: ProblemInstance, cap: int = MAX_EBM_N) -> np.ndarray:
    """Energy of every assignment, indexed by bitmask."""
    _require(inst, cap)
    return np.concatenate([np.atleast_1d(energy(inst, X)) for _, X in _chunks(inst.n)])


def brute_force_optimum(
    inst: ProblemInstance, cap: int = MAX_BRUTE_FORCE_N, tol: float = 1e-9
) -> tuple[float, list[tuple[int, ...]]]:
    """Best feasible objective and every feasible assignment attaining it."""
    _require(inst, cap)
    best = np.inf
    masks: list[int] = []
    for start, X in _chunks(inst.n):
        c = np.atleast_1d(objective(inst, X))
        c = np.where(feasible_mask(inst, X), c, np.inf)
        cmin = c.min()
        if cmin < best - tol:
            best = cmin
            masks = []
        if cmin <= best + tol:
            masks.extend(int(start + k) for k in np.flatnonzero(c <= best + tol))
    if not np.isfinite(best):
        raise InfeasibleError("instance has no feasible assignment")
    args = [tuple(int((b >> i) & 1) for i in range(inst.n)) for b in masks]
    return float(best), args


@dataclass(frozen=True)
class ExactDistribution:
    probabilities: np.ndarray
    temperature: float
    energies: np.ndarray

    @property
    def n(self) -> int:
        return int(np.log2(len(self.probabilities)))

    def prob(self, x: Sequence[int]) -> float:
        return float(self.probabilities[sum(int(b) << i for i, b in enumerate(x))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bitmask", "energy", "probability"])
        for k, (e, p) in enumerate(zip(self.energies, self.probabilities)):
            w.writerow([k, repr(float(e)), repr(float(p))])
        return buf.getvalue()


def exact_ebm(inst: ProblemInstance, tau: float, cap: int = MAX_EBM_N) -> ExactDistribution:
    """Boltzmann distribution ``P(x) ~ exp(-f(x)/tau)`` by enumeration."""
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    f = enumerate_energies(inst, cap)
    logits = -(f - f.min()) / tau
    p = np.exp(logits)
    p /= p.sum()
    return ExactDistribution(p, float(tau), f)


def limit_check(
    inst: ProblemInstance, taus: Sequence[float], cap: int = MAX_LIMIT_N
) -> list[tuple[float, float, float]]:
    """For each temperature: (tau, TV distance to uniform, mass on the optima)."""
    _require(inst, cap)
    _, args = brute_force_optimum(inst, cap)
    idx = [sum(b << i for i, b in enumerate(x)) for x in args]
    out = []
    for tau in taus:
        dist = exact_ebm(inst, tau, cap)
        p = dist.probabilities
        tv = 0.5 * float(np.abs(p - 1.0 / len(p)).sum())
        out.append((float(tau), tv, float(p[idx].sum())))
    return out


def unbiasedness_check(inst: ProblemInstance, cap: int = MAX_EBM_N, tol: float = 1e-9) -> bool:
    """True iff the lowest energy equals the best feasible objective."""
    _require(inst, cap)
    fmin = np.inf
    cmin = np.inf
    for _, X in _chunks(inst.n):
        f = np.atleast_1d(energy(inst, X))
        fmin = min(fmin, f.min())
        c = np.atleast_1d(objective(inst, X))[feasible_mask(inst, X)]
        if len(c):
            cmin = min(cmin, c.min())
    if not np.isfinite(cmin):
        raise InfeasibleError("instance has no feasible assignment")
    return bool(abs(fmin - cmin) <= tol * max(1.0, abs(cmin)))


# ---------------------------------------------------------------------------
# Branch and bound for moderately sized instances
# ---------------------------------------------------------------------------


def _max_weight_independent_set(adj: list[int], w: np.ndarray) -> tuple[float, int]:
    """Exact max-weight independent set on bitmask adjacency. Returns (weight, mask)."""
    n = len(adj)
    best = [0.0, 0]
    wl = [float(v) for v in w]

    def bound(p: int) -> float:
        s = 0.0
        while p:
            low = p & -p
            i = low.bit_length() - 1
            if wl[i] > 0:
                s += wl[i]
            p ^= low
        return s

    def rec(p: int, cur: float, chosen: int) -> None:
        if cur > best[0]:
            best[0], best[1] = cur, chosen
        if not p or cur + bound(p) <= best[0] + 1e-12:
            return
        # branch on the candidate with most candidate neighbours
        v, vdeg = -1, -1
        q = p
        while q:
            low = q & -q
            i = low.bit_length() - 1
            d = bin(adj[i] & p).count("1")
            if d > vdeg:
                v, vdeg = i, d
            q ^= low
        if vdeg == 0:
            gain = bound(p)
            mask = 0
            q = p
            while q:
                low = q & -q
                if wl[low.bit_length() - 1] > 0:
                    mask |= low
                q ^= low
            if cur + gain > best[0]:
                best[0], best[1] = cur + gain, chosen | mask
            return
        bit = 1 << v
        if wl[v] > 0:
            rec(p & ~bit & ~adj[v], cur + wl[v], chosen | bit)
        rec(p & ~bit, cur, chosen)

    rec((1 << n) - 1, 0.0, 0)
    return best[0], best[1]


def _min_weight_dominating_set(closed: list[int], w: np.ndarray, upper: float) -> tuple[float, int]:
    n = len(closed)
    full = (1 << n) - 1
    wl = [float(v) for v in w]
    wmin = min(wl) if wl else 0.0
    best = [upper + 1e-9, None]

    def rec(dominated: int, allowed: int, cur: float, chosen: int) -> None:
        if dominated == full:
            if cur < best[0] - 1e-12:
                best[0], best[1] = cur, chosen
            return
        undom = full & ~dominated
        n_undom = bin(undom).count("1")
        # every chosen node covers at most max_cover undominated nodes
        max_cover = 0
        q = allowed
        while q:
            low = q & -q
            c = bin(closed[low.bit_length() - 1] & undom).count("1")
            if c > max_cover:
                max_cover = c
            q ^= low
        if max_cover == 0:
            return
        lb = -(-n_undom // max_cover) * wmin
        if cur + lb >= best[0] - 1e-12:
            return
        # undominated node with the fewest allowed dominators
        t, t_opts = -1, None
        q = undom
        while q:
            low = q & -q
            i = low.bit_length() - 1
            opts = closed[i] & allowed
            k = bin(opts).count("1")
            if t_opts is None or k < bin(t_opts).count("1"):
                t, t_opts = i, opts
                if k <= 1:
                    break
            q ^= low
        if not t_opts:
            return
        cands = []
        q = t_opts
        while q:
            low = q & -q
            i = low.bit_length() - 1
            cands.append((-bin(closed[i] & undom).count("1") / wl[i] if wl[i] > 0 else -np.inf, i))
            q ^= low
        cands.sort()
        banned = 0
        for _, v in cands:
            bit = 1 << v
            rec(dominated | closed[v], allowed & ~banned & ~bit, cur + wl[v], chosen | bit)
            banned |= bit

    rec(0, full, 0.0, 0)
    return best[0], best[1]


def exact_optimum(inst: ProblemInstance, brute_force_cap: int = 20) -> tuple[float, tuple[int, ...]]:
    """Optimal objective and one optimal assignment.

    Brute force up to ``brute_force_cap`` nodes; above it, branch and bound
    for mis / clique / mds. Mincut beyond the cap raises ``SizeError``.
    """
    if inst.n <= brute_force_cap:
        val, args = brute_force_optimum(inst, cap=brute_force_cap)
        return val, args[0]
    n = inst.n
    w = inst.weights
    if inst.kind in (Kind.MIS, Kind.CLIQUE):
        if np.any(w < 0):
            raise ValueError("branch and bound needs nonnegative node weights")
        g = inst.graph
        adj = [0] * n
        for i, j in g.edges:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        if inst.kind is Kind.CLIQUE:
            full = (1 << n) - 1
            adj = [full & ~a & ~(1 << i) for i, a in enumerate(adj)]
        val, mask = _max_weight_independent_set(adj, w)
        x = tuple((mask >> i) & 1 for i in range(n))
        return float(objective(inst, np.array(x))), x
    if inst.kind is Kind.MDS:
        if np.any(w <= 0):
            raise ValueError("branch and bound needs positive node weights")
        closed = [0] * n
        for i in range(n):
            for k in inst.graph.closed_neighborhood(i):
                closed[i] |= 1 << k
        from .baselines import greedy

        upper = greedy(inst).objective
        val, mask = _min_weight_dominating_set(closed, w, upper)
        if mask is None:
            x = tuple(int(v) for v in greedy(inst).assignment)
        else:
            x = tuple((mask >> i) & 1 for i in range(n))
        return float(objective(inst, np.array(x))), x
    raise SizeError(f"no exact method for mincut with n={n} > {brute_force_cap}")
