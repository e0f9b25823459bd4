"""Per-instance annealed optimisation, conditional decoding and the solve pipeline."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .energy import Kind, ProblemInstance, is_feasible, lipschitz_bound, objective, repair
from .schedule import DEFAULT_TAU_K, Schedule, make_schedule
from .variational import EPS, clamp, coordinate_gaps

OPTIMIZERS = ("langevin", "mfa")


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``tau0="auto"`` takes the instance's Lipschitz bound (times ``tau0_scale``);
    ``learning_rate=None`` means ``lr_scale / lipschitz_bound``. An explicit
    ``schedule`` overrides the schedule fields.
    """

    schedule_kind: str = "linear"
    tau0: float | str = "auto"
    tau0_scale: float = 1.0
    tauK: float = DEFAULT_TAU_K
    K: int = 500
    steps_per_temperature: int = 5
    learning_rate: float | None = None
    lr_scale: float = 0.1
    noise_sigma: float = 0.01
    seed: int = 0
    optimizer: str = "langevin"
    mfa_tol: float = 1e-9
    schedule: Schedule | None = None

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.steps_per_temperature < 1:
            raise ValueError("steps_per_temperature must be positive")
        if self.mfa_tol < 0:
            raise ValueError("mfa_tol must be nonnegative")

    def schedule_for(self, inst: ProblemInstance) -> Schedule:
        if self.schedule is not None:
            return self.schedule
        if self.tau0 == "auto":
            tau0 = lipschitz_bound(inst) * self.tau0_scale
        else:
            tau0 = float(self.tau0)
        # a start below the floor degenerates to a constant schedule at tauK
        tau0 = max(tau0, self.tauK)
        return make_schedule(self.schedule_kind, tau0, self.tauK, self.K)

    def lr_for(self, inst: ProblemInstance) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return self.lr_scale / max(lipschitz_bound(inst), 1e-12)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = self.schedule.to_dict() if self.schedule else None
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        data = dict(data)
        sched = data.pop("schedule", None)
        if isinstance(sched, dict):
            tau0 = sched.get("tau0", "auto")
            if tau0 == "auto":
                data.setdefault("schedule_kind", sched.get("kind", "linear"))
                data.setdefault("tauK", sched.get("tauK", DEFAULT_TAU_K))
                data.setdefault("K", sched.get("K", 500))
                sched = None
            else:
                sched = make_schedule(
                    sched.get("kind", "linear"), float(tau0), sched.get("tauK", DEFAULT_TAU_K), sched.get("K", 500)
                )
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(schedule=sched, **data)


@dataclass
class Solution:
    assignment: np.ndarray
    objective: float
    feasible: bool
    ratio: float | None = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bits": "".join(str(int(b)) for b in self.assignment),
            "objective": float(self.objective),
            "feasible": bool(self.feasible),
            "ratio": None if self.ratio is None else float(self.ratio),
            "wall_time": float(self.wall_time),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def quality_ratio(kind: Kind | str, obtained: float, optimum: float) -> float:
    """Solution quality in [0, 1], larger is better.

    Maximisation (mis / clique): obtained weight over optimal weight.
    Minimisation (mds): optimal weight over obtained weight.
    Objectives are the ``c(x)`` values, so max problems are negated weights.
    """
    kind = Kind.parse(kind)
    if kind is Kind.MINCUT:
        raise ValueError("mincut is scored by conductance, not a ratio")
    if kind.maximize:
        if optimum == 0:
            return 1.0
        return float(obtained / optimum)
    if obtained == 0:
        return 1.0 if optimum == 0 else 0.0
    return float(optimum / obtained)


def conductance(inst: ProblemInstance, x) -> float:
    """``cut(S) / vol(S)``; infinite for an empty-volume side."""
    x = np.asarray(x, dtype=float)
    vol = float(inst.degrees @ x)
    cut = float(objective(inst, x)) if inst.kind is Kind.MINCUT else _cut_value(inst, x)
    return cut / vol if vol > 0 else math.inf


def _cut_value(inst: ProblemInstance, x: np.ndarray) -> float:
    e = inst.graph.edge_array()
    if not len(e):
        return 0.0
    return float(inst.graph.edge_weights @ (x[e[:, 0]] != x[e[:, 1]]))


# ---------------------------------------------------------------------------
# Optimisers
# ---------------------------------------------------------------------------


def _right_mul(M, X: np.ndarray) -> np.ndarray:
    """``X @ M`` for a symmetric dense or sparse ``M`` and row-stacked ``X``."""
    if isinstance(M, np.ndarray):
        return X @ M
    return np.asarray((M @ X.T).T)


def _energy_grad_fn(inst: ProblemInstance) -> Callable[[np.ndarray], np.ndarray]:
    """Expected-energy gradient for interior marginals, one row per run."""
    w = inst.weights
    if inst.kind in (Kind.MIS, Kind.CLIQUE):
        B = inst.pair_matrix
        return lambda phi: _right_mul(B, phi) - w
    if inst.kind is Kind.MDS:
        C = inst.closed_matrix
        beta = inst.penalties

        def g(phi):
            q = 1.0 - phi
            s = _right_mul(C, np.log(q))
            return w - _right_mul(C, beta * np.exp(s)) / q

        return g
    W = inst.edge_matrix
    d = inst.degrees.astype(float)
    d0, d1 = inst.volume_bounds
    beta = float(inst.penalties)

    def g(phi):
        vol = phi @ d
        slope = (vol > d1).astype(float) - (vol < d0).astype(float)
        return _right_mul(W, 1.0 - 2.0 * phi) + beta * slope[:, None] * d

    return g


def anneal_optimize_many(
    inst: ProblemInstance,
    config: SolverConfig,
    seeds,
    init: np.ndarray | None = None,
    trace: list | None = None,
) -> np.ndarray:
    """Run :func:`anneal_optimize` for several seeds at once; one row per seed.

    Each seed owns its noise stream, so a row does not depend on which other
    seeds share the batch.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    sched = config.schedule_for(inst)
    lr = config.lr_for(inst)
    rngs = [np.random.default_rng(s) for s in seeds]
    n, S = inst.n, len(seeds)
    spt = config.steps_per_temperature
    if init is None:
        phi = np.full((S, n), 0.5)
    else:
        phi = np.tile(clamp(init), (S, 1))
    energy_grad = _energy_grad_fn(inst)
    sigma = config.noise_sigma
    lo, hi = EPS, 1.0 - EPS
    for k, tau in enumerate(sched.temperatures()):
        if sigma > 0:
            noise = np.stack([r.normal(0.0, sigma, (spt, n)) for r in rngs], axis=1)
        for t in range(spt):
            g = energy_grad(phi)
            if tau > 0:
                g += tau * (np.log(phi) - np.log1p(-phi))
            if sigma > 0:
                g += noise[t]
            phi = np.clip(phi - lr * g, lo, hi)
        if trace is not None:
            trace.append((k, float(tau), phi.copy()))
    return phi


def anneal_optimize(
    inst: ProblemInstance,
    config: SolverConfig,
    init: np.ndarray | None = None,
    trace: list | None = None,
) -> np.ndarray:
    """Noisy gradient descent on the annealed loss along the cooling schedule.

    Starts from ``phi = 0.5`` unless ``init`` is given. If ``trace`` is a list,
    ``(k, tau, phi)`` is appended after each temperature.
    """
    rows: list | None = [] if trace is not None else None
    phi = anneal_optimize_many(inst, config, [config.seed], init, rows)[0]
    if trace is not None:
        trace.extend((k, tau, p[0]) for k, tau, p in rows)
    return phi


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


class _CoordinateGaps:
    """Single-coordinate gaps kept current under Gauss-Seidel updates.

    Sweeps touch one node at a time, so the state is held in Python lists,
    which is much faster than numpy for the short neighbour loops involved.
    """

    def __init__(self, inst: ProblemInstance, phi: np.ndarray):
        self.kind = inst.kind
        self.phi = [float(v) for v in phi]
        self.w = [float(v) for v in inst.weights]
        n = inst.n
        if self.kind in (Kind.MIS, Kind.CLIQUE):
            B = inst.pair_matrix
            B = B.tocsr() if not isinstance(B, np.ndarray) else B
            self.rows = [self._row(B, i) for i in range(n)]
        elif self.kind is Kind.MDS:
            g = inst.graph
            self.closed = [list(g.closed_neighborhood(i)) for i in range(n)]
            self.beta = [float(b) for b in inst.penalties]
            self.resync()
        else:
            W = inst.edge_matrix
            W = W.tocsr() if not isinstance(W, np.ndarray) else W
            self.rows = [self._row(W, i) for i in range(n)]
            self.deg = [float(d) for d in inst.degrees]
            self.d0, self.d1 = (float(v) for v in inst.volume_bounds)
            self.pen = float(inst.penalties)
            self.resync()

    @staticmethod
    def _row(M, i: int) -> list[tuple[int, float]]:
        if isinstance(M, np.ndarray):
            idx = np.flatnonzero(M[i])
            return [(int(j), float(M[i, j])) for j in idx]
        lo, hi = M.indptr[i], M.indptr[i + 1]
        return [(int(j), float(v)) for j, v in zip(M.indices[lo:hi], M.data[lo:hi]) if v != 0]

    def resync(self) -> None:
        """Recompute the running sums from scratch (bounds round-off drift)."""
        if self.kind is Kind.MDS:
            self.logq = [math.log1p(-v) for v in self.phi]
            self.logp = [sum(self.logq[j] for j in c) for c in self.closed]
        elif self.kind is Kind.MINCUT:
            self.vol = sum(d * v for d, v in zip(self.deg, self.phi))

    def _hinge(self, v: float) -> float:
        return max(v - self.d1, 0.0) + max(self.d0 - v, 0.0)

    def gap(self, i: int) -> float:
        phi = self.phi
        if self.kind in (Kind.MIS, Kind.CLIQUE):
            return -self.w[i] + sum(b * phi[j] for j, b in self.rows[i])
        if self.kind is Kind.MDS:
            li, logp, beta = self.logq[i], self.logp, self.beta
            return self.w[i] - sum(beta[t] * math.exp(logp[t] - li) for t in self.closed[i])
        d = self.deg[i]
        base = self.vol - d * phi[i]
        cut = sum(wij * (1.0 - 2.0 * phi[j]) for j, wij in self.rows[i])
        return cut + self.pen * (self._hinge(base + d) - self._hinge(base))

    def set(self, i: int, value: float) -> None:
        if self.kind is Kind.MDS:
            new = math.log1p(-value)
            delta = new - self.logq[i]
            logp = self.logp
            for t in self.closed[i]:
                logp[t] += delta
            self.logq[i] = new
        elif self.kind is Kind.MINCUT:
            self.vol += self.deg[i] * (value - self.phi[i])
        self.phi[i] = value


def mfa_optimize(inst: ProblemInstance, config: SolverConfig, init: np.ndarray | None = None) -> np.ndarray:
    """Mean-field annealing: ``phi_i <- sigmoid(-gap_i / tau)`` swept in index order.

    Up to ``steps_per_temperature`` sweeps run at each temperature, stopping
    early once no coordinate moves by more than ``mfa_tol``. The update has no
    randomness, so the seed does not affect the result.
    """
    sched = config.schedule_for(inst)
    phi0 = np.full(inst.n, 0.5) if init is None else clamp(init)
    state = _CoordinateGaps(inst, phi0)
    phi = state.phi
    lo, hi = EPS, 1.0 - EPS
    nodes = range(inst.n)
    for tau in sched.temperatures():
        tau = float(tau)
        state.resync()
        for _ in range(config.steps_per_temperature):
            moved = 0.0
            for i in nodes:
                g = state.gap(i)
                if tau > 0:
                    v = _sigmoid(-g / tau)
                elif g < 0:
                    v = 1.0
                elif g > 0:
                    v = 0.0
                else:
                    v = phi[i]
                v = min(max(v, lo), hi)
                moved = max(moved, abs(v - phi[i]))
                state.set(i, v)
            if moved <= config.mfa_tol:
                break
    return np.array(phi)


def decode(inst: ProblemInstance, phi) -> np.ndarray:
    """Conditional-expectation rounding of marginals to an assignment.

    Nodes are fixed in order of decreasing ``|phi_i - 0.5|`` (ties by index);
    each takes the bit with the lower conditional expected energy given the
    bits already fixed and the remaining marginals. Exact ties keep the bit
    nearer to ``phi_i`` (0 at exactly one half). Entries that are exactly 0
    or 1 are already decided and kept, which leaves the conditional
    expectation unchanged.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (inst.n,):
        raise ValueError(f"marginals have shape {phi.shape}, expected ({inst.n},)")
    undecided = [i for i in range(inst.n) if 0.0 < phi[i] < 1.0]
    order = sorted(undecided, key=lambda i: (-abs(phi[i] - 0.5), i))
    v = phi.copy()
    for i in order:
        g = coordinate_gaps(inst, v)[i]
        if g < 0:
            v[i] = 1.0
        elif g > 0:
            v[i] = 0.0
        else:
            v[i] = 1.0 if phi[i] > 0.5 else 0.0
    return v.astype(np.int8)


def _finish(inst: ProblemInstance, phi: np.ndarray, reference: float | None, elapsed: float) -> Solution:
    x = repair(inst, decode(inst, phi), check_penalties=False)
    obj = objective(inst, x)
    ratio = None
    if reference is not None and inst.kind is not Kind.MINCUT:
        ratio = quality_ratio(inst.kind, obj, reference)
    sol = Solution(x, obj, is_feasible(inst, x), ratio, elapsed)
    if inst.kind is Kind.MINCUT:
        sol.extra["conductance"] = conductance(inst, x)
    return sol


def solve(
    inst: ProblemInstance,
    config: SolverConfig = SolverConfig(),
    reference: float | None = None,
    timing: bool = True,
) -> Solution:
    """Optimise marginals, decode, repair. Always returns a feasible solution.

    ``reference`` is the optimal objective, used to fill ``ratio``. With
    ``timing=False`` the wall time is reported as 0 so outputs are reproducible.
    """
    t0 = time.perf_counter()
    if config.optimizer == "mfa":
        phi = mfa_optimize(inst, config)
    else:
        phi = anneal_optimize(inst, config)
    sol = _finish(inst, phi, reference, 0.0)
    if timing:
        sol.wall_time = time.perf_counter() - t0
    return sol


def solve_many(
    inst: ProblemInstance,
    config: SolverConfig,
    seeds,
    reference: float | None = None,
    timing: bool = True,
) -> list[Solution]:
    """:func:`solve` for each seed; same results as separate calls, computed in one batch.

    Wall time is the batch time split evenly across seeds. MFA ignores the
    seed, so it runs once and the solution is repeated.
    """
    seeds = list(seeds)
    t0 = time.perf_counter()
    if config.optimizer == "mfa":
        phis = [mfa_optimize(inst, config)] * len(seeds)
    else:
        phis = list(anneal_optimize_many(inst, config, seeds))
    sols = [_finish(inst, phi, reference, 0.0) for phi in phis]
    if timing:
        share = (time.perf_counter() - t0) / max(len(seeds), 1)
        for sol in sols:
            sol.wall_time = share
    return sols


def with_seed(config: SolverConfig, seed: int) -> SolverConfig:
    return replace(config, seed=seed)
