"""A small message-passing network trained across instances with the annealed loss.

Node features are ``(w_i, d_i / max_d, 1)``. Each layer computes
``H <- tanh((H + A H) W + b)`` (sum aggregation over neighbours plus self),
then a linear read-out gives one logit per node and
``phi = EPS + (1 - 2 EPS) * sigmoid(logit)``. The backward pass is written
out by hand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import variational as var
from .energy import ProblemInstance, lipschitz_bound, objective, repair
from .schedule import Schedule

EPS = var.EPS


@dataclass
class ModelParams:
    """Layer weights ``[W_0, b_0, ..., W_{L-1}, b_{L-1}, w_out, b_out]``."""

    arrays: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return (len(self.arrays) - 2) // 2

    @property
    def hidden(self) -> int:
        return self.arrays[0].shape[1]

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        return [a.shape for a in self.arrays]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays])

    def unflatten(self, vec: np.ndarray) -> "ModelParams":
        out, pos = [], 0
        for shape in self.shapes:
            size = int(np.prod(shape))
            out.append(np.array(vec[pos : pos + size], dtype=float).reshape(shape))
            pos += size
        if pos != len(vec):
            raise ValueError(f"vector length {len(vec)} does not match {pos} parameters")
        return ModelParams(out)

    def copy(self) -> "ModelParams":
        return ModelParams([a.copy() for a in self.arrays])

    def validate(self) -> None:
        L = self.n_layers
        if len(self.arrays) != 2 * L + 2 or L < 1:
            raise ValueError("malformed parameter list")
        h = self.hidden
        for layer in range(L):
            W, b = self.arrays[2 * layer], self.arrays[2 * layer + 1]
            rows = N_FEATURES if layer == 0 else h
            if W.shape != (rows, h) or b.shape != (h,):
                raise ValueError(f"layer {layer} has shapes {W.shape}, {b.shape}")
        if self.arrays[-2].shape != (h,) or self.arrays[-1].shape != ():
            raise ValueError("bad read-out shapes")
        if not all(np.all(np.isfinite(a)) for a in self.arrays):
            raise ValueError("parameters must be finite")

    def to_json(self) -> str:
        return json.dumps(
            {"shapes": [list(s) for s in self.shapes], "values": [float(v) for v in self.flatten()]}
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        data = json.loads(text)
        shapes = [tuple(s) for s in data["shapes"]]
        template = cls([np.zeros(s) for s in shapes])
        return template.unflatten(np.array(data["values"], dtype=float))


N_FEATURES = 3


def init_params(n_layers: int = 2, hidden: int = 16, seed: int = 0, scale: float = 0.5) -> ModelParams:
    rng = np.random.default_rng(seed)
    arrays = []
    rows = N_FEATURES
    for _ in range(n_layers):
        arrays.append(rng.normal(0.0, scale / np.sqrt(rows), (rows, hidden)))
        arrays.append(np.zeros(hidden))
        rows = hidden
    arrays.append(rng.normal(0.0, scale / np.sqrt(hidden), hidden))
    arrays.append(np.array(0.0))
    return ModelParams(arrays)


def zero_params(n_layers: int = 2, hidden: int = 16) -> ModelParams:
    p = init_params(n_layers, hidden)
    return ModelParams([np.zeros_like(a) for a in p.arrays])


def node_features(inst: ProblemInstance) -> np.ndarray:
    d = inst.graph.degrees.astype(float)
    dmax = d.max() if len(d) and d.max() > 0 else 1.0
    return np.column_stack([inst.weights, d / dmax, np.ones(inst.n)])


def _propagator(inst: ProblemInstance):
    a = inst.graph.adjacency_matrix(np.ones(inst.graph.m))
    if isinstance(a, np.ndarray):
        return a + np.eye(inst.n)
    import scipy.sparse as sp

    return (a + sp.identity(inst.n, format="csr")).tocsr()


def _forward(params: ModelParams, inst: ProblemInstance):
    P = _propagator(inst)
    H = node_features(inst)
    cache = []
    L = params.n_layers
    for layer in range(L):
        W, b = params.arrays[2 * layer], params.arrays[2 * layer + 1]
        M = np.asarray(P @ H)
        H = np.tanh(M @ W + b)
        cache.append((M, H))
    z = H @ params.arrays[-2] + params.arrays[-1]
    s = 1.0 / (1.0 + np.exp(-z))
    phi = EPS + (1.0 - 2.0 * EPS) * s
    return phi, s, cache, P


def forward(params: ModelParams, inst: ProblemInstance) -> np.ndarray:
    """Marginals predicted for ``inst``."""
    params.validate()
    return _forward(params, inst)[0]


def _backward(params: ModelParams, s, cache, P, dphi) -> list[np.ndarray]:
    L = params.n_layers
    grads: list[np.ndarray] = [None] * len(params.arrays)  # type: ignore[list-item]
    dz = dphi * (1.0 - 2.0 * EPS) * s * (1.0 - s)
    H_last = cache[-1][1]
    grads[-2] = H_last.T @ dz
    grads[-1] = np.array(dz.sum())
    dH = np.outer(dz, params.arrays[-2])
    for layer in reversed(range(L)):
        M, H = cache[layer]
        W = params.arrays[2 * layer]
        delta = dH * (1.0 - H * H)
        grads[2 * layer] = M.T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer:
            # P is symmetric, so P^T = P
            dH = np.asarray(P @ (delta @ W.T))
    return grads


def loss_and_grad(
    params: ModelParams, batch: Sequence[ProblemInstance], tau: float
) -> tuple[float, np.ndarray]:
    """Mean annealed loss over ``batch`` and its gradient w.r.t. the flat parameters."""
    if not batch:
        raise ValueError("batch must be nonempty")
    total = 0.0
    acc = np.zeros(sum(a.size for a in params.arrays))
    for inst in batch:
        phi, s, cache, P = _forward(params, inst)
        total += var.loss(inst, phi, tau)
        dphi = var.grad(inst, phi, tau)
        acc += np.concatenate([g.ravel() for g in _backward(params, s, cache, P, dphi)])
    return total / len(batch), acc / len(batch)


def param_rel_change(before: ModelParams, after: ModelParams) -> float:
    """``||after - before|| / ||before||`` over flattened parameters."""
    if before.shapes != after.shapes:
        raise ValueError("parameter shapes differ")
    v = before.flatten()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("relative change undefined for an all-zero reference vector")
    return float(np.linalg.norm(after.flatten() - v) / norm)


def predict_solution(params: ModelParams, inst: ProblemInstance) -> np.ndarray:
    from .solver import decode

    return repair(inst, decode(inst, forward(params, inst)), check_penalties=False)


@dataclass
class TrainResult:
    params: ModelParams
    initial: ModelParams
    metrics: list[dict]

    def metrics_csv(self) -> str:
        lines = ["epoch,tau,loss,val_ratio"]
        for m in self.metrics:
            vr = "" if m["val_ratio"] is None else repr(m["val_ratio"])
            lines.append(f"{m['epoch']},{m['tau']!r},{m['loss']!r},{vr}")
        return "\n".join(lines) + "\n"


def validation_ratio(params: ModelParams, val: Sequence[tuple[ProblemInstance, float]]) -> float:
    from .solver import quality_ratio

    ratios = [quality_ratio(inst.kind, objective(inst, predict_solution(params, inst)), ref) for inst, ref in val]
    return float(np.mean(ratios))


def train(
    dataset: Sequence[ProblemInstance],
    epochs: int,
    schedule: Schedule,
    lr: float,
    seed: int,
    *,
    batch_size: int = 8,
    n_layers: int = 2,
    hidden: int = 16,
    init: ModelParams | None = None,
    validation: Sequence[tuple[ProblemInstance, float]] | None = None,
    val_every: int = 1,
    per_batch: bool = False,
    clip_norm: float | None = None,
) -> TrainResult:
    """Mini-batch gradient descent on the mean annealed loss.

    The temperature at epoch ``e`` is ``schedule.temperature(min(e, K))``; with
    ``per_batch=True`` the schedule index advances once per batch instead.
    ``clip_norm`` rescales any batch gradient longer than it, which keeps the
    hot epochs (gradients grow with the temperature) from overshooting.
    """
    if clip_norm is not None and not clip_norm > 0:
        raise ValueError("clip_norm must be positive")
    if not dataset:
        raise ValueError("dataset must be nonempty")
    rng = np.random.default_rng(seed)
    params = init.copy() if init is not None else init_params(n_layers, hidden, seed)
    initial = params.copy()
    theta = params.flatten()
    metrics = []
    step = 0
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        losses = []
        tau = schedule.temperature(min(epoch, schedule.K))
        for start in range(0, len(order), batch_size):
            if per_batch:
                tau = schedule.temperature(min(step, schedule.K))
            batch = [dataset[i] for i in order[start : start + batch_size]]
            value, g = loss_and_grad(params, batch, tau)
            losses.append(value)
            if clip_norm is not None:
                norm = float(np.linalg.norm(g))
                if norm > clip_norm:
                    g = g * (clip_norm / norm)
            if lr != 0:
                theta = theta - lr * g
                params = params.unflatten(theta)
            step += 1
        val_ratio = None
        if validation and ((epoch + 1) % val_every == 0 or epoch == epochs - 1):
            val_ratio = validation_ratio(params, validation)
        metrics.append({"epoch": epoch, "tau": float(tau), "loss": float(np.mean(losses)), "val_ratio": val_ratio})
    return TrainResult(params, initial, metrics)


def default_training_schedule(dataset: Sequence[ProblemInstance], epochs: int, kind: str = "linear", tauK: float = 1e-3):
    """Schedule over epochs starting at the largest Lipschitz bound in the dataset."""
    from .schedule import make_schedule

    tau0 = max(lipschitz_bound(inst) for inst in dataset)
    return make_schedule(kind, max(tau0, tauK), tauK, max(epochs - 1, 1))
