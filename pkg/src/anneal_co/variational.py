"""Product-Bernoulli variational family and the annealed loss.

``Q_phi(x) = prod_i phi_i^x_i (1 - phi_i)^(1 - x_i)``. Marginals are plain
float arrays kept inside ``[EPS, 1 - EPS]`` so logits stay finite.
"""

from __future__ import annotations

import numpy as np

from .energy import Kind, ProblemInstance

EPS = 1e-6


def clamp(phi) -> np.ndarray:
    return np.clip(np.asarray(phi, dtype=float), EPS, 1.0 - EPS)


def _check(inst: ProblemInstance, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (inst.n,):
        raise ValueError(f"marginals have shape {phi.shape}, expected ({inst.n},)")
    return phi


def _hinge(inst: ProblemInstance, vol):
    d0, d1 = inst.volume_bounds
    return np.maximum(vol - d1, 0.0) + np.maximum(d0 - vol, 0.0)


def _mds_parts(inst: ProblemInstance, phi: np.ndarray):
    """Log-space closed-neighbourhood products of ``1 - phi``.

    Exact zeros of ``1 - phi`` are counted separately so binary coordinates
    (used while decoding) never produce ``0 * -inf``.
    """
    q = 1.0 - phi
    zero = q <= 0.0
    logq = np.log(np.where(zero, 1.0, q))
    C = inst.closed_matrix
    s = np.asarray(C @ logq).ravel()
    z = np.asarray(C @ zero.astype(float)).ravel()
    return q, zero, s, z


def expected_energy(inst: ProblemInstance, phi) -> float:
    """``E_{x ~ Q_phi}[f(x)]`` in closed form.

    Exact for mis / clique / mds (the energy is multilinear). For mincut the
    volume hinge is evaluated at the mean volume, a lower bound on its
    expectation.
    """
    phi = _check(inst, phi)
    w = inst.weights
    if inst.kind in (Kind.MIS, Kind.CLIQUE):
        return float(-w @ phi + 0.5 * phi @ (inst.pair_matrix @ phi))
    if inst.kind is Kind.MDS:
        _, _, s, z = _mds_parts(inst, phi)
        undominated = np.where(z > 0, 0.0, np.exp(s))
        return float(w @ phi + inst.penalties @ undominated)
    e = inst.graph.edge_array()
    cut = 0.0
    if len(e):
        pi, pj = phi[e[:, 0]], phi[e[:, 1]]
        cut = float(inst.graph.edge_weights @ (pi + pj - 2 * pi * pj))
    return cut + float(inst.penalties) * float(_hinge(inst, inst.degrees @ phi))


def energy_gradient(inst: ProblemInstance, phi) -> np.ndarray:
    """Partial derivatives of :func:`expected_energy` in each ``phi_i``."""
    phi = _check(inst, phi)
    if inst.kind is Kind.MINCUT:
        W = inst.edge_matrix
        g = np.asarray(W @ (1.0 - 2.0 * phi)).ravel()
        d0, d1 = inst.volume_bounds
        vol = inst.degrees @ phi
        slope = (1.0 if vol > d1 else 0.0) - (1.0 if vol < d0 else 0.0)
        return g + float(inst.penalties) * slope * inst.degrees
    # multilinear kinds: the derivative is the coordinate difference
    return coordinate_gaps(inst, phi)


def coordinate_gaps(inst: ProblemInstance, phi) -> np.ndarray:
    """``E[f | x_i = 1] - E[f | x_i = 0]`` for every ``i``, other coordinates ~ Q_phi.

    Entries of ``phi`` may be exactly 0 or 1.
    """
    phi = _check(inst, phi)
    w = inst.weights
    if inst.kind in (Kind.MIS, Kind.CLIQUE):
        return -w + np.asarray(inst.pair_matrix @ phi).ravel()
    if inst.kind is Kind.MDS:
        q, zero, s, z = _mds_parts(inst, phi)
        es = np.exp(s)
        beta = inst.penalties
        C = inst.closed_matrix
        # node i stays undominated only if every other member of N[i] is 0
        free = np.asarray(C @ (beta * es * (z == 0))).ravel()
        one_zero = np.asarray(C @ (beta * es * (z == 1))).ravel()
        with np.errstate(divide="ignore", invalid="ignore"):
            interior = free / np.where(zero, 1.0, q)
        return w - np.where(zero, one_zero, interior)
    g = np.asarray(inst.edge_matrix @ (1.0 - 2.0 * phi)).ravel()
    d = inst.degrees
    base = inst.degrees @ phi - d * phi
    h1 = _hinge(inst, base + d)
    h0 = _hinge(inst, base)
    return g + float(inst.penalties) * (h1 - h0)


def hinge_expectation(degrees, phi, d0: float, d1: float) -> float:
    """Exact ``E[(V - d1)_+ + (d0 - V)_+]`` for ``V = sum_i d_i x_i``, ``x ~ Q_phi``.

    Dynamic programming over the distribution of the integer volume.
    """
    degrees = np.asarray(degrees)
    if not np.all(degrees == np.round(degrees)) or np.any(degrees < 0):
        raise ValueError("exact hinge needs nonnegative integer degrees")
    degrees = degrees.astype(int)
    phi = np.asarray(phi, dtype=float)
    dist = np.zeros(int(degrees.sum()) + 1)
    dist[0] = 1.0
    top = 0
    for d, p in zip(degrees, phi):
        if d == 0:
            continue
        new = dist * (1.0 - p)
        new[d : top + d + 1] += p * dist[: top + 1]
        dist = new
        top += d
    vol = np.arange(len(dist), dtype=float)
    h = np.maximum(vol - d1, 0.0) + np.maximum(d0 - vol, 0.0)
    return float(dist @ h)


def exact_expected_hinge(inst: ProblemInstance, phi, max_n: int = 64) -> float:
    if inst.kind is not Kind.MINCUT:
        raise ValueError("exact hinge applies to mincut instances only")
    if inst.n > max_n:
        raise ValueError(f"n={inst.n} exceeds the exact-hinge cap {max_n}")
    phi = _check(inst, phi)
    return hinge_expectation(inst.degrees, phi, *inst.volume_bounds)


def entropy(phi) -> float:
    """Entropy (nats) of the product distribution, after clamping."""
    p = clamp(phi)
    return float(-np.sum(p * np.log(p) + (1.0 - p) * np.log1p(-p)))


def loss(inst: ProblemInstance, phi, tau: float) -> float:
    """Annealed loss ``E_Q[f] - tau * H(Q)``."""
    if tau < 0:
        raise ValueError("temperature must be nonnegative")
    return expected_energy(inst, phi) - tau * entropy(phi)


def grad(inst: ProblemInstance, phi, tau: float) -> np.ndarray:
    """Gradient of :func:`loss` in ``phi``."""
    phi = _check(inst, phi)
    p = clamp(phi)
    return energy_gradient(inst, phi) + tau * (np.log(p) - np.log1p(-p))
