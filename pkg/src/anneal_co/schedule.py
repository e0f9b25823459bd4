"""Cooling schedules.

All three shapes grow the inverse temperature as a power of a linear ramp,
``1 / tau_k = (1 + alpha * k) ** p / tau0`` for ``k = 0..K``, with ``p = 1``
(linear), ``1/2`` (concave) or ``3`` (convex). ``alpha`` is solved so the
last temperature is exactly ``tauK``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POWERS = {"linear": 1.0, "concave": 0.5, "convex": 3.0}
DEFAULT_TAU_K = 1e-3


@dataclass(frozen=True)
class Schedule:
    kind: str
    tau0: float
    tauK: float
    K: int
    alpha: float

    @property
    def power(self) -> float:
        return POWERS[self.kind]

    def temperature(self, k: int) -> float:
        if not 0 <= k <= self.K:
            raise IndexError(f"step {k} outside 0..{self.K}")
        if k == self.K:
            return self.tauK
        return self.tau0 / (1.0 + self.alpha * k) ** self.power

    def temperatures(self) -> np.ndarray:
        t = self.tau0 / (1.0 + self.alpha * np.arange(self.K + 1)) ** self.power
        t[-1] = self.tauK
        return t

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tau0": self.tau0, "tauK": self.tauK, "K": self.K}


def make_schedule(kind: str, tau0: float, tauK: float = DEFAULT_TAU_K, K: int = 500) -> Schedule:
    if kind not in POWERS:
        raise ValueError(f"unknown schedule kind {kind!r}; expected one of {sorted(POWERS)}")
    if not (tau0 >= tauK > 0):
        raise ValueError(f"need tau0 >= tauK > 0, got tau0={tau0}, tauK={tauK}")
    if K < 1:
        raise ValueError(f"need K >= 1, got {K}")
    p = POWERS[kind]
    alpha = ((tau0 / tauK) ** (1.0 / p) - 1.0) / K
    return Schedule(kind, float(tau0), float(tauK), int(K), float(alpha))


def constant_schedule(tau: float, K: int = 500) -> Schedule:
    return make_schedule("linear", tau, tau, K)


def temperature(schedule: Schedule, k: int) -> float:
    return schedule.temperature(k)
