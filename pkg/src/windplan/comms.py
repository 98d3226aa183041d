"""Air-to-ground link rates, collected volume and TDMA schedule feasibility.

Indexing: waypoints run 0..N+1, slots run 1..N+1.  Arrays of per-slot data
are stored with row ``n - 1`` holding slot ``n``, so slot ``n`` pairs with
the rate at waypoint ``n - 1`` (the slot's leading waypoint) and a rate table
of shape ``(N + 1, K)`` lines up row-for-row with the schedule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

LOG2E = 1.0 / np.log(2.0)


def link_rate(q, buoy_pos, bandwidth: float, ref_snr: float, altitude: float):
    """B log2(1 + g0 / (H^2 + |q - b|^2)), broadcasting over leading axes of q."""
    d2 = np.sum((np.asarray(q, dtype=float) - np.asarray(buoy_pos, dtype=float)) ** 2, axis=-1)
    return bandwidth * np.log2(1.0 + ref_snr / (altitude ** 2 + d2))


def rate_table(q: np.ndarray, buoys: np.ndarray, ch) -> np.ndarray:
    """Rates (bits/s) at the leading waypoint of every slot: shape (N+1, K)."""
    q = np.asarray(q, dtype=float)
    return link_rate(q[:-1, None, :], buoys[None, :, :], ch.bandwidth_hz, ch.ref_snr,
                     ch.altitude_m)


def spectral_eff(d2, ch):
    """log2(1 + g0/(H^2 + d2)) in bits/s/Hz."""
    return np.log2(1.0 + ch.ref_snr / (ch.altitude_m ** 2 + d2))


def spectral_eff_slope(d2, ch):
    """Magnitude of d(spectral_eff)/d(d2) at d2; the rate is convex in d2 so
    the tangent is a global under-estimator."""
    h2 = ch.altitude_m ** 2
    return LOG2E * ch.ref_snr / ((h2 + d2) * (h2 + d2 + ch.ref_snr))


@dataclass
class CommSchedule:
    tau: np.ndarray  # (N+1, K), row n-1 is slot n

    @property
    def K(self) -> int:
        return self.tau.shape[1]

    def check(self, slot_s: float, tol: float = 1e-9) -> float:
        """Largest violation of tau >= 0 and sum_k tau <= slot_s."""
        neg = max(0.0, -float(self.tau.min(initial=0.0)))
        over = max(0.0, float((self.tau.sum(axis=1) - slot_s).max(initial=0.0)))
        return max(neg, over)


def collected_volume(rates: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Bits per buoy: sum over slots of tau * rate at the leading waypoint."""
    rates = np.asarray(rates, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if rates.shape != tau.shape:
        raise ValueError(f"rate table {rates.shape} and schedule {tau.shape} differ in shape")
    return (rates * tau).sum(axis=0)


LP_RATIO_TOL = 1e-9


@dataclass
class LPResult:
    feasible: bool
    ratio: float  # best achievable min_k collected_k / target_k
    schedule: CommSchedule | None


def feasibility_lp(rates: np.ndarray, targets, slot_s: float) -> LPResult:
    """Max-min collection ratio over TDMA schedules.

    Feasible iff the optimal ratio is >= 1; the returned schedule is scaled to
    meet every target exactly on the binding buoy.  Buoys with a zero target
    are ignored in the ratio and get no air time.
    """
    rates = np.asarray(rates, dtype=float)
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (rates.shape[1],))
    M, K = rates.shape
    active = targets > 0
    if not active.any():
        return LPResult(True, np.inf, CommSchedule(np.zeros((M, K))))
    # variables: tau (M*K, row-major slot-then-buoy), t
    nv = M * K + 1
    c = np.zeros(nv)
    c[-1] = -1.0
    A, b = [], []
    for n in range(M):
        row = np.zeros(nv)
        row[n * K:(n + 1) * K] = 1.0
        A.append(row)
        b.append(slot_s)
    for k in np.flatnonzero(active):
        row = np.zeros(nv)
        row[k:M * K:K] = -rates[:, k] / targets[k]
        row[-1] = 1.0
        A.append(row)
        b.append(0.0)
    bounds = [(0, None)] * (M * K) + [(None, None)]
    for k in np.flatnonzero(~active):
        for n in range(M):
            bounds[n * K + k] = (0, 0)
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"feasibility LP failed: {res.message}")
    ratio = float(res.x[-1])
    tau = np.clip(res.x[:-1].reshape(M, K), 0.0, None)
    if ratio >= 1.0:
        tau = tau / ratio
    # an exactly-tight instance may come back a few ulps short of 1
    return LPResult(ratio >= 1.0 - LP_RATIO_TOL, ratio, CommSchedule(tau))


def proportional_schedule(rates: np.ndarray, targets, slot_s: float) -> np.ndarray:
    """Split every slot in proportion to each buoy's share of its target,
    weighted by the slot's rate; fully supported wherever rates are positive."""
    rates = np.asarray(rates, dtype=float)
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (rates.shape[1],))
    w = rates * np.where(targets > 0, targets / np.maximum(rates.sum(axis=0), 1e-300), 0.0)
    s = w.sum(axis=1, keepdims=True)
    return np.where(s > 0, slot_s * w / np.where(s > 0, s, 1.0), 0.0)
