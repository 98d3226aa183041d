"""Fixed-wing propulsion power and trajectory energy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_AIRSPEED = 0.1


@dataclass
class Trajectory:
    """Waypoints 0..N+1 with ground velocity, airspeed and wind; accelerations
    on 0..N are the forward differences of airspeed."""
    q: np.ndarray       # (N+2, 2)
    v_e: np.ndarray     # (N+2, 2) ground velocity
    wind: np.ndarray    # (N+2, 2)
    slot_s: float

    @property
    def v_air(self) -> np.ndarray:
        return self.v_e - self.wind

    @property
    def a(self) -> np.ndarray:
        """Acceleration per slot (N+1, 2)."""
        return np.diff(self.v_air, axis=0) / self.slot_s

    @property
    def N(self) -> int:
        return len(self.q) - 2

    def kinematic_residual(self) -> float:
        """Largest deviation from q[n+1] = q[n] + (v_e[n] + v_e[n+1]) T_s / 2."""
        pred = self.q[:-1] + 0.5 * (self.v_e[:-1] + self.v_e[1:]) * self.slot_s
        return float(np.abs(self.q[1:] - pred).max())

    @classmethod
    def from_airspeed(cls, q, v_air, wind, slot_s):
        return cls(np.asarray(q, float), np.asarray(v_air, float) + wind, np.asarray(wind, float),
                   float(slot_s))


@dataclass
class EnergyBreakdown:
    per_slot: np.ndarray
    kinetic: float

    @property
    def total(self) -> float:
        return float(self.per_slot.sum() + self.kinetic)


def propulsion_power(v_air, a, p):
    """w1|v|^3 + (w2/|v|)(1 + |a|^2/g^2); vectorised over leading axes."""
    v = np.asarray(v_air, dtype=float)
    a = np.asarray(a, dtype=float)
    s = np.linalg.norm(v, axis=-1)
    if np.any(s < MIN_AIRSPEED):
        raise ValueError("airspeed below 0.1 m/s: fixed-wing power model is singular")
    return p.w1 * s ** 3 + p.w2 / s * (1.0 + np.sum(a ** 2, axis=-1) / p.gravity ** 2)


def power_gradient(v_air, a, p):
    """Analytic gradient of propulsion_power with respect to (v, a)."""
    v = np.asarray(v_air, dtype=float)
    a = np.asarray(a, dtype=float)
    s = np.linalg.norm(v)
    ind = 1.0 + a @ a / p.gravity ** 2
    gv = (3 * p.w1 * s - p.w2 * ind / s ** 3) * v
    ga = 2 * p.w2 / (s * p.gravity ** 2) * a
    return gv, ga


def trajectory_energy(traj: Trajectory, p, closed: bool = False) -> EnergyBreakdown:
    """Energy of a trajectory.

    Open flights sum slot powers over waypoints 1..N and add the kinetic term
    m(|v[N+1]|^2 - |v[0]|^2)/2.  A closed lap repeats indefinitely, so every
    slot 0..N counts once, with the last acceleration wrapping back to v[0],
    and the kinetic term is zero.
    """
    va = traj.v_air
    Ts = traj.slot_s
    if closed:
        acc = np.diff(np.vstack([va[:-1], va[:1]]), axis=0) / Ts
        per = propulsion_power(va[:-1], acc, p) * Ts
        return EnergyBreakdown(per, 0.0)
    per = propulsion_power(va[1:-1], traj.a[1:], p) * Ts
    kin = 0.5 * p.mass_kg * (va[-1] @ va[-1] - va[0] @ va[0])
    return EnergyBreakdown(per, float(kin))


def optimal_loiter_speed(p) -> float:
    """Zero-acceleration minimiser of w1 v^3 + w2 / v."""
    return float((p.w2 / (3.0 * p.w1)) ** 0.25)


def max_range_speed(p) -> float:
    """Minimiser of energy per metre, w1 v^2 + w2 / v^2, in still air."""
    return float((p.w2 / p.w1) ** 0.25)
