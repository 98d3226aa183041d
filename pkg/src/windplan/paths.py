"""Geometric reference paths turned into kinematically exact trajectories.

A geometric sketch (positions sampled per waypoint, velocities from the
sketch) generally breaks the midpoint rule
``q[n+1] = q[n] + (v_e[n] + v_e[n+1]) T_s / 2``.  :func:`fit_kinematics`
finds the closest trajectory, in least squares, that satisfies it exactly
together with the endpoint conditions.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .energy import Trajectory


def fit_kinematics(q_ref, ve_ref, slot_s, wind, mode, endpoints=None, vel_weight=1.0) -> Trajectory:
    """Least-squares projection of (q_ref, ve_ref) onto exact kinematics.

    mode: ``closed`` (periodic), ``free`` (pinned positions, equal end
    velocities) or ``fixed`` (positions and airspeeds pinned).
    """
    q_ref = np.asarray(q_ref, float)
    ve_ref = np.asarray(ve_ref, float)
    P = len(q_ref)
    nq = 2 * P
    n = 4 * P
    w = np.asarray(wind, float)
    Ts = float(slot_s)

    def qi(i, d):
        return 2 * i + d

    def vi(i, d):
        return nq + 2 * i + d

    rows, cols, vals, rhs = [], [], [], []
    r = 0

    def add(entries, b):
        nonlocal r
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)
        rhs.append(b)
        r += 1

    for i in range(P - 1):
        for d in range(2):
            add([(qi(i + 1, d), 1.0), (qi(i, d), -1.0), (vi(i, d), -0.5 * Ts),
                 (vi(i + 1, d), -0.5 * Ts)], 0.0)
    if mode == "closed":
        for d in range(2):
            add([(qi(0, d), 1.0), (qi(P - 1, d), -1.0)], 0.0)
            add([(vi(0, d), 1.0), (vi(P - 1, d), -1.0)], 0.0)
    else:
        for d in range(2):
            add([(qi(0, d), 1.0)], endpoints.q0[d])
            add([(qi(P - 1, d), 1.0)], endpoints.qF[d])
        if mode == "fixed":
            for d in range(2):
                add([(vi(0, d), 1.0)], endpoints.v0[d] + w[d])
                add([(vi(P - 1, d), 1.0)], endpoints.vF[d] + w[d])
        else:
            for d in range(2):
                add([(vi(0, d), 1.0), (vi(P - 1, d), -1.0)], 0.0)
    C = sp.csr_matrix((vals, (rows, cols)), shape=(r, n))
    hdiag = np.concatenate([np.ones(nq), np.full(nq, vel_weight * Ts ** 2)])
    H = sp.diags(hdiag)
    x_ref = np.concatenate([q_ref.ravel(), ve_ref.ravel()])
    KKT = sp.bmat([[H, C.T], [C, None]]).tocsc()
    sol = spsolve(KKT, np.concatenate([hdiag * x_ref, rhs]))
    if not np.all(np.isfinite(sol)):
        # redundant closure rows make the system singular; drop to least squares
        sol = sp.linalg.lsqr(KKT, np.concatenate([hdiag * x_ref, rhs]), atol=1e-14,
                             btol=1e-14)[0]
    q = sol[:nq].reshape(P, 2)
    ve = sol[nq:n].reshape(P, 2)
    return Trajectory(q, ve, np.tile(w, (P, 1)), Ts)


def resample(polyline, count: int, closed: bool = False) -> np.ndarray:
    """``count`` points equally spaced in arclength along a polyline."""
    pts = np.asarray(polyline, float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, s[-1], count)
    return np.column_stack([np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1])])


def polyline_length(pts) -> float:
    return float(np.linalg.norm(np.diff(np.asarray(pts, float), axis=0), axis=1).sum())


def loop_path(q0, qF, center, radius, loops, samples_per_loop=180):
    """q0 -> bottom of a circle about ``center`` -> ``loops`` counter-clockwise
    turns -> qF.  Returns a dense polyline."""
    c = np.asarray(center, float)
    ang = -np.pi / 2 + np.linspace(0.0, 2 * np.pi * loops, max(2, int(samples_per_loop * loops)) + 1)
    circle = c + radius * np.column_stack([np.cos(ang), np.sin(ang)])
    return np.vstack([np.asarray(q0, float)[None], circle, np.asarray(qF, float)[None]])


def sketch_velocities(q, slot_s, closed=False):
    """Central-difference velocities of a sampled path."""
    if closed:
        nxt = np.roll(q[:-1], -1, axis=0)
        prv = np.roll(q[:-1], 1, axis=0)
        v = (nxt - prv) / (2 * slot_s)
        return np.vstack([v, v[:1]])
    return np.gradient(q, slot_s, axis=0)
