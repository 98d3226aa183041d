"""Stationary wind process: a first-order Gauss-Markov recursion per axis.

Each axis follows

    w[n+1] = mean + rho_c * (w[n] - mean) + sigma_f * sqrt(1 - rho_c**2) * e[n]

with independent standard normal ``e``.  The ``sqrt(1 - rho_c**2)`` factor
makes ``sigma_f**2`` the exact stationary variance, and sample 0 is drawn
from the stationary law so every slot has the same marginal distribution.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter


@dataclass(frozen=True)
class WindModel:
    mean: tuple[float, float] = (0.0, 0.0)
    sigma_f: float = 0.0
    rho_c: float = 0.5

    def __post_init__(self):
        if not self.sigma_f >= 0:
            raise ValueError("sigma_f must be >= 0")
        if not 0 <= self.rho_c < 1:
            raise ValueError("rho_c must lie in [0, 1)")

    @property
    def mean_vec(self) -> np.ndarray:
        return np.asarray(self.mean, dtype=float)


@dataclass(frozen=True)
class WindPath:
    samples: np.ndarray  # (length, 2)
    seed: int | None = None

    def __len__(self):
        return len(self.samples)


def step(model: WindModel, current, noise) -> np.ndarray:
    m = model.mean_vec
    return (m + model.rho_c * (np.asarray(current, dtype=float) - m)
            + model.sigma_f * np.sqrt(1.0 - model.rho_c ** 2) * np.asarray(noise, dtype=float))


def sample_path(model: WindModel, length: int, seed: int) -> WindPath:
    """Deterministic realization of ``length`` slots for the given seed."""
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal((length, 2))
    m = model.mean_vec
    if model.sigma_f == 0:
        return WindPath(np.tile(m, (length, 1)), seed)
    rho = model.rho_c
    # stationary start, then the recursion as an IIR filter along axis 0
    drive = model.sigma_f * np.sqrt(1.0 - rho ** 2) * e
    drive[0] = model.sigma_f * e[0]
    dev = lfilter([1.0], [1.0, -rho], drive, axis=0)
    return WindPath(m + dev, seed)


def saa_samples(model: WindModel, length: int, count: int = 100, seed: int = 0) -> list[WindPath]:
    """``count`` independent paths seeded ``seed + i``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [sample_path(model, length, seed + i) for i in range(count)]


def constant_path(model: WindModel, length: int) -> WindPath:
    return WindPath(np.tile(model.mean_vec, (length, 1)), None)


def save_wind_csv(path: WindPath, fname: str | Path) -> None:
    with open(fname, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slot", "wx", "wy"])
        for n, (wx, wy) in enumerate(path.samples):
            w.writerow([n, repr(float(wx)), repr(float(wy))])


def load_wind_csv(fname: str | Path) -> WindPath:
    rows = np.loadtxt(fname, delimiter=",", skiprows=1, ndmin=2)
    return WindPath(rows[:, 1:3].copy(), None)
