"""Reference scenarios used by the demos, the CLI and the test-suite."""
from __future__ import annotations

import numpy as np

from .scenario import (Buoy, ChannelParams, EnergyParams, Endpoints, FlightLimits, Scenario,
                       Slotting, Tolerances, db_to_linear)
from .wind import WindModel

MBIT = 1e6


def default_scenario(buoys, targets, endpoints=None, wind=(0.0, 0.0), sigma_f=0.0,
                     slot_s=1.0, n_slots=60) -> Scenario:
    targets = np.broadcast_to(np.asarray(targets, float), (len(buoys),))
    return Scenario(
        buoys=tuple(Buoy(i + 1, (float(b[0]), float(b[1])), float(t))
                    for i, (b, t) in enumerate(zip(buoys, targets))),
        channel=ChannelParams(1e6, db_to_linear(70.0), 100.0),
        energy=EnergyParams(9.26e-4, 2250.0, 9.8, 10.0),
        limits=FlightLimits(50.0, 3.0, 5.0),
        slotting=Slotting(slot_s, n_slots),
        endpoints=endpoints,
        wind=WindModel(tuple(map(float, wind)), float(sigma_f), 0.5),
        tolerances=Tolerances(),
        saa_samples=100,
    )


def chain(Q_bits=200 * MBIT, wind_x=0.0, n_slots=60) -> Scenario:
    """Single buoy at the origin between q0=(-600,0) and qF=(600,0); wind along +x
    (positive = tailwind).  Endpoint airspeeds are free but equal."""
    return default_scenario([(0.0, 0.0)], Q_bits, Endpoints((-600.0, 0.0), (600.0, 0.0)),
                            wind=(wind_x, 0.0), n_slots=n_slots)


def single_buoy_lap(Q0_bits=400 * MBIT, wind=(0.0, 0.0), sigma_f=0.0, n_slots=60) -> Scenario:
    """Closed lap around one buoy at the origin."""
    return default_scenario([(0.0, 0.0)], Q0_bits, None, wind=wind, sigma_f=sigma_f,
                            n_slots=n_slots)


MULTI_BUOYS = ((200.0, 150.0), (600.0, -150.0), (1000.0, 150.0))


def multi_buoy(Q_bits=215 * MBIT, wind_x=0.0, sigma_f=0.0, horizon=90.0, n_slots=89) -> Scenario:
    """Three buoys between q0=(0,0) and qF=(1200,0), fixed mission time."""
    return default_scenario(MULTI_BUOYS, Q_bits, Endpoints((0.0, 0.0), (1200.0, 0.0)),
                            wind=(wind_x, 0.0), sigma_f=sigma_f,
                            slot_s=horizon / (n_slots + 1), n_slots=n_slots)
