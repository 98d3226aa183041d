"""Building blocks: propulsion power, the buoy link and the TDMA schedule.

Run:  python demos/01_energy_and_links.py
"""
import numpy as np

from windplan import comms
from windplan.energy import max_range_speed, optimal_loiter_speed, propulsion_power
from windplan.fixtures import MBIT, default_scenario

sc = default_scenario([(0.0, 0.0)], 100 * MBIT)
p, ch = sc.energy, sc.channel

# Level flight power has a single minimum: the loiter speed.
v_star = optimal_loiter_speed(p)
print(f"loiter speed {v_star:.2f} m/s, power there "
      f"{propulsion_power([v_star, 0.0], [0.0, 0.0], p):.1f} W")
print(f"max-range speed {max_range_speed(p):.2f} m/s")
for v in (10, 20, 30, 40, 50):
    level = propulsion_power([v, 0.0], [0.0, 0.0], p)
    turning = propulsion_power([v, 0.0], [0.0, 5.0], p)
    print(f"  {v:2d} m/s: level {level:6.1f} W, 5 m/s^2 turn {turning:6.1f} W")

# The link rate falls off with horizontal distance from the buoy.
print("\nlink rate vs horizontal distance")
for d in (0, 100, 200, 400, 800):
    r = comms.link_rate(np.array([d, 0.0]), np.zeros(2), ch.bandwidth_hz, ch.ref_snr,
                        ch.altitude_m)
    print(f"  {d:4d} m: {r / 1e6:6.3f} Mbit/s")

# Two buoys share each 1 s slot.  The LP finds the best max-min ratio.
q = np.column_stack([np.linspace(-300, 300, 21), np.zeros(21)])
buoys = np.array([[-150.0, 50.0], [150.0, -50.0]])
rates = comms.rate_table(q, buoys, ch)
for target in (40 * MBIT, 60 * MBIT, 90 * MBIT):
    lp = comms.feasibility_lp(rates, [target, target], 1.0)
    print(f"\ntargets {target / MBIT:.0f} Mbit each: feasible={lp.feasible}, ratio {lp.ratio:.3f}")
    if lp.feasible:
        got = comms.collected_volume(rates, lp.schedule.tau)
        print("  collected", (got / MBIT).round(1), "Mbit; air time",
              lp.schedule.tau.sum(axis=0).round(2), "s")
