"""Three buoys along a 1.2 km transit, with and without a 10 m/s headwind.

Run:  python demos/04_multi_buoy.py   (a few minutes)
"""
import numpy as np

from windplan import online, sca, stochastic
from windplan.fixtures import MBIT, multi_buoy

plans = {}
for wx, name in ((0.0, "no wind"), (-10.0, "headwind")):
    sc = multi_buoy(wind_x=wx)
    plans[name] = (sc, sca.plan_open(sc))
    p = plans[name][1]
    print(f"{name:8s}: {p.energy_J / 1e3:.2f} kJ over {p.horizon:.1f} s, collected "
          f"{(p.collected / MBIT).round(1)} Mbit")
calm, head = plans["no wind"][1].energy_J, plans["headwind"][1].energy_J
print(f"headwind saves {100 * (1 - head / calm):.1f}%")

sc, p = plans["headwind"]
sc1 = sc.with_slotting(p.trajectory.slot_s, sc.slotting.n_slots).with_wind(sigma_f=1.0)
sp = stochastic.solve_offline_sp(sc1, p.trajectory.q, p.trajectory.v_e, p.tau)
reps = online.run_ensemble(sc1, sp, range(1000, 1010))
tot = np.array([r.total_J for r in reps])
print(f"online missions with gusts (sigma 1 m/s): {tot.mean() / 1e3:.2f} kJ "
      f"(range {tot.min() / 1e3:.2f}-{tot.max() / 1e3:.2f} kJ)")
