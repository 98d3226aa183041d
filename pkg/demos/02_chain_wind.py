"""Point-to-point flight past one buoy under head-, tail- and no wind.

For a small data volume the tailwind helps; for a large one the UAV must
linger near the buoy and the headwind becomes the cheaper case.  The
straight-line constant-speed flight serves as the benchmark.

Run:  python demos/02_chain_wind.py   (about a minute)
"""
from windplan import sca
from windplan.fixtures import MBIT, chain

for Q in (200, 800):
    print(f"\nQ = {Q} Mbit")
    for wx, name in ((5.0, "tailwind"), (0.0, "no wind"), (-5.0, "headwind")):
        sc = chain(Q * MBIT, wx)
        V, T, E_b = sca.straight_benchmark(sc)
        plan = sca.plan_open(sc)
        print(f"  {name:8s}: planned {plan.energy_J:7.0f} J over {plan.horizon:5.1f} s "
              f"({len(plan.log) - 1} SCA iterations); benchmark {E_b:7.0f} J at {V:.1f} m/s; "
              f"saving {100 * (1 - plan.energy_J / E_b):.0f}%")
