"""Figure-eight lap around one buoy in a gusty 10 m/s wind.

1. plan the lap for the mean wind;
2. re-plan it against sampled winds (sample average approximation);
3. fly both plans through the same random winds with per-slot adaptation
   and compare with simply following the plan.

Run:  python demos/03_eight_lap_online.py   (a few minutes)
"""
import numpy as np

from windplan import cyclical, online, stochastic
from windplan.fixtures import MBIT, single_buoy_lap

SIGMA = 1.0
SEEDS = range(1000, 1010)

sc = single_buoy_lap(400 * MBIT, wind=(0.0, 10.0))
cp = cyclical.optimize_cyclical(sc, 400 * MBIT, 400 * MBIT, 1, "eight", finetune=False)
lap = cp.lap
print(f"mean-wind lap: {lap.energy_J:.0f} J over {lap.horizon:.1f} s, "
      f"exact eight benchmark {cp.init_energy_J:.0f} J")
print(f"lap axis {cyclical.lap_orientation(lap.trajectory, sc.wind.mean_vec):.0f} deg from the wind")

lsc = cyclical.lap_scenario(sc, 400 * MBIT, lap.trajectory.N, lap.horizon).with_wind(sigma_f=SIGMA)
t = lap.trajectory
sp = stochastic.solve_offline_sp(lsc, t.q, t.v_e, lap.tau)
print(f"sampled-wind plan objective {sp.objective_J:.0f} J; "
      f"{100 * sp.sample_stats['accel_exceed_frac']:.1f}% of sample slots exceed a_max")
mc = stochastic.monte_carlo_energy(lsc, sp, count=300)
print(f"following it blindly costs {mc.mean():.0f} +- {mc.std():.0f} J")

for name, plan in (("mean-wind", stochastic.plan_from_fixed(lap, lsc)), ("sampled-wind", sp)):
    reps = online.run_ensemble(lsc, plan, SEEDS)
    s = online.ensemble_stats(reps)
    print(f"\n{name} plan, {len(reps)} windy missions")
    print(f"  adapted online : {s['mean_J']:.0f} +- {s['std_J']:.0f} J, "
          f"{s['infeasible_steps']} relaxed steps, {s['unrecovered_steps']} unrecovered")
    print(f"  follow the plan: {s['baseline_mean_J']:.0f} J, limit breaches in "
          f"{s['baseline_violation_runs']} of {len(reps)} runs")
    short = np.mean([r.shortfall_bits.sum() for r in reps])
    print(f"  mean data shortfall {short / MBIT:.2f} Mbit")
