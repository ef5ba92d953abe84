"""One EV, one spiky day: watch the controller buy the dip and sell the spike.

Compares uncontrolled charging, perfect-foresight V1G and perfect-foresight
V2G on a single 12-hour session, then prints the hour-by-hour decisions.

Run:  python3 demos/single_session_arbitrage.py
"""

import numpy as np

from v2gfleet import (ChargingSession, CurveResolutionPair, FacilityConfig,
                      PriceSeries, default_curves, simulate)

prices = np.array([60, 55, 28, 12, 30, 65, 90, 310, 120, 70, 50, 45.0])
env = default_curves()           # 100 kWh pack, CC-CV taper, SoC-dependent eta
pair = CurveResolutionPair(env, env)
fac = FacilityConfig(n_chargers=1, charger_kw=17.2, limit_kw=1000.0)
session = ChargingSession("ev-1", 0, 12, start_soc=0.25, target_soc=0.85)

print("hourly prices ($/MWh):", " ".join(f"{x:.0f}" for x in prices))
print(f"session: SoC {session.start_soc} -> {session.target_soc} "
      f"over {session.departure} h\n")

results = {}
for scenario in ("UC", "PF-V1G", "PF-V2G"):
    res = simulate(fac, PriceSeries(prices), pair, [session], scenario,
                   m_segments=1000)
    results[scenario] = res
    print(f"{scenario:7s} grid cost ${res.grid_cost:7.2f}   "
          f"total (with cycling penalty) ${res.total_cost:7.2f}   "
          f"final SoC {res.sessions[0].final_soc:.3f}")

print("\nPF-V2G hour-by-hour (kWh grid-side, + charge / - discharge):")
s = results["PF-V2G"].sessions[0]
for t in range(s.duration):
    net = s.charge_kwh_steps[t] - s.discharge_kwh_steps[t]
    bar = "#" * int(abs(net) / 1.5)
    print(f"  h={t:2d}  price {prices[t]:5.0f}   {net:+7.2f}  {bar}")

uc, v1g, v2g = (results[k].grid_cost for k in ("UC", "PF-V1G", "PF-V2G"))
print(f"\nV1G saves {100 * (uc - v1g) / uc:.0f}% of the uncontrolled bill, "
      f"V2G saves {100 * (uc - v2g) / uc:.0f}%")
