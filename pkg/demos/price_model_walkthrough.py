"""Train a time-of-day price Markov chain and inspect what it learned.

Builds a synthetic history with a morning and an evening peak plus occasional
evening spikes, fits the node/transition model, and samples a fresh path.

Run:  python3 demos/price_model_walkthrough.py
"""

import numpy as np

from v2gfleet import PriceSeries, sample_path, train_markov

rng = np.random.default_rng(0)

hours = np.arange(24)
shape = (35 + 18 * np.exp(-((hours - 8.0) / 2.5) ** 2)
         + 30 * np.exp(-((hours - 18.5) / 2.0) ** 2))
history = []
for _ in range(120):
    day = shape * rng.lognormal(0.0, 0.25, 24)
    if rng.random() < 0.1:
        day[rng.integers(17, 21)] *= rng.uniform(2.0, 4.0)
    history.append(PriceSeries(day))

markov = train_markov(history, n_nodes=8, horizon=24)

print("price nodes by hour ($/MWh):")
for t in [3, 8, 13, 18, 21]:
    nodes = ", ".join(f"{x:6.1f}" for x in markov.nodes[t])
    print(f"  h={t:2d}: {nodes}")

print("\ntransition matrix into hour 19 (rows: hour-18 nodes):")
for row in markov.transitions[18]:
    print("  " + " ".join(f"{p:.2f}" for p in row))

path = sample_path(markov, seed=1, t0=0, length=48)
print("\nsampled 2-day path ($/MWh):")
print("  " + " ".join(f"{x:.0f}" for x in path.prices[:24]))
print("  " + " ".join(f"{x:.0f}" for x in path.prices[24:]))

hist_mean = np.mean([d.prices for d in history], axis=0)
print("\nhistory mean every 3 hours ($/MWh):",
      " ".join(f"{x:.0f}" for x in hist_mean[::3]))
