"""Real-time control: marginal value function + realized price -> charge/discharge.

At each step the realized price is matched to the closest price node of the
session's value function; five threshold comparisons against the node's
marginal-value layer pick full-rate charging, partial charging, idling,
partial discharging or full-rate discharging.  Partial rates come from
inverting the marginal-value layer at the price-implied marginal value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .battery_model import BatteryCurves, sample_curves
from .valuation import ValueFunction

# count of inversions that hit a non-monotone layer (possible under nonlinear
# curves); the first-crossing rule is applied and the event recorded here
diagnostics = {"non_monotone_layers": 0}


def reset_diagnostics() -> None:
    diagnostics["non_monotone_layers"] = 0


@dataclass(frozen=True)
class ControlDecision:
    """Grid-side energy commands for one EV over one step, kWh, never both nonzero."""

    discharge_kwh: float
    charge_kwh: float

    def __post_init__(self):
        if self.discharge_kwh < 0 or self.charge_kwh < 0:
            raise ValueError("decision energies must be nonnegative")
        if self.discharge_kwh > 0 and self.charge_kwh > 0:
            raise ValueError("charge and discharge are mutually exclusive")


IDLE = ControlDecision(0.0, 0.0)


def inverse_marginal_value(layer: np.ndarray, centers: np.ndarray, target: float,
                           soc_min: float | None = None,
                           soc_max: float | None = None) -> float:
    """Largest SoC whose marginal value still reaches `target`.

    For a nonincreasing layer this is the (linearly interpolated) crossing
    point; target above the whole layer maps to soc_min, below it to soc_max.
    Non-monotone layers fall back to the first crossing scanned from low SoC
    and bump the diagnostics counter.
    """
    layer = np.asarray(layer, dtype=float)
    lo = centers[0] if soc_min is None else soc_min
    hi = centers[-1] if soc_max is None else soc_max
    if np.any(np.diff(layer) > 1e-12):
        diagnostics["non_monotone_layers"] += 1
    below = np.nonzero(layer < target)[0]
    if below.size == 0:
        return float(hi)
    m = int(below[0])
    if m == 0:
        return float(lo)
    frac = (layer[m - 1] - target) / (layer[m - 1] - layer[m])
    return float(centers[m - 1] + frac * (centers[m] - centers[m - 1]))


def decide(vf: ValueFunction, t: int, lam: float, e: float,
           ctrl: BatteryCurves, dt_hours: float = 1.0) -> ControlDecision:
    """Control decision for one EV at absolute step t with realized price lam."""
    d = t - vf.t_start
    if not 0 <= d < vf.n_steps:
        raise ValueError(f"step {t} outside session [{vf.t_start}, {vf.t_end})")
    pis = vf.node_prices[d]
    node = int(np.abs(pis - lam).argmin())
    layer = vf.layers[d][node]
    centers = vf.centers

    b_kw, p_kw, eta, c = sample_curves(ctrl, e)
    cap = ctrl.capacity_kwh
    # per-step ratings in SoC-fraction units, clamped by energy headroom
    bf = min(b_kw * dt_hours / cap, (vf.soc_max - e) / eta)
    pf = min(p_kw * dt_hours / cap, (e - vf.soc_min) * eta)

    def v(x):
        return float(np.interp(x, centers, layer))

    th_full_charge = v(e + bf * eta) * eta
    th_part_charge = v(e) * eta
    th_idle = max(v(e) / eta + c, 0.0)
    th_part_dis = max(v(e - pf / eta) / eta + c, 0.0)

    if lam <= th_full_charge:
        p_out, b_out = 0.0, bf
    elif lam <= th_part_charge:
        alpha = (inverse_marginal_value(layer, centers, lam / eta,
                                        vf.soc_min, vf.soc_max) - e) / eta
        p_out, b_out = 0.0, float(np.clip(alpha, 0.0, bf))
    elif lam <= th_idle:
        p_out, b_out = 0.0, 0.0
    elif lam <= th_part_dis:
        # landing SoC s satisfies v(s) = (lam - c) * eta; the grid-side energy
        # that moves e down to s is (e - s) * eta
        beta = (e - inverse_marginal_value(layer, centers, (lam - c) * eta,
                                           vf.soc_min, vf.soc_max)) * eta
        p_out, b_out = float(np.clip(beta, 0.0, pf)), 0.0
    else:
        p_out, b_out = pf, 0.0
    return ControlDecision(p_out * cap, b_out * cap)
