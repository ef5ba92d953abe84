"""Evaluation quantities computed from simulation results.

Cost savings against the uncontrolled baseline, energy balances, equivalent
mileage of V2G discharging, and per-kWh / per-mile benefit rates.  Reports
carry both the grid-cost-only headline and the penalty-inclusive objective,
since the operator's bill excludes the cycling penalty the controller
optimizes against.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InputError
from .fleet_sim import SimResult, compliance


@dataclass
class ScenarioComparison:
    scenario: str
    cost: float                     # grid cost, $
    cost_with_penalty: float        # grid cost + cycling penalty, $
    savings_pct: float | None       # vs the UC baseline, grid-cost basis
    compliance: float | None
    charged_mwh: float
    discharged_mwh: float
    runtime_s: float

    CSV_FIELDS = ("scenario", "cost", "savings_pct", "compliance",
                  "charged_mwh", "discharged_mwh", "runtime_s")


def cost_savings(scenario: SimResult, baseline: SimResult,
                 include_penalty: bool = False) -> float:
    """Cost reduction of `scenario` relative to `baseline`, percent.

    A nonpositive baseline cost makes a percentage meaningless; the absolute
    dollar difference is returned instead and callers should inspect
    baseline cost before formatting.
    """
    if include_penalty:
        base, cost = baseline.total_cost, scenario.total_cost
    else:
        base, cost = baseline.grid_cost, scenario.grid_cost
    if base <= 0:
        return base - cost   # absolute difference fallback
    return (base - cost) / base * 100.0


def energy_balance(result: SimResult) -> tuple[float, float]:
    """Grid-side totals (charged MWh, discharged MWh)."""
    return result.charged_kwh / 1000.0, result.discharged_kwh / 1000.0


def equivalent_mileage(discharged_kwh: float, session_fraction: float,
                       capacity_kwh: float, epa_range_mi: float) -> float:
    """Miles of EPA range equivalent to one EV's share of station discharge."""
    if capacity_kwh <= 0:
        raise InputError("capacity must be positive")
    if not 0.0 <= session_fraction <= 1.0:
        raise InputError("session_fraction must lie in [0, 1]")
    if discharged_kwh < 0 or epa_range_mi < 0:
        raise InputError("energy and range must be nonnegative")
    return discharged_kwh * session_fraction / capacity_kwh * epa_range_mi


def benefit_rates(savings_usd: float, discharged_kwh: float,
                  miles: float) -> tuple[float | None, float | None]:
    """($/kWh, $/mi) incremental benefit of V2G discharging; None on zero denominators."""
    if savings_usd == 0:
        return 0.0, 0.0
    per_kwh = savings_usd / discharged_kwh if discharged_kwh > 0 else None
    per_mi = savings_usd / miles if miles > 0 else None
    return per_kwh, per_mi


def audit_ledger_cost(result: SimResult, env) -> tuple[float, float]:
    """Recompute (grid cost, cycling cost) from the audit log for closure checks.

    The cycling penalty is rebuilt from each session's trajectory because it
    is priced at the pre-step SoC.
    """
    from .battery_model import sample_curves

    if result.audit is None:
        raise InputError("result carries no audit log")
    grid = sum(row.price * (row.charge_trunc_kwh - row.discharge_trunc_kwh) / 1000.0
               for row in result.audit)
    cycling = 0.0
    for s in result.sessions:
        if s.rejected:
            continue
        e = s.start_soc
        for k, p_kwh in enumerate(s.discharge_kwh_steps):
            _, _, _, c = sample_curves(env, e)
            cycling += c * p_kwh / 1000.0
            e = s.soc_trajectory[k]
    return float(grid), float(cycling)


def compare(results: list[SimResult], baseline: SimResult) -> list[ScenarioComparison]:
    """One comparison row per scenario, all against the same UC baseline."""
    rows = []
    for r in [baseline] + [r for r in results if r is not baseline]:
        charged, discharged = energy_balance(r)
        pct = 0.0 if r is baseline else cost_savings(r, baseline)
        rows.append(ScenarioComparison(
            scenario=r.scenario,
            cost=r.grid_cost,
            cost_with_penalty=r.total_cost,
            savings_pct=pct if baseline.grid_cost > 0 else None,
            compliance=compliance(r),
            charged_mwh=charged,
            discharged_mwh=discharged,
            runtime_s=r.runtime_s,
        ))
    return rows


def write_comparison_csv(rows: list[ScenarioComparison], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ScenarioComparison.CSV_FIELDS)
        for r in rows:
            w.writerow([r.scenario, f"{r.cost:.2f}",
                        "" if r.savings_pct is None else f"{r.savings_pct:.2f}",
                        "" if r.compliance is None else f"{r.compliance:.4f}",
                        f"{r.charged_mwh:.4f}", f"{r.discharged_mwh:.4f}",
                        f"{r.runtime_s:.3f}"])


def write_cumulative_costs_csv(results: list[SimResult], path) -> None:
    """Plot-ready cumulative grid cost per step for each scenario."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [r.scenario for r in results])
        series = []
        for r in results:
            per_step = (r.prices * (r.step_charge_kwh - r.step_discharge_kwh) / 1000.0)
            series.append(np.cumsum(per_step))
        for t in range(len(series[0])):
            w.writerow([t] + [f"{s[t]:.4f}" for s in series])


def write_summary_json(rows: list[ScenarioComparison], path,
                       config_hash: str | None = None, seed: int | None = None) -> None:
    # wall-clock runtime is excluded so reruns of the same config and seed
    # produce byte-identical summaries
    scenarios = []
    for r in rows:
        d = asdict(r)
        d.pop("runtime_s", None)
        scenarios.append(d)
    doc = {
        "config_hash": config_hash,
        "seed": seed,
        "scenarios": scenarios,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
