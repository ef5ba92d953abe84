"""Real-time charging-station simulation.

Drives the session lifecycle step by step: arrivals trigger a per-EV backward
valuation pass, connected EVs are dispatched in least-laxity-first order
against separate facility charge/discharge energy budgets, every command is
truncated by the ground-truth battery environment before the SoC update, and
costs accrue against the realized price plus the SoC-dependent discharge
penalty.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from .battery_model import CurveResolutionPair, sample_curves, step_soc, truncate_action
from .errors import DataError
from .policy import decide
from .price_model import PriceMarkov, PriceSeries, node_index
from .valuation import DEFAULT_PENALTY, DEFAULT_SEGMENTS, backward_pass, deterministic_pass

#: scenario id -> (valuation kind, discharge allowed, linear controller model)
SCENARIOS = {
    "PF": ("perfect", True, False),
    "PF-V2G": ("perfect", True, False),
    "PF-V1G": ("perfect", False, False),
    "UC": ("uncontrolled", False, False),
    "NL-V2G": ("stochastic", True, False),
    "NL-V1G": ("stochastic", False, False),
    "L-V2G": ("stochastic", True, True),
    "L-V1G": ("stochastic", False, True),
}

_SOC_TOL = 1e-9


@dataclass
class ChargingSession:
    """One EV visit, plus the realized trajectory once simulated."""

    id: object
    arrival: int
    departure: int
    start_soc: float = 0.1
    target_soc: float | None = None
    energy_kwh: float | None = None
    # filled by simulate():
    soc_trajectory: list = field(default_factory=list)
    discharge_kwh_steps: list = field(default_factory=list)
    charge_kwh_steps: list = field(default_factory=list)
    grid_cost: float = 0.0
    cycling_cost: float = 0.0
    final_soc: float | None = None
    feasible: bool | None = None
    rejected: bool = False
    resolved_target: float | None = None

    def __post_init__(self):
        if self.departure <= self.arrival:
            raise DataError(f"session {self.id}: departure must follow arrival")

    def resolve_target(self, capacity_kwh: float, soc_max: float = 1.0) -> float:
        """Target SoC, derived from the energy request when not given directly."""
        if self.target_soc is not None:
            return self.target_soc
        if self.energy_kwh is None:
            raise DataError(f"session {self.id}: needs target_soc or energy_kwh")
        return min(self.start_soc + self.energy_kwh / capacity_kwh, soc_max)

    @property
    def current_soc(self) -> float:
        return self.soc_trajectory[-1] if self.soc_trajectory else self.start_soc

    @property
    def duration(self) -> int:
        return self.departure - self.arrival

    @property
    def charged_kwh(self) -> float:
        return float(sum(self.charge_kwh_steps))

    @property
    def discharged_kwh(self) -> float:
        return float(sum(self.discharge_kwh_steps))


@dataclass(frozen=True)
class FacilityConfig:
    n_chargers: int = 21
    charger_kw: float = 17.2
    limit_kw: float = 150.0
    step_hours: float = 1.0

    def __post_init__(self):
        if self.limit_kw <= 0:
            raise ValueError("facility power limit must be positive")

    @property
    def oversubscription(self) -> float:
        return self.n_chargers * self.charger_kw / self.limit_kw


@dataclass
class AuditRow:
    t: int
    ev_id: object
    price: float
    node: int
    discharge_kwh: float
    charge_kwh: float
    discharge_trunc_kwh: float
    charge_trunc_kwh: float
    soc: float

    FIELDS = ("t", "ev_id", "lambda", "node", "p_kwh", "b_kwh", "p_trunc", "b_trunc", "soc")

    def row(self):
        return (self.t, self.ev_id, self.price, self.node, self.discharge_kwh,
                self.charge_kwh, self.discharge_trunc_kwh, self.charge_trunc_kwh,
                self.soc)


@dataclass
class SimResult:
    scenario: str
    step_hours: float
    prices: np.ndarray
    step_charge_kwh: np.ndarray
    step_discharge_kwh: np.ndarray
    sessions: list
    rejected: int
    runtime_s: float
    audit: list | None = None

    @property
    def grid_cost(self) -> float:
        """Headline cost: electricity bought minus sold, $ (no cycling penalty)."""
        return float(sum(s.grid_cost for s in self.sessions))

    @property
    def cycling_cost(self) -> float:
        return float(sum(s.cycling_cost for s in self.sessions))

    @property
    def total_cost(self) -> float:
        """Objective value: grid cost plus the discharge cycling penalty."""
        return self.grid_cost + self.cycling_cost

    @property
    def charged_kwh(self) -> float:
        return float(self.step_charge_kwh.sum())

    @property
    def discharged_kwh(self) -> float:
        return float(self.step_discharge_kwh.sum())


def session_feasible(s: ChargingSession, env, cfg: FacilityConfig) -> bool:
    """Can max-rate charging (no facility limit) come within 5% of the target?"""
    target = s.resolve_target(env.capacity_kwh, env.soc_max)
    e = s.start_soc
    for _ in range(s.duration):
        b_rate, _, _, _ = sample_curves(env, min(max(e, env.soc_min), env.soc_max))
        b = min(b_rate, cfg.charger_kw) * cfg.step_hours
        _, b = truncate_action(env, e, 0.0, b, cfg.step_hours)
        e = step_soc(env, e, 0.0, b)
        if e >= target - 0.05:
            return True
    return e >= target - 0.05


def llf_order(connected: list, t: int) -> list:
    """Least-laxity-first: highest elapsed-session fraction first.

    Ties break toward the earlier arrival, then the lower session id.
    """
    for s in connected:
        if not s.arrival <= t < s.departure:
            raise ValueError(f"session {s.id} not active at step {t}")
    return sorted(connected,
                  key=lambda s: (-(t - s.arrival) / s.duration, s.arrival, str(s.id)))


def _uc_requests(active, env, cfg, targets):
    """Max-rate charge requests for EVs still short of their target."""
    reqs = {}
    for s in active:
        e = s.current_soc
        if e >= targets[id(s)] - _SOC_TOL:
            continue
        b_rate, _, eta, _ = sample_curves(env, e)
        need = (targets[id(s)] - e) / eta * env.capacity_kwh
        _, b = truncate_action(env, e, 0.0,
                               min(min(b_rate, cfg.charger_kw) * cfg.step_hours, need),
                               cfg.step_hours)
        if b > 0:
            reqs[id(s)] = b
    return reqs


def _fair_split(requests: dict, budget: float) -> dict:
    """Equal shares of the budget, iteratively redistributing unused headroom."""
    grants = {k: 0.0 for k in requests}
    pending = dict(requests)
    while pending and budget > _SOC_TOL:
        share = budget / len(pending)
        done = []
        for k, want in pending.items():
            g = min(want, share)
            grants[k] += g
            budget -= g
            pending[k] = want - g
            if pending[k] <= _SOC_TOL:
                done.append(k)
        if not done:   # everyone rate-limited by the equal share
            break
        for k in done:
            del pending[k]
    return grants


def simulate(cfg: FacilityConfig, prices: PriceSeries, curves: CurveResolutionPair,
             sessions: list, scenario: str = "NL-V2G",
             markov: PriceMarkov | None = None, m_segments: int = DEFAULT_SEGMENTS,
             penalty: float = DEFAULT_PENALTY, strict_llf: bool = False,
             keep_audit: bool = True) -> SimResult:
    """Run one scenario over the price series and session list.

    Sessions are copied; trajectories and cost ledgers are written to the
    copies returned inside the SimResult.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    valuation_kind, v2g, _linear = SCENARIOS[scenario]
    if valuation_kind == "stochastic" and markov is None:
        raise ValueError(f"scenario {scenario} needs a trained price model")

    t0 = time.perf_counter()
    lam = np.asarray(prices.prices, dtype=float)
    if np.any(~np.isfinite(lam)):
        bad = int(np.nonzero(~np.isfinite(lam))[0][0])
        raise DataError(f"price gap at step {bad}")
    n_steps = lam.size
    dt = cfg.step_hours
    env, ctrl = curves.env, curves.ctrl
    if not v2g:
        ctrl = ctrl.without_discharge()
    cap = env.capacity_kwh

    sessions = sorted((copy.deepcopy(s) for s in sessions), key=lambda s: s.arrival)
    for s in sessions:
        if s.departure > n_steps:
            raise DataError(f"session {s.id} departs at step {s.departure}, "
                            f"beyond the {n_steps}-step price series")
    targets = {id(s): s.resolve_target(cap, env.soc_max) for s in sessions}

    budget_kwh = cfg.limit_kw * dt
    step_b = np.zeros(n_steps)
    step_p = np.zeros(n_steps)
    audit: list | None = [] if keep_audit else None
    value_fns: dict = {}
    active: list = []
    rejected = 0
    upcoming = list(sessions)

    for t in range(n_steps):
        while upcoming and upcoming[0].arrival == t:
            s = upcoming.pop(0)
            if len(active) >= cfg.n_chargers:
                s.rejected = True
                rejected += 1
                continue
            s.resolved_target = targets[id(s)]
            s.feasible = session_feasible(s, env, cfg)
            if valuation_kind == "stochastic":
                value_fns[id(s)] = backward_pass(
                    markov, ctrl, (s.arrival, s.departure, targets[id(s)]),
                    m_segments, penalty, dt, v1g=not v2g)
            elif valuation_kind == "perfect":
                value_fns[id(s)] = deterministic_pass(
                    lam, ctrl, (s.arrival, s.departure, targets[id(s)]),
                    m_segments, penalty, dt, v1g=not v2g)
            active.append(s)

        if active:
            ordered = llf_order(active, t)
            remaining_b = budget_kwh
            remaining_p = budget_kwh
            if valuation_kind == "uncontrolled":
                grants = _fair_split(_uc_requests(ordered, env, cfg, targets), budget_kwh)
            for s in ordered:
                e = s.current_soc
                if valuation_kind == "uncontrolled":
                    p_req, b_req = 0.0, grants.get(id(s), 0.0)
                    node = -1
                else:
                    dec = decide(value_fns[id(s)], t, float(lam[t]), e, ctrl, dt)
                    cap_kwh = cfg.charger_kw * dt
                    p_req = min(dec.discharge_kwh, cap_kwh)
                    b_req = min(dec.charge_kwh, cap_kwh)
                    node = node_index_of(value_fns[id(s)], t, float(lam[t]))
                    # facility budgets, charge and discharge sides separately
                    if strict_llf:
                        if b_req > remaining_b + _SOC_TOL:
                            b_req = 0.0
                        if p_req > remaining_p + _SOC_TOL:
                            p_req = 0.0
                    else:
                        b_req = min(b_req, remaining_b)
                        p_req = min(p_req, remaining_p)
                remaining_b -= b_req
                remaining_p -= p_req
                p_act, b_act = truncate_action(env, e, p_req, b_req, dt)
                e_next = step_soc(env, e, p_act, b_act)
                e_next = min(max(e_next, env.soc_min), env.soc_max)
                s.soc_trajectory.append(e_next)
                s.discharge_kwh_steps.append(p_act)
                s.charge_kwh_steps.append(b_act)
                _, _, _, c_env = sample_curves(env, e)
                s.grid_cost += lam[t] * (b_act - p_act) / 1000.0
                s.cycling_cost += c_env * p_act / 1000.0
                step_b[t] += b_act
                step_p[t] += p_act
                if audit is not None:
                    audit.append(AuditRow(t, s.id, float(lam[t]), node,
                                          p_req, b_req, p_act, b_act, e_next))

        for s in [s for s in active if s.departure == t + 1]:
            s.final_soc = s.soc_trajectory[-1]
            active.remove(s)
            value_fns.pop(id(s), None)

    return SimResult(scenario, dt, lam, step_b, step_p, sessions, rejected,
                     time.perf_counter() - t0, audit)


def node_index_of(vf, t: int, lam: float) -> int:
    """Closest-node lookup against the nodes stored in a value function."""
    pis = vf.node_prices[t - vf.t_start]
    return int(np.abs(pis - lam).argmin())


def compliance(result: SimResult) -> float | None:
    """Share of feasible sessions ending within 5% of (or above) their target.

    None when there are no feasible sessions to judge.
    """
    feasible = [s for s in result.sessions if s.feasible and not s.rejected]
    if not feasible:
        return None
    ok = 0
    for s in feasible:
        target = s.resolved_target if s.resolved_target is not None else s.target_soc
        if s.final_soc is None or target is None:
            continue
        if s.final_soc >= target or abs(s.final_soc - target) <= 0.05:
            ok += 1
    return ok / len(feasible)
