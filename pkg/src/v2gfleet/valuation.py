"""Per-session marginal value functions via backward stochastic dynamic programming.

The marginal value of stored energy, v [$ per MWh of battery-side energy], is
propagated backwards through the charging session on a grid of SoC segments.
Each step applies an analytical five-case update that maps the next layer v to
the current marginal profit derivative q, with correction terms for the
SoC-dependence of the ratings, efficiency and discharge penalty, and then
takes the transition-probability-weighted expectation across price nodes.

The terminal layer is a step function: a large penalty below the charging
target, zero above, which makes the target a soft constraint that dominates
any realistic price.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .battery_model import BatteryCurves, curve_derivatives, sample_curves
from .price_model import PriceMarkov

DEFAULT_SEGMENTS = 1000
DEFAULT_PENALTY = 1000.0   # $/MWh for missing the charging target


@dataclass(frozen=True)
class ValueFunction:
    """Marginal value grid for one charging session.

    layers[d][i, m] is the marginal value governing decision d (absolute step
    t_start + d) given price node i at that step, at SoC segment center m.
    node_prices[d] holds the node prices the decision-time lookup matches
    realized prices against.
    """

    t_start: int
    t_end: int
    target: float
    penalty: float
    soc_min: float
    soc_max: float
    centers: np.ndarray
    node_prices: list = field(repr=False)
    layers: list = field(repr=False)

    @property
    def n_segments(self) -> int:
        return int(self.centers.size)

    @property
    def n_steps(self) -> int:
        return self.t_end - self.t_start

    def layer_for(self, t: int, node: int) -> np.ndarray:
        return self.layers[t - self.t_start][node]


def segment_centers(soc_min: float, soc_max: float, m: int) -> np.ndarray:
    """Centers of m equal SoC segments spanning [soc_min, soc_max]."""
    width = (soc_max - soc_min) / m
    return soc_min + (np.arange(m) + 0.5) * width


def terminal_value(target: float, m: int, penalty: float = DEFAULT_PENALTY,
                   soc_min: float = 0.0, soc_max: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Terminal marginal-value layer: penalty at or below the target, zero above."""
    if not 0.0 <= target <= 1.0:
        raise ValueError("target SoC must be a fraction in [0, 1]")
    centers = segment_centers(soc_min, soc_max, m)
    layer = np.where(centers <= target + 1e-12, penalty, 0.0)
    return centers, layer


class _CurveGrid:
    """Curve values, slopes and headroom-clamped per-step ratings at the SoC grid.

    Ratings are expressed in SoC-fraction-per-step units so the five-case
    update is dimensionless apart from prices and values.  When the energy
    headroom (distance to an SoC bound) binds instead of the power rating, the
    rating slope is replaced by the headroom derivative so the correction
    terms stay consistent with what actually limits the action.
    """

    def __init__(self, curves: BatteryCurves, e: np.ndarray, dt_hours: float):
        e = np.asarray(e, dtype=float)
        cap = curves.capacity_kwh
        b_kw, p_kw, eta, c = sample_curves(curves, e)
        db, dp, deta, dc = curve_derivatives(curves, e)
        b_kw, p_kw, eta, c = (np.atleast_1d(np.asarray(a, dtype=float))
                              for a in (b_kw, p_kw, eta, c))
        db, dp, deta, dc = (np.atleast_1d(np.asarray(a, dtype=float))
                            for a in (db, dp, deta, dc))
        bf = b_kw * dt_hours / cap
        pf = p_kw * dt_hours / cap
        dbf = db * dt_hours / cap
        dpf = dp * dt_hours / cap
        head_b = (curves.soc_max - e) / eta
        head_p = (e - curves.soc_min) * eta
        clip_b = bf > head_b
        clip_p = pf > head_p
        self.bf = np.where(clip_b, head_b, bf)
        self.pf = np.where(clip_p, head_p, pf)
        self.dbf = np.where(clip_b, -1.0 / eta - (curves.soc_max - e) * deta / eta ** 2, dbf)
        self.dpf = np.where(clip_p, eta + (e - curves.soc_min) * deta, dpf)
        self.e = e
        self.eta = eta
        self.c = c
        self.deta = deta
        self.dc = dc
        self.e_up = e + self.bf * self.eta          # SoC after a full-rate charge
        self.e_dn = e - self.pf / self.eta          # SoC after a full-rate discharge


def _q_cases(grid: _CurveGrid, v_layer: np.ndarray, centers: np.ndarray,
             pi: float) -> np.ndarray:
    """Five-case analytical update of the marginal profit derivative q."""
    v_up = np.interp(grid.e_up, centers, v_layer)
    v_here = np.interp(grid.e, centers, v_layer)
    v_dn = np.interp(grid.e_dn, centers, v_layer)
    eta, c = grid.eta, grid.c
    th_full_charge = v_up * eta
    th_part_charge = v_here * eta
    th_idle = np.maximum(v_here / eta + c, 0.0)
    th_part_dis = np.maximum(v_dn / eta + c, 0.0)
    q_full_charge = (1.0 + eta * grid.dbf + grid.bf * grid.deta) * v_up - pi * grid.dbf
    q_part_charge = pi * (1.0 / eta + (grid.bf / eta) * grid.deta)
    q_idle = v_here
    q_part_dis = (pi - c) * (eta + (grid.pf / eta) * grid.deta) - grid.pf * grid.dc
    q_full_dis = ((1.0 - grid.dpf / eta + grid.pf * grid.deta / eta ** 2) * v_dn
                  + (pi - c) * grid.dpf - grid.pf * grid.dc)
    return np.select(
        [pi <= th_full_charge, pi <= th_part_charge, pi <= th_idle, pi <= th_part_dis],
        [q_full_charge, q_part_charge, q_idle, q_part_dis],
        default=q_full_dis,
    )


def q_update(v_next: np.ndarray, e, pi: float, curves: BatteryCurves,
             dt_hours: float = 1.0, centers: np.ndarray | None = None):
    """Marginal value q at SoC e given the next layer v_next and node price pi.

    v_next is sampled at `centers` (defaults to an evenly spaced grid of the
    same length over the curve span); off-grid lookups interpolate linearly
    and clamp beyond the ends.
    """
    v_next = np.asarray(v_next, dtype=float)
    if centers is None:
        centers = segment_centers(curves.soc_min, curves.soc_max, v_next.size)
    scalar = np.isscalar(e) or np.ndim(e) == 0
    grid = _CurveGrid(curves, np.atleast_1d(np.asarray(e, dtype=float)), dt_hours)
    q = _q_cases(grid, v_next, centers, float(pi))
    return float(q[0]) if scalar else q


def backward_pass(markov: PriceMarkov, curves: BatteryCurves,
                  session: tuple[int, int, float], m: int = DEFAULT_SEGMENTS,
                  penalty: float = DEFAULT_PENALTY, dt_hours: float = 1.0,
                  v1g: bool = False) -> ValueFunction:
    """Full stochastic backward pass over one session (t_start, t_end, target).

    Produces the layer stack the control policy needs: for each decision step,
    one marginal-value vector per price node of that step.
    """
    t_start, t_end, target = session
    if v1g:
        curves = curves.without_discharge()
    centers, term = terminal_value(target, m, penalty, curves.soc_min, curves.soc_max)
    n_steps = t_end - t_start
    if n_steps < 0:
        raise ValueError("session must have t_end >= t_start")
    node_prices = [markov.nodes[(t_start + d) % markov.horizon] for d in range(n_steps)]
    layers: list = [None] * max(n_steps, 1)
    if n_steps == 0:
        return ValueFunction(t_start, t_end, target, penalty, curves.soc_min,
                             curves.soc_max, centers, [], [np.tile(term, (1, 1))])
    grid = _CurveGrid(curves, centers, dt_hours)
    layers[n_steps - 1] = np.tile(term, (node_prices[n_steps - 1].size, 1))
    for d in range(n_steps - 1, 0, -1):
        pis = node_prices[d]
        q = np.stack([_q_cases(grid, layers[d][j], centers, float(pis[j]))
                      for j in range(pis.size)])
        rho = markov.transitions[(t_start + d - 1) % markov.horizon]
        layers[d - 1] = rho @ q
    return ValueFunction(t_start, t_end, target, penalty, curves.soc_min,
                         curves.soc_max, centers, node_prices, layers)


def deterministic_pass(prices, curves: BatteryCurves, session: tuple[int, int, float],
                       m: int = DEFAULT_SEGMENTS, penalty: float = DEFAULT_PENALTY,
                       dt_hours: float = 1.0, v1g: bool = False) -> ValueFunction:
    """Perfect-forecast special case: one node per step, transition weight 1.

    prices covers the session's decision steps (absolute steps t_start to
    t_end - 1); either a full-length array indexed by absolute step or a
    window of exactly t_end - t_start samples.
    """
    t_start, t_end, target = session
    n_steps = t_end - t_start
    prices = np.asarray(getattr(prices, "prices", prices), dtype=float)
    if prices.size == n_steps:
        window = prices
    else:
        window = prices[t_start:t_end]
    if window.size != n_steps:
        raise ValueError("price series does not cover the session")
    degenerate = PriceMarkov(max(n_steps, 1),
                             [np.array([p]) for p in window] or [np.array([0.0])],
                             [np.ones((1, 1))] * max(n_steps, 1))
    vf = backward_pass(degenerate, curves, (0, n_steps, target), m, penalty,
                       dt_hours, v1g=v1g)
    return ValueFunction(t_start, t_end, target, penalty, vf.soc_min, vf.soc_max,
                         vf.centers, vf.node_prices, vf.layers)


def dump_valuefn(vf: ValueFunction, path) -> None:
    """Write the layer stack as CSV rows (t, i, m) row-major for debugging."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node", "segment", "soc", "value_per_mwh"])
        for d, layer in enumerate(vf.layers):
            for i in range(layer.shape[0]):
                for mm in range(layer.shape[1]):
                    w.writerow([vf.t_start + d, i, mm, vf.centers[mm], layer[i, mm]])
