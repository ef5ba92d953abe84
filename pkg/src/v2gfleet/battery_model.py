"""SoC-dependent battery/charger behavior curves and the ground-truth environment.

Curves are sampled tables over the state of charge (SoC, fraction of capacity):
charge power rating B(e) [kW], discharge power rating P(e) [kW], one-way
efficiency eta(e), and discharge penalty c(e) [$/MWh].  Evaluation is
piecewise-linear between samples, which keeps the threshold algebra of the
valuation step exact on each segment.

The controller typically sees a coarse (10-sample) version of the same curves
while the environment steps the true (101-sample) version and truncates
infeasible commands.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleActionError

_CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class BatteryCurves:
    """Sampled SoC-dependent behavior curves of one EV battery + charger.

    samples are parallel arrays over strictly increasing SoC fractions that
    span [soc_min, soc_max].
    """

    capacity_kwh: float
    soc: np.ndarray
    charge_kw: np.ndarray
    discharge_kw: np.ndarray
    efficiency: np.ndarray
    penalty_per_mwh: np.ndarray

    def __post_init__(self):
        for name in ("soc", "charge_kw", "discharge_kw", "efficiency", "penalty_per_mwh"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.soc.size < 2:
            raise ValueError("curve table needs at least two SoC samples")
        if np.any(np.diff(self.soc) <= 0):
            raise ValueError("curve SoC samples must be strictly increasing")
        if np.any((self.efficiency <= 0) | (self.efficiency > 1)):
            raise ValueError("efficiency samples must lie in (0, 1]")
        if np.any(self.charge_kw < 0) or np.any(self.discharge_kw < 0) or np.any(self.penalty_per_mwh < 0):
            raise ValueError("B, P and c curve samples must be nonnegative")
        if self.capacity_kwh <= 0:
            raise ValueError("capacity must be positive")

    @property
    def soc_min(self) -> float:
        return float(self.soc[0])

    @property
    def soc_max(self) -> float:
        return float(self.soc[-1])

    def without_discharge(self) -> "BatteryCurves":
        """V1G view of the same battery: discharge rating forced to zero."""
        return replace(self, discharge_kw=np.zeros_like(self.discharge_kw))


@dataclass(frozen=True)
class CurveResolutionPair:
    """Ground-truth environment curves plus the controller's coarse view."""

    env: BatteryCurves
    ctrl: BatteryCurves

    def __post_init__(self):
        if not (np.isclose(self.env.soc_min, self.ctrl.soc_min)
                and np.isclose(self.env.soc_max, self.ctrl.soc_max)):
            raise ValueError("env and ctrl curves must cover the same SoC span")


def _clamped(curves: BatteryCurves, e):
    e = np.asarray(e, dtype=float)
    if np.any(e < curves.soc_min - _CLAMP_TOL) or np.any(e > curves.soc_max + _CLAMP_TOL):
        warnings.warn("SoC query outside curve span; clamping", stacklevel=3)
    return np.clip(e, curves.soc_min, curves.soc_max)


def sample_curves(curves: BatteryCurves, e):
    """Interpolate (B [kW], P [kW], eta, c [$/MWh]) at SoC fraction(s) e."""
    scalar = np.isscalar(e) or np.ndim(e) == 0
    e = _clamped(curves, e)
    b = np.interp(e, curves.soc, curves.charge_kw)
    p = np.interp(e, curves.soc, curves.discharge_kw)
    eta = np.interp(e, curves.soc, curves.efficiency)
    c = np.interp(e, curves.soc, curves.penalty_per_mwh)
    if scalar:
        return float(b), float(p), float(eta), float(c)
    return b, p, eta, c


def curve_derivatives(curves: BatteryCurves, e):
    """Slopes (dB/de, dP/de, deta/de, dc/de) of the active linear segment.

    At interior knots the mean of the adjacent slopes is used; at the span
    endpoints the one-sided slope.
    """
    scalar = np.isscalar(e) or np.ndim(e) == 0
    e = np.atleast_1d(_clamped(curves, e))
    knots = curves.soc
    out = []
    for ys in (curves.charge_kw, curves.discharge_kw, curves.efficiency, curves.penalty_per_mwh):
        seg = np.diff(ys) / np.diff(knots)           # slope per segment
        node = np.empty_like(knots)
        node[0] = seg[0]
        node[-1] = seg[-1]
        node[1:-1] = 0.5 * (seg[:-1] + seg[1:])
        # interior points: slope of containing segment; knots: averaged slope
        idx = np.searchsorted(knots, e, side="right") - 1
        idx = np.clip(idx, 0, seg.size - 1)
        d = seg[idx]
        at_knot = np.isclose(e[:, None], knots[None, :], rtol=0.0, atol=1e-12)
        hit = at_knot.any(axis=1)
        if np.any(hit):
            which = at_knot.argmax(axis=1)
            d = np.where(hit, node[which], d)
        out.append(d)
    if scalar:
        return tuple(float(d[0]) for d in out)
    return tuple(out)


def step_soc(curves: BatteryCurves, e: float, p_kwh: float, b_kwh: float,
             strict: bool = False) -> float:
    """One SoC transition: e' = e - p/eta(e) + b*eta(e), energies grid-side kWh.

    Efficiency is evaluated at the starting SoC.  The result is not clamped;
    feasibility is the environment truncation path's job.  With strict=True an
    out-of-band result raises instead.
    """
    if p_kwh < 0 or b_kwh < 0:
        raise ValueError("step energies must be nonnegative")
    _, _, eta, _ = sample_curves(curves, e)
    cap = curves.capacity_kwh
    e_next = e - (p_kwh / cap) / eta + (b_kwh / cap) * eta
    if strict and not (curves.soc_min - _CLAMP_TOL <= e_next <= curves.soc_max + _CLAMP_TOL):
        raise InfeasibleActionError(
            f"SoC {e_next:.4f} outside [{curves.soc_min}, {curves.soc_max}]")
    return e_next


def truncate_action(env: BatteryCurves, e: float, p_kwh: float, b_kwh: float,
                    dt_hours: float = 1.0) -> tuple[float, float]:
    """Clip a requested (discharge, charge) energy pair to the true battery limits.

    Ratings and energy headroom are taken from the ground-truth curves at the
    current SoC.  At most one of the outputs is nonzero; when both are
    requested the larger one wins.
    """
    e = float(np.clip(e, env.soc_min, env.soc_max))
    b_rate, p_rate, eta, _ = sample_curves(env, e)
    cap = env.capacity_kwh
    p_max = min(p_rate * dt_hours, (e - env.soc_min) * eta * cap)
    b_max = min(b_rate * dt_hours, (env.soc_max - e) / eta * cap)
    p_out = float(np.clip(p_kwh, 0.0, p_max))
    b_out = float(np.clip(b_kwh, 0.0, b_max))
    if p_out > 0.0 and b_out > 0.0:
        if b_kwh >= p_kwh:
            p_out = 0.0
        else:
            b_out = 0.0
    return p_out, b_out


def default_curves(capacity_kwh: float = 100.0, nominal_kw: float = 17.2,
                   discharge_kw: float = 6.6, n_samples: int = 101,
                   soc_min: float = 0.0, soc_max: float = 1.0) -> BatteryCurves:
    """Out-of-the-box nonlinear curve family.

    Efficiency and cycling penalty are gently quadratic in SoC; the charge
    rating follows a CC-CV trapezoid (ramp 0 -> nominal over [0, 0.10], hold,
    taper to 0 over [0.80, 1.0]); the discharge rating ramps 0 -> discharge_kw
    over [0, 0.20] and holds.  The slopes are deliberately moderate so the
    rating-for-action substitution in the analytical value update stays a good
    approximation over the whole span.
    """
    e = np.linspace(soc_min, soc_max, n_samples)
    u = (e - soc_min) / (soc_max - soc_min)
    eta = 0.95 - 0.02 * (2 * u - 1) ** 2
    c = 12.0 + 2.5 * u ** 2
    b = np.where(u < 0.10, u / 0.10,
                 np.where(u <= 0.80, 1.0, (1.0 - u) / 0.20)) * nominal_kw
    p = np.where(u < 0.20, u / 0.20, 1.0) * discharge_kw
    return BatteryCurves(capacity_kwh, e, b, p, eta, c)


def constant_curves(capacity_kwh: float = 100.0, nominal_kw: float = 17.2,
                    efficiency: float = 0.95, penalty_per_mwh: float = 15.0,
                    soc_min: float = 0.0, soc_max: float = 1.0,
                    v2g: bool = True, discharge_kw: float | None = None) -> BatteryCurves:
    """Linear battery model: constant ratings, efficiency and penalty."""
    e = np.array([soc_min, soc_max])
    p = (nominal_kw if discharge_kw is None else discharge_kw) if v2g else 0.0
    return BatteryCurves(capacity_kwh, e,
                         np.full(2, nominal_kw), np.full(2, p),
                         np.full(2, efficiency), np.full(2, penalty_per_mwh))


def load_curves_csv(path, capacity_kwh: float) -> BatteryCurves:
    """Read a curve table with header soc,b_kw,p_kw,eta,c_per_mwh."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((float(row["soc"]), float(row["b_kw"]), float(row["p_kw"]),
                         float(row["eta"]), float(row["c_per_mwh"])))
    if not rows:
        raise ValueError(f"empty curve table: {path}")
    rows.sort()
    cols = list(zip(*rows))
    return BatteryCurves(capacity_kwh, *[np.array(c) for c in cols])


def save_curves_csv(curves: BatteryCurves, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["soc", "b_kw", "p_kw", "eta", "c_per_mwh"])
        for i in range(curves.soc.size):
            w.writerow([curves.soc[i], curves.charge_kw[i], curves.discharge_kw[i],
                        curves.efficiency[i], curves.penalty_per_mwh[i]])
