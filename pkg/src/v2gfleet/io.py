"""Data ingestion and run configuration.

Price CSV: header ``timestamp,zone,rtp,dap`` (ISO-8601 timestamps, $/MWh, dap
optional).  Sessions CSV: ``id,arrival,departure,start_soc,target_soc[,energy_kwh]``
with arrival/departure either as integer step indices or ISO timestamps.
Run configuration lives in a YAML file mirroring RunConfig field names.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .battery_model import (CurveResolutionPair, constant_curves, default_curves,
                            load_curves_csv)
from .errors import DataError
from .fleet_sim import SCENARIOS, ChargingSession, FacilityConfig
from .price_model import PriceSeries

DEFAULT_ZONES = ("NYC", "NORTH", "WEST", "LONGIL")
MIN_ENERGY_KWH = 5.0   # sessions requesting no more than this are dropped


@dataclass
class LoaderStats:
    rows_in: int = 0
    rows_used: int = 0
    rows_filtered: int = 0
    rows_rejected: int = 0

    def check(self):
        assert self.rows_in == self.rows_used + self.rows_filtered + self.rows_rejected
        return self


@dataclass
class RunConfig:
    """Everything one simulation run depends on; hashed into every report."""

    step_hours: float = 1.0
    horizon: int = 24
    zone: str = "NYC"
    scenario: str = "NL-V2G"
    capacity_kwh: float = 100.0
    env_curves_path: str | None = None    # None -> built-in default curve family
    ctrl_curves_path: str | None = None
    ctrl_samples: int = 10
    n_chargers: int = 21
    charger_kw: float = 17.2
    limit_kw: float = 150.0
    penalty_per_mwh: float = 1000.0
    n_nodes: int = 12
    m_segments: int = 1000
    seed: int = 0
    markov_mode: str = "raw-price"
    session_time_format: str = "steps"    # or "iso"
    default_start_soc: float = 0.1
    # linear-model constants for the L-* scenarios
    linear_efficiency: float = 0.95
    linear_penalty_per_mwh: float = 15.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise DataError(f"unknown scenario {self.scenario!r}")

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def facility(self) -> FacilityConfig:
        return FacilityConfig(self.n_chargers, self.charger_kw, self.limit_kw,
                              self.step_hours)

    def curves(self, scenario: str | None = None) -> CurveResolutionPair:
        """Environment + controller curve pair for a scenario.

        The environment is always the high-resolution nonlinear truth; the
        controller sees either the coarse nonlinear curves or, for L-*
        scenarios, the constant linear model.
        """
        scenario = scenario or self.scenario
        if self.env_curves_path:
            env = load_curves_csv(self.env_curves_path, self.capacity_kwh)
        else:
            env = default_curves(self.capacity_kwh, self.charger_kw)
        _, _, linear = SCENARIOS[scenario]
        if linear:
            ctrl = constant_curves(self.capacity_kwh, self.charger_kw,
                                   self.linear_efficiency, self.linear_penalty_per_mwh,
                                   env.soc_min, env.soc_max)
        elif self.ctrl_curves_path:
            ctrl = load_curves_csv(self.ctrl_curves_path, self.capacity_kwh)
        else:
            ctrl = default_curves(self.capacity_kwh, self.charger_kw,
                                  n_samples=self.ctrl_samples)
        return CurveResolutionPair(env, ctrl)


def load_prices(path, zone: str, step_hours: float = 1.0) -> PriceSeries:
    """Zone-filtered, gap-checked price series resampled to the run step length."""
    df = pd.read_csv(path)
    needed = {"timestamp", "zone", "rtp"}
    if not needed.issubset(df.columns):
        raise DataError(f"price file must carry columns {sorted(needed)}")
    zones = sorted(df["zone"].unique())
    df = df[df["zone"] == zone]
    if df.empty:
        raise DataError(f"zone {zone!r} not in price file; available: {zones}")
    df = df.assign(timestamp=pd.to_datetime(df["timestamp"])).sort_values("timestamp")
    src_step = df["timestamp"].diff().dropna().min()
    if pd.isna(src_step) or src_step <= pd.Timedelta(0):
        raise DataError("need at least two strictly increasing timestamps")
    # aggregate sub-step source data by mean onto the run resolution
    df = df.set_index("timestamp")
    agg = {"rtp": "mean"}
    if "dap" in df.columns:
        agg["dap"] = "mean"
    res = df.resample(f"{int(round(step_hours * 3600))}s").agg(agg)
    gaps = res.index[res["rtp"].isna()]
    if len(gaps):
        shown = ", ".join(str(g) for g in gaps[:5])
        raise DataError(f"{len(gaps)} missing price step(s), first: {shown}")
    return PriceSeries(
        prices=res["rtp"].to_numpy(),
        step_hours=step_hours,
        dap=res["dap"].to_numpy() if "dap" in res.columns else None,
        timestamps=res.index.to_numpy(),
    )


def split_days(series: PriceSeries, horizon: int) -> list[PriceSeries]:
    """Chop a long series into whole operating days for Markov training."""
    n_days = len(series) // horizon
    if n_days == 0:
        raise DataError(f"series shorter than one {horizon}-step day")
    out = []
    for d in range(n_days):
        sl = slice(d * horizon, (d + 1) * horizon)
        out.append(PriceSeries(series.prices[sl], series.step_hours,
                               None if series.dap is None else series.dap[sl]))
    return out


def load_sessions(path, cfg: RunConfig,
                  sim_start=None) -> tuple[list[ChargingSession], LoaderStats]:
    """Read and filter the sessions CSV.

    Rows with an energy request at or below MIN_ENERGY_KWH are filtered;
    malformed rows (departure <= arrival, unparseable fields) are rejected and
    counted.  Start SoC defaults to cfg.default_start_soc; a missing target is
    derived from the energy request at simulation time.
    """
    df = pd.read_csv(path)
    stats = LoaderStats(rows_in=len(df))
    sessions = []
    for _, row in df.iterrows():
        try:
            if cfg.session_time_format == "iso":
                if sim_start is None:
                    raise DataError("ISO session times need the price series start")
                step = lambda v: int((pd.Timestamp(v) - pd.Timestamp(sim_start))
                                     / pd.Timedelta(hours=cfg.step_hours))
                arrival, departure = step(row["arrival"]), step(row["departure"])
            else:
                arrival, departure = int(row["arrival"]), int(row["departure"])
            energy = float(row["energy_kwh"]) if "energy_kwh" in row and pd.notna(row.get("energy_kwh")) else None
            if energy is not None and energy <= MIN_ENERGY_KWH:
                stats.rows_filtered += 1
                continue
            start = (float(row["start_soc"]) if pd.notna(row.get("start_soc"))
                     else cfg.default_start_soc)
            target = (float(row["target_soc"])
                      if "target_soc" in row and pd.notna(row.get("target_soc")) else None)
            sessions.append(ChargingSession(row["id"], arrival, departure, start,
                                            target, energy))
            stats.rows_used += 1
        except (DataError, ValueError, KeyError, TypeError):
            stats.rows_rejected += 1
    return sessions, stats.check()


def write_audit_csv(result, path) -> None:
    import csv

    from .fleet_sim import AuditRow

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AuditRow.FIELDS)
        for row in result.audit or []:
            w.writerow(row.row())
