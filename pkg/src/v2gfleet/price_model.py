"""First-order Markov discretization of the real-time electricity price.

Each operating-day time step t carries a set of price nodes (per-step empirical
quantile centers) and a row-stochastic transition matrix to the nodes of step
t+1 (the last step wraps to the first step of the next day).  In dap-bias mode
training runs on RTP - DAP residuals; node values are recombined with a day's
DAP profile at query time via realize().
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InputError

_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PriceSeries:
    """A realized price trajectory, one sample per simulation step."""

    prices: np.ndarray                 # $/MWh
    step_hours: float = 1.0
    dap: np.ndarray | None = None      # aligned day-ahead prices, optional
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))
        if self.dap is not None:
            object.__setattr__(self, "dap", np.asarray(self.dap, dtype=float))
            if self.dap.shape != self.prices.shape:
                raise DataError("dap column must align with the price column")
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps)
            object.__setattr__(self, "timestamps", ts)
            if ts.shape != self.prices.shape:
                raise DataError("timestamps must align with the price column")
            steps = np.diff(ts.astype("datetime64[s]").astype(np.int64))
            if ts.size > 1:
                if np.any(steps <= 0):
                    raise DataError("timestamps must be strictly increasing")
                if np.any(steps != round(self.step_hours * 3600)):
                    raise DataError("timestamp spacing must equal the configured step length")

    def __len__(self) -> int:
        return int(self.prices.size)


@dataclass(frozen=True)
class PriceMarkov:
    """Discretized first-order Markov price process.

    nodes[t] holds the strictly ascending node prices of step t (node counts
    may differ per step after tie collapsing); transitions[t][i, j] is the
    probability of moving from node i at step t to node j at step t+1
    (t = horizon-1 wraps to step 0 of the next day).
    """

    horizon: int
    nodes: list = field(repr=False)
    transitions: list = field(repr=False)
    mode: str = "raw-price"

    def __post_init__(self):
        object.__setattr__(self, "nodes", [np.asarray(n, dtype=float) for n in self.nodes])
        object.__setattr__(self, "transitions", [np.asarray(m, dtype=float) for m in self.transitions])
        if len(self.nodes) != self.horizon or len(self.transitions) != self.horizon:
            raise ValueError("need one node vector and one transition matrix per step")
        for t in range(self.horizon):
            n_here = self.nodes[t].size
            n_next = self.nodes[(t + 1) % self.horizon].size
            if np.any(np.diff(self.nodes[t]) <= 0):
                raise ValueError(f"nodes at step {t} must be strictly ascending")
            m = self.transitions[t]
            if m.shape != (n_here, n_next):
                raise ValueError(f"transition matrix at step {t} has shape {m.shape}, "
                                 f"expected {(n_here, n_next)}")
            if np.any(m < 0) or np.any(m > 1):
                raise ValueError(f"transition probabilities at step {t} outside [0, 1]")
            if np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError(f"transition rows at step {t} do not sum to 1")

    @property
    def n_nodes(self) -> int:
        return max(n.size for n in self.nodes)


def train_markov(history, n_nodes: int, horizon: int,
                 mode: str = "raw-price") -> PriceMarkov:
    """Fit node values and transition matrices from historical daily profiles.

    history is a sequence of PriceSeries, one operating day each, every day
    exactly `horizon` samples long.  Nodes are per-step empirical quantile
    centers (equal-mass bins, node = bin mean, exact ties collapsed);
    transition counts get Laplace smoothing of 1.0 before row normalization.
    """
    if mode not in ("raw-price", "dap-bias"):
        raise InputError(f"unknown training mode: {mode}")
    if n_nodes < 1:
        raise InputError("n_nodes must be >= 1")
    days = list(history)
    if not days:
        raise DataError("empty training history")
    data = []
    for d, day in enumerate(days):
        if len(day) != horizon:
            raise DataError(f"history day {d} has {len(day)} samples, expected {horizon}")
        if mode == "dap-bias":
            if day.dap is None:
                raise DataError(f"history day {d} lacks the dap column required by dap-bias mode")
            data.append(day.prices - day.dap)
        else:
            data.append(day.prices)
    x = np.stack(data)                       # (n_days, horizon)

    nodes = []
    for t in range(horizon):
        vals = np.sort(x[:, t])
        centers = np.array([chunk.mean() for chunk in np.array_split(vals, n_nodes)])
        uniq = np.unique(centers)
        if uniq.size < n_nodes:
            warnings.warn(f"step {t}: {n_nodes} nodes collapse to {uniq.size} distinct values")
        nodes.append(uniq)

    assign = np.empty_like(x, dtype=int)
    for t in range(horizon):
        assign[:, t] = np.abs(x[:, t][:, None] - nodes[t][None, :]).argmin(axis=1)

    transitions = []
    for t in range(horizon):
        n_here = nodes[t].size
        n_next = nodes[(t + 1) % horizon].size
        counts = np.ones((n_here, n_next))   # Laplace smoothing
        if t + 1 < horizon:
            src, dst = assign[:, t], assign[:, t + 1]
        else:
            src, dst = assign[:-1, t], assign[1:, 0]   # day boundary
        np.add.at(counts, (src, dst), 1.0)
        transitions.append(counts / counts.sum(axis=1, keepdims=True))

    return PriceMarkov(horizon, nodes, transitions, mode=mode)


def node_index(markov: PriceMarkov, t: int, lam: float) -> int:
    """Index of the node at step t closest to price lam (ties -> lower node)."""
    if not np.isfinite(lam):
        raise InputError(f"non-finite price: {lam}")
    return int(np.abs(markov.nodes[t % markov.horizon] - lam).argmin())


def realize(markov: PriceMarkov, dap: np.ndarray) -> PriceMarkov:
    """Recombine a dap-bias model with one day's DAP profile into price space."""
    if markov.mode != "dap-bias":
        raise InputError("realize() applies to dap-bias models only")
    dap = np.asarray(dap, dtype=float)
    if dap.size != markov.horizon:
        raise DataError(f"DAP profile has {dap.size} samples, expected {markov.horizon}")
    nodes = [markov.nodes[t] + dap[t] for t in range(markov.horizon)]
    return PriceMarkov(markov.horizon, nodes, markov.transitions, mode="raw-price")


def sample_path(markov: PriceMarkov, seed: int, t0: int = 0, length: int | None = None,
                start_node: int | None = None, wrap: bool = True) -> PriceSeries:
    """Draw one realization of the chain; deterministic under a fixed seed."""
    length = markov.horizon - t0 if length is None else length
    if not wrap and t0 + length > markov.horizon:
        raise InputError("path would run past the horizon with wrap disabled")
    rng = np.random.default_rng(seed)
    node = (int(rng.integers(markov.nodes[t0 % markov.horizon].size))
            if start_node is None else start_node)
    out = np.empty(length)
    for k in range(length):
        t = (t0 + k) % markov.horizon
        out[k] = markov.nodes[t][node]
        if k + 1 < length:
            node = int(rng.choice(markov.transitions[t].shape[1],
                                  p=markov.transitions[t][node]))
    return PriceSeries(out)


def save_markov(markov: PriceMarkov, path) -> None:
    doc = {
        "format_version": _FORMAT_VERSION,
        "horizon": markov.horizon,
        "mode": markov.mode,
        "nodes": [n.tolist() for n in markov.nodes],
        "transitions": [m.tolist() for m in markov.transitions],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_markov(path) -> PriceMarkov:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != _FORMAT_VERSION:
        raise DataError(f"unsupported price model file version: {doc.get('format_version')}")
    return PriceMarkov(doc["horizon"], doc["nodes"], doc["transitions"], mode=doc["mode"])
