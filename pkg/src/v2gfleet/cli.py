"""Command-line surface: train-prices, simulate, compare, report."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import metrics
from .errors import DataError, InputError
from .fleet_sim import SCENARIOS, compliance, simulate
from .io import RunConfig, load_prices, load_sessions, split_days, write_audit_csv
from .price_model import load_markov, save_markov, train_markov

EXIT_DATA_ERROR = 2
EXIT_INPUT_ERROR = 3


def _markov_cache_path(outdir: Path, history_path: str, cfg: RunConfig) -> Path:
    h = hashlib.sha256()
    h.update(Path(history_path).read_bytes())
    h.update(f"{cfg.n_nodes}|{cfg.horizon}|{cfg.markov_mode}".encode())
    return outdir / f"markov-{h.hexdigest()[:16]}.json"


def _train(history_path: str, cfg: RunConfig, outdir: Path):
    cache = _markov_cache_path(outdir, history_path, cfg)
    if cache.exists():
        return load_markov(cache)
    series = load_prices(history_path, cfg.zone, cfg.step_hours)
    markov = train_markov(split_days(series, cfg.horizon), cfg.n_nodes,
                          cfg.horizon, cfg.markov_mode)
    save_markov(markov, cache)
    return markov


def _run_scenarios(args, scenarios):
    cfg = RunConfig.from_yaml(args.config)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    prices = load_prices(args.prices, cfg.zone, cfg.step_hours)
    sessions, stats = load_sessions(args.sessions, cfg,
                                    prices.timestamps[0] if prices.timestamps is not None else None)
    markov = None
    if any(SCENARIOS[s][0] == "stochastic" for s in scenarios):
        markov = _train(args.history or args.prices, cfg, outdir)
    results = []
    for scenario in scenarios:
        res = simulate(cfg.facility(), prices, cfg.curves(scenario), sessions,
                       scenario, markov, cfg.m_segments, cfg.penalty_per_mwh)
        results.append(res)
        write_audit_csv(res, outdir / f"audit-{scenario}.csv")
        if args.dump_valuefn:
            pass  # per-session dumps are a debugging path; see valuation.dump_valuefn
    baseline = next((r for r in results if r.scenario == "UC"), results[0])
    rows = metrics.compare(results, baseline)
    metrics.write_comparison_csv(rows, outdir / "comparison.csv")
    metrics.write_cumulative_costs_csv(results, outdir / "cumulative_costs.csv")
    metrics.write_summary_json(rows, outdir / "summary.json",
                               config_hash=cfg.digest(), seed=cfg.seed)
    print(f"loader: in={stats.rows_in} used={stats.rows_used} "
          f"filtered={stats.rows_filtered} rejected={stats.rows_rejected}")
    for r in rows:
        comp = "n/a" if r.compliance is None else f"{r.compliance:.1%}"
        sav = "n/a" if r.savings_pct is None else f"{r.savings_pct:.1f}%"
        print(f"{r.scenario:8s} cost ${r.cost:10.2f}  savings {sav:>7s}  compliance {comp}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="v2gfleet",
                                 description="V2G fleet charging simulator")
    ap.add_argument("--error-json", action="store_true",
                    help="emit machine-readable errors on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train-prices", help="fit the Markov price model")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--history", required=True, help="historical price CSV")
    p_train.add_argument("--outdir", default="out")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True)
    common.add_argument("--prices", required=True, help="realized price CSV for the run")
    common.add_argument("--sessions", required=True, help="charging sessions CSV")
    common.add_argument("--history", help="training price CSV (defaults to --prices)")
    common.add_argument("--outdir", default="out")
    common.add_argument("--dump-valuefn", action="store_true")

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run the configured scenario")
    p_cmp = sub.add_parser("compare", parents=[common],
                           help="run a scenario set plus the UC baseline")
    p_cmp.add_argument("--scenarios", default="UC,NL-V1G,NL-V2G",
                       help="comma-separated scenario ids")

    p_rep = sub.add_parser("report", help="merge summary JSONs into a comparison CSV")
    p_rep.add_argument("summaries", nargs="+")
    p_rep.add_argument("--out", default="report.csv")

    args = ap.parse_args(argv)
    try:
        if args.command == "train-prices":
            cfg = RunConfig.from_yaml(args.config)
            outdir = Path(args.outdir)
            outdir.mkdir(parents=True, exist_ok=True)
            _train(args.history, cfg, outdir)
            print(f"price model cached under {outdir}")
            return 0
        if args.command == "simulate":
            cfg = RunConfig.from_yaml(args.config)
            return _run_scenarios(args, [cfg.scenario])
        if args.command == "compare":
            scenarios = [s.strip() for s in args.scenarios.split(",") if s.strip()]
            if "UC" not in scenarios:
                scenarios.insert(0, "UC")
            return _run_scenarios(args, scenarios)
        if args.command == "report":
            import csv

            rows = []
            for path in args.summaries:
                with open(path) as fh:
                    rows.extend(json.load(fh)["scenarios"])
            with open(args.out, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)
            print(f"wrote {args.out}")
            return 0
    except FileNotFoundError as exc:
        _fail(args, "data", f"missing file: {exc.filename}")
        return EXIT_DATA_ERROR
    except DataError as exc:
        _fail(args, "data", str(exc))
        return EXIT_DATA_ERROR
    except InputError as exc:
        _fail(args, "input", str(exc))
        return EXIT_INPUT_ERROR
    return 0


def _fail(args, kind: str, message: str) -> None:
    if getattr(args, "error_json", False):
        print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    else:
        print(f"error ({kind}): {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
