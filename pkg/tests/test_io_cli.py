import json

import numpy as np
import pandas as pd
import pytest

from v2gfleet.cli import EXIT_DATA_ERROR, main
from v2gfleet.errors import DataError
from v2gfleet.io import (MIN_ENERGY_KWH, RunConfig, load_prices,
                         load_sessions, split_days)


def write_prices(path, n_days=3, zones=("NYC", "WEST"), step_minutes=60,
                 seed=0, start="2019-03-01"):
    rng = np.random.default_rng(seed)
    stamps = pd.date_range(start, periods=n_days * 24 * 60 // step_minutes,
                           freq=f"{step_minutes}min")
    rows = []
    for zone in zones:
        base = rng.uniform(20, 60, len(stamps))
        for ts, rtp in zip(stamps, base):
            rows.append({"timestamp": ts.isoformat(), "zone": zone,
                         "rtp": round(float(rtp), 2),
                         "dap": round(float(rtp) + 1.0, 2)})
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def write_sessions(path, rows):
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def write_config(path, **overrides):
    import yaml

    doc = {"zone": "NYC", "n_nodes": 3, "m_segments": 100, "ctrl_samples": 10}
    doc.update(overrides)
    path.write_text(yaml.safe_dump(doc))
    return path


class TestLoadPrices:
    def test_zone_filter_and_length(self, tmp_path):
        path = write_prices(tmp_path / "p.csv", n_days=2)
        series = load_prices(path, "NYC")
        assert len(series) == 48
        assert series.dap is not None

    def test_subhourly_data_averaged_to_step(self, tmp_path):
        path = tmp_path / "p.csv"
        stamps = pd.date_range("2019-01-01", periods=12, freq="5min")
        pd.DataFrame({"timestamp": stamps, "zone": "NYC",
                      "rtp": np.arange(12.0)}).to_csv(path, index=False)
        series = load_prices(path, "NYC", step_hours=1.0)
        assert len(series) == 1
        assert series.prices[0] == pytest.approx(np.arange(12.0).mean())

    def test_unknown_zone_lists_available(self, tmp_path):
        path = write_prices(tmp_path / "p.csv")
        with pytest.raises(DataError, match="NYC"):
            load_prices(path, "GENESE")

    def test_gap_detection(self, tmp_path):
        path = tmp_path / "p.csv"
        stamps = list(pd.date_range("2019-01-01", periods=6, freq="1h"))
        del stamps[3]
        pd.DataFrame({"timestamp": stamps, "zone": "NYC",
                      "rtp": 30.0}).to_csv(path, index=False)
        with pytest.raises(DataError, match="missing price step"):
            load_prices(path, "NYC")

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "p.csv"
        pd.DataFrame({"when": ["2019-01-01"], "price": [1.0]}).to_csv(path,
                                                                      index=False)
        with pytest.raises(DataError, match="columns"):
            load_prices(path, "NYC")

    def test_split_days(self, tmp_path):
        path = write_prices(tmp_path / "p.csv", n_days=3)
        days = split_days(load_prices(path, "NYC"), 24)
        assert len(days) == 3 and all(len(d) == 24 for d in days)
        with pytest.raises(DataError):
            split_days(days[0], 48)


class TestLoadSessions:
    def test_filters_small_and_rejects_malformed(self, tmp_path):
        cfg = RunConfig()
        path = write_sessions(tmp_path / "s.csv", [
            {"id": "a", "arrival": 0, "departure": 8, "start_soc": 0.2,
             "target_soc": 0.8, "energy_kwh": 60.0},
            {"id": "b", "arrival": 2, "departure": 6, "start_soc": 0.5,
             "target_soc": "", "energy_kwh": MIN_ENERGY_KWH},   # too small
            {"id": "c", "arrival": 7, "departure": 3, "start_soc": 0.1,
             "target_soc": 0.9, "energy_kwh": 40.0},            # backwards
        ])
        sessions, stats = load_sessions(path, cfg)
        assert [s.id for s in sessions] == ["a"]
        assert (stats.rows_in, stats.rows_used, stats.rows_filtered,
                stats.rows_rejected) == (3, 1, 1, 1)

    def test_default_start_soc_applied(self, tmp_path):
        cfg = RunConfig(default_start_soc=0.25)
        path = write_sessions(tmp_path / "s.csv", [
            {"id": "a", "arrival": 0, "departure": 4, "start_soc": "",
             "target_soc": 0.7, "energy_kwh": 50.0}])
        sessions, _ = load_sessions(path, cfg)
        assert sessions[0].start_soc == 0.25

    def test_iso_timestamps_mapped_to_steps(self, tmp_path):
        cfg = RunConfig(session_time_format="iso")
        path = write_sessions(tmp_path / "s.csv", [
            {"id": "a", "arrival": "2019-03-01T02:00", "departure":
             "2019-03-01T07:00", "start_soc": 0.2, "target_soc": 0.8,
             "energy_kwh": 60.0}])
        sessions, _ = load_sessions(path, cfg, sim_start="2019-03-01T00:00")
        assert (sessions[0].arrival, sessions[0].departure) == (2, 7)

    def test_iso_without_sim_start_rejected_row(self, tmp_path):
        cfg = RunConfig(session_time_format="iso")
        path = write_sessions(tmp_path / "s.csv", [
            {"id": "a", "arrival": "2019-03-01T02:00", "departure":
             "2019-03-01T07:00", "start_soc": 0.2, "target_soc": 0.8,
             "energy_kwh": 60.0}])
        sessions, stats = load_sessions(path, cfg, sim_start=None)
        assert sessions == [] and stats.rows_rejected == 1


class TestRunConfig:
    def test_yaml_round_trip_and_unknown_key(self, tmp_path):
        path = write_config(tmp_path / "c.yaml", limit_kw=120.0)
        cfg = RunConfig.from_yaml(path)
        assert cfg.limit_kw == 120.0 and cfg.zone == "NYC"
        bad = tmp_path / "bad.yaml"
        bad.write_text("limit_kv: 120\n")
        with pytest.raises(DataError, match="unknown config"):
            RunConfig.from_yaml(bad)

    def test_digest_stable_and_sensitive(self):
        a, b = RunConfig(), RunConfig()
        assert a.digest() == b.digest()
        assert RunConfig(seed=1).digest() != a.digest()

    def test_unknown_scenario_rejected(self):
        with pytest.raises(DataError):
            RunConfig(scenario="V3G")

    def test_linear_scenario_gets_constant_controller(self):
        cfg = RunConfig()
        pair = cfg.curves("L-V2G")
        assert np.ptp(pair.ctrl.efficiency) == 0.0
        assert np.all(pair.ctrl.efficiency == cfg.linear_efficiency)
        # the environment stays nonlinear regardless
        assert np.ptp(pair.env.efficiency) > 0.0
        nl = cfg.curves("NL-V2G")
        assert np.ptp(nl.ctrl.efficiency) > 0.0

    def test_facility_mirrors_fields(self):
        fac = RunConfig(n_chargers=5, charger_kw=10.0, limit_kw=30.0).facility()
        assert (fac.n_chargers, fac.charger_kw, fac.limit_kw) == (5, 10.0, 30.0)


@pytest.fixture
def workspace(tmp_path):
    prices = write_prices(tmp_path / "prices.csv", n_days=3)
    sessions = write_sessions(tmp_path / "sessions.csv", [
        {"id": "a", "arrival": 2, "departure": 10, "start_soc": 0.1,
         "target_soc": 0.8, "energy_kwh": 70.0},
        {"id": "b", "arrival": 26, "departure": 33, "start_soc": 0.2,
         "target_soc": 0.7, "energy_kwh": 50.0},
        {"id": "c", "arrival": 50, "departure": 60, "start_soc": 0.15,
         "target_soc": 0.9, "energy_kwh": 75.0},
    ])
    config = write_config(tmp_path / "config.yaml")
    out = tmp_path / "out"
    return prices, sessions, config, out


class TestCli:
    def test_compare_end_to_end(self, workspace, capsys):
        prices, sessions, config, out = workspace
        rc = main(["compare", "--config", str(config), "--prices", str(prices),
                   "--sessions", str(sessions), "--outdir", str(out),
                   "--scenarios", "UC,NL-V1G,NL-V2G"])
        assert rc == 0
        for name in ["comparison.csv", "cumulative_costs.csv", "summary.json",
                     "audit-UC.csv", "audit-NL-V2G.csv"]:
            assert (out / name).exists(), name
        doc = json.loads((out / "summary.json").read_text())
        assert [r["scenario"] for r in doc["scenarios"]] == ["UC", "NL-V1G",
                                                             "NL-V2G"]
        assert doc["config_hash"]
        stdout = capsys.readouterr().out
        assert "NL-V2G" in stdout and "savings" in stdout

    def test_rerun_summary_byte_identical(self, workspace):
        prices, sessions, config, out = workspace
        args = ["simulate", "--config", str(config), "--prices", str(prices),
                "--sessions", str(sessions), "--outdir", str(out)]
        assert main(args) == 0
        first = (out / "summary.json").read_bytes()
        assert main(args) == 0
        assert (out / "summary.json").read_bytes() == first

    def test_train_prices_caches_model(self, workspace, capsys):
        prices, _, config, out = workspace
        args = ["train-prices", "--config", str(config), "--history",
                str(prices), "--outdir", str(out)]
        assert main(args) == 0
        cached = list(out.glob("markov-*.json"))
        assert len(cached) == 1
        assert main(args) == 0   # second run reuses the cache
        assert list(out.glob("markov-*.json")) == cached

    def test_missing_file_exit_code(self, workspace, capsys):
        _, sessions, config, out = workspace
        rc = main(["simulate", "--config", str(config), "--prices",
                   "nope.csv", "--sessions", str(sessions),
                   "--outdir", str(out)])
        assert rc == EXIT_DATA_ERROR
        assert "error" in capsys.readouterr().err

    def test_error_json_flag(self, workspace, capsys):
        _, sessions, config, out = workspace
        rc = main(["--error-json", "simulate", "--config", str(config),
                   "--prices", "nope.csv", "--sessions", str(sessions),
                   "--outdir", str(out)])
        assert rc == EXIT_DATA_ERROR
        doc = json.loads(capsys.readouterr().err.strip())
        assert doc["error"] == "data"
