import numpy as np
import pytest

from v2gfleet.battery_model import step_soc
from v2gfleet.policy import (IDLE, ControlDecision, decide, diagnostics,
                             inverse_marginal_value, reset_diagnostics)
from v2gfleet.valuation import (ValueFunction, backward_pass, segment_centers,
                                terminal_value)

from conftest import random_markov
from oracles import _brute_q, layer_value_fn


def single_node_vf(layer, lam_node, target=0.5, penalty=1000.0):
    centers = segment_centers(0.0, 1.0, len(layer))
    return ValueFunction(0, 1, target, penalty, 0.0, 1.0, centers,
                         [np.array([lam_node])],
                         [np.asarray(layer, dtype=float)[None, :]])


class TestControlDecision:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ControlDecision(-1.0, 0.0)

    def test_rejects_simultaneous(self):
        with pytest.raises(ValueError):
            ControlDecision(1.0, 1.0)

    def test_idle_constant(self):
        assert IDLE.charge_kwh == 0.0 and IDLE.discharge_kwh == 0.0


class TestInverseMarginalValue:
    def test_linear_layer_exact(self):
        centers = segment_centers(0.0, 1.0, 1000)
        layer = 800.0 * (1.0 - centers)
        for target in [100.0, 400.0, 777.0]:
            e = inverse_marginal_value(layer, centers, target)
            assert e == pytest.approx(1.0 - target / 800.0, abs=1e-6)

    def test_terminal_step_crossing_recovers_target(self):
        centers, layer = terminal_value(0.5, 1000, penalty=1000.0)
        e = inverse_marginal_value(layer, centers, 500.0)
        assert e == pytest.approx(0.5, abs=1e-12)

    def test_target_above_layer_maps_to_soc_min(self):
        centers = segment_centers(0.0, 1.0, 10)
        assert inverse_marginal_value(np.full(10, 5.0), centers, 9.0,
                                      0.0, 1.0) == 0.0

    def test_target_below_layer_maps_to_soc_max(self):
        centers = segment_centers(0.0, 1.0, 10)
        assert inverse_marginal_value(np.full(10, 5.0), centers, 1.0,
                                      0.0, 1.0) == 1.0

    def test_non_monotone_takes_first_crossing_and_counts(self):
        reset_diagnostics()
        centers = segment_centers(0.0, 1.0, 5)
        layer = np.array([9.0, 1.0, 9.0, 9.0, 1.0])
        e = inverse_marginal_value(layer, centers, 5.0, 0.0, 1.0)
        assert centers[0] < e < centers[1]
        assert diagnostics["non_monotone_layers"] == 1
        reset_diagnostics()
        assert diagnostics["non_monotone_layers"] == 0


class TestDecideCases:
    def setup_method(self):
        centers = segment_centers(0.0, 1.0, 1000)
        self.layer = 800.0 * (1.0 - centers)
        self.e = 0.5

    def vf(self, lam):
        return single_node_vf(self.layer, lam)

    def test_cheap_price_full_charge(self, flat_curves):
        d = decide(self.vf(1.0), 0, 1.0, self.e, flat_curves)
        assert d.charge_kwh == pytest.approx(17.2)
        assert d.discharge_kwh == 0.0

    def test_idle_band(self, flat_curves):
        # v(0.5) = 400; idle band is (400*0.95, 400/0.95 + 15]
        d = decide(self.vf(400.0), 0, 400.0, self.e, flat_curves)
        assert d == IDLE

    def test_spike_price_full_discharge(self, flat_curves):
        d = decide(self.vf(5000.0), 0, 5000.0, self.e, flat_curves)
        assert d.discharge_kwh == pytest.approx(17.2)
        assert d.charge_kwh == 0.0

    def test_partial_charge_lands_on_inverse(self, flat_curves):
        # pick lam inside (v(e+bf*eta)*eta, v(e)*eta)
        lam = 350.0
        d = decide(self.vf(lam), 0, lam, self.e, flat_curves)
        assert 0.0 < d.charge_kwh < 17.2
        landing = step_soc(flat_curves, self.e, 0.0, d.charge_kwh)
        v_landing = float(np.interp(landing, segment_centers(0, 1, 1000),
                                    self.layer))
        assert v_landing == pytest.approx(lam / 0.95, rel=1e-3)

    def test_partial_discharge_lands_on_inverse(self, flat_curves):
        # pick lam inside the partial discharge band
        lam = 460.0
        d = decide(self.vf(lam), 0, lam, self.e, flat_curves)
        assert 0.0 < d.discharge_kwh < 17.2
        landing = step_soc(flat_curves, self.e, d.discharge_kwh, 0.0)
        v_landing = float(np.interp(landing, segment_centers(0, 1, 1000),
                                    self.layer))
        assert v_landing == pytest.approx((lam - 15.0) * 0.95, rel=1e-3)

    def test_outside_session_raises(self, flat_curves):
        with pytest.raises(ValueError):
            decide(self.vf(10.0), 5, 10.0, 0.5, flat_curves)


class TestOneStepOptimality:
    def test_decision_maximizes_one_step_profit(self, flat_curves):
        centers = segment_centers(0.0, 1.0, 1000)
        layer = 700.0 * (1.0 - centers) ** 1.5 + 20.0
        value_fn = layer_value_fn(layer, centers, flat_curves.capacity_kwh)
        cap_mwh = flat_curves.capacity_kwh / 1000.0
        rng = np.random.default_rng(6)
        for _ in range(40):
            e = rng.uniform(0.1, 0.9)
            lam = rng.uniform(5.0, 900.0)
            d = decide(single_node_vf(layer, lam), 0, lam, e, flat_curves)
            bf = d.charge_kwh / flat_curves.capacity_kwh
            pf = d.discharge_kwh / flat_curves.capacity_kwh
            profit = (-lam * bf * cap_mwh + (lam - 15.0) * pf * cap_mwh
                      + value_fn(e + bf * 0.95 - pf / 0.95))
            best = _brute_q(value_fn, e, lam, flat_curves, 1.0, 1e-4)
            assert profit >= best - 1e-2

    def test_net_energy_monotone_in_price(self, flat_curves):
        centers = segment_centers(0.0, 1.0, 500)
        layer = 900.0 * (1.0 - centers)
        prev = np.inf
        for lam in np.linspace(1.0, 1200.0, 120):
            d = decide(single_node_vf(layer, lam), 0, lam, 0.5, flat_curves)
            net = d.charge_kwh - d.discharge_kwh
            assert net <= prev + 1e-9
            prev = net


class TestClampSafety:
    def test_decisions_never_leave_soc_band(self, env_curves, ctrl_curves):
        rng = np.random.default_rng(14)
        mk = random_markov(rng, horizon=6, n_nodes=3)
        vf = backward_pass(mk, ctrl_curves, (0, 6, 0.8), m=200)
        for _ in range(300):
            t = rng.integers(0, 6)
            e = rng.uniform(0.0, 1.0)
            lam = rng.uniform(-20.0, 2000.0)
            d = decide(vf, int(t), lam, e, ctrl_curves)
            e2 = step_soc(env_curves, e, d.discharge_kwh, d.charge_kwh)
            assert -1e-9 <= e2 <= 1.0 + 1e-9
