"""V2G fleet charging control.

Analytical nonlinear stochastic dynamic programming for per-EV price
arbitrage, aggregated across a charging station with least-laxity-first
dispatch under a facility power limit.
"""

from .battery_model import (BatteryCurves, CurveResolutionPair, constant_curves,
                            curve_derivatives, default_curves, sample_curves,
                            step_soc, truncate_action)
from .errors import DataError, InfeasibleActionError, InputError
from .fleet_sim import (SCENARIOS, ChargingSession, FacilityConfig, SimResult,
                        compliance, llf_order, session_feasible, simulate)
from .metrics import (benefit_rates, compare, cost_savings, energy_balance,
                      equivalent_mileage)
from .policy import ControlDecision, decide, inverse_marginal_value
from .price_model import (PriceMarkov, PriceSeries, node_index, realize,
                          sample_path, train_markov)
from .valuation import (ValueFunction, backward_pass, deterministic_pass,
                        q_update, terminal_value)

__version__ = "0.1.0"
