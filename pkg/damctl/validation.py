"""
Named cross-engine consistency scenarios for ``damctl validate``.

Each scenario returns a list of checks (name, expected, actual, tolerance, passed) that
compare the exact engine, the heavy-traffic functionals and the simulator with each other
and with the linear-cost reference sweep.
"""

import logging
import math
from collections.abc import Callable
from typing import NamedTuple

import numpy as np

from .asympt import RegimeParams, j_lower, j_upper, q_lower_approx, q_upper_approx
from .control import Regime, solve, sweep_j2, threshold_j2
from .costs import ConstantCost, LinearCost
from .dists import Deterministic, DistributionSpec, Erlang, Exponential
from .errors import ConfigError
from .exact import DamModelParams, busy_counts, objective_exact, renewal_summary, stationary
from .output import read_document, render, solution_document
from .sim import SimConfig, simulate

logger = logging.getLogger(__name__)

# Optimal C of the upper functional for j1=1, rho2=1/2, rho12=1, costs falling from 2 to 1
REFERENCE_SWEEP = {
    1.06: 0.200,
    1.07: 0.190,
    1.08: 0.182,
    1.09: 0.174,
    1.10: 0.165,
    1.11: 0.156,
    1.12: 0.149,
    1.13: 0.140,
    1.14: 0.134,
    1.15: 0.126,
    1.16: 0.120,
    1.17: 0.112,
    1.18: 0.104,
    1.19: 0.096,
    1.20: 0.090,
    1.25: 0.055,
    1.30: 0.022,
    1.33: 0.010,
    1.34: 0.0,
}
REFERENCE_PARAMS = RegimeParams(
    j1=1.0, j2=1.06, rho2=0.5, rho12=1.0, costs=LinearCost(c_top=2.0, c_bottom=1.0)
)
SWEEP_TOL = 0.01
CONVERGENCE_LEVELS = (250, 500, 1000)
SIM_LEVELS = 50
SIM_HORIZON = 50_000.0
SIM_WARMUP = 5_000.0
SIM_REPLICATIONS = 16
SIM_SEED = 20240611


class Check(NamedTuple):
    name: str
    expected: float
    actual: float
    tolerance: float
    passed: bool


def _close(name: str, expected: float, actual: float, tolerance: float) -> Check:
    passed = bool(abs(actual - expected) <= tolerance + 1e-12)
    return Check(name, expected, actual, tolerance, passed)


def _holds(name: str, condition: bool, actual: float = math.nan) -> Check:
    return Check(name, 1.0, actual, 0.0, bool(condition))


def _nonincreasing(values: list[float], slack: float = 1e-12) -> bool:
    return all(b <= a + slack for a, b in zip(values, values[1:], strict=False))


def exponential_model(
    L: int, rho1: float = 1.0, j1: float = 1.0, j2: float = 1.0
) -> DamModelParams:
    """lambda = 1, exponential B1 at load rho1, exponential B2 of rate 2."""
    return DamModelParams(
        lam=1.0, b1=Exponential(rate=1.0 / rho1), b2=Exponential(rate=2.0), L=L, j1=j1, j2=j2
    )


def reference_sweep() -> list[Check]:
    """Linear-cost sweep, its monotone response, the balanced threshold and JSON round trip."""
    rows = sweep_j2(REFERENCE_PARAMS, list(REFERENCE_SWEEP))
    checks = [
        _close(f"sweep C at j2={row.j2:.2f}", REFERENCE_SWEEP[row.j2], row.C, SWEEP_TOL)
        for row in rows
    ]
    checks.append(_holds("sweep C nonincreasing in j2", _nonincreasing([row.C for row in rows])))
    checks.append(_holds("j2=1.34 is balanced", rows[-1].regime is Regime.BALANCED))
    checks.append(_close("balanced threshold j2", 4.0 / 3.0, threshold_j2(REFERENCE_PARAMS), 0.01))

    solution = solve(REFERENCE_PARAMS)
    document = read_document(render(solution_document(solution), "json"))
    checks.append(_close("json round trip C", solution.C, document["C"], 0.0))
    checks.append(_holds("json round trip regime", document["regime"] == str(solution.regime)))
    return checks


def balanced_identities() -> list[Check]:
    """Exact-engine identities and the rho1 = 1 level limits."""
    checks = []
    for L in (2, 10, 100):
        model = exponential_model(L)
        checks.append(
            _close(
                f"J(L) = 3L/(L+3) at L={L}",
                3.0 * L / (L + 3),
                objective_exact(model, ConstantCost(c=1.0)),
                1e-9,
            )
        )

    laws: list[DistributionSpec] = [
        Exponential(rate=1.0),
        Exponential(rate=0.8),
        Erlang(shape=3, rate=2.5),
        Deterministic(value=0.9),
    ]
    for b1 in laws:
        model = DamModelParams(lam=1.0, b1=b1, b2=Exponential(rate=2.5), L=40, j1=1.0, j2=1.0)
        result = stationary(model)
        checks.append(
            _close(
                f"defect = rho1 p1 ({b1.to_text()})", model.rho1 * result.p1, result.defect, 1e-10
            )
        )
        checks.append(
            _close(
                f"p1 = 1/Ev_L ({b1.to_text()})",
                1.0 / renewal_summary(model).services_total,
                result.p1,
                1e-10,
            )
        )

    deviations = []
    for L in CONVERGENCE_LEVELS:
        q = stationary(exponential_model(L)).q
        deviations.append(max(abs(L * q[L - 1 - j] - 1.0) for j in range(11)))
    checks.append(
        _holds("L q_(L-j) deviation decreasing", _nonincreasing(deviations), deviations[-1])
    )
    checks.append(_close("L q_(L-j) deviation at L=1000", 0.0, deviations[-1], 0.05))

    increments = []
    for L in CONVERGENCE_LEVELS:
        table = busy_counts(Deterministic(value=1.0), 1.0, L)
        increments.append(max(abs(table.increment(L - j) - 2.0) for j in range(11)))
    checks.append(_close("increment limit 2/rho12", 0.0, increments[-1], 1e-3))
    return checks


def _regime_convergence(sign: int) -> list[Check]:
    """Exact q_(L-j) and objective at rho1 = 1 + sign C/L against the heavy-traffic forms."""
    C, rho12 = 1.0, 2.0
    approx: Callable[[float, float, float, int], float] = (
        q_upper_approx if sign > 0 else q_lower_approx
    )
    name = "upper" if sign > 0 else "lower"
    errors = []
    for L in CONVERGENCE_LEVELS:
        delta = C / L
        q = stationary(exponential_model(L, rho1=1.0 + sign * delta)).q
        errors.append(
            max(abs(q[L - 1 - j] / approx(delta, C, rho12, j) - 1.0) for j in range(11))
        )
    checks = [
        _holds(f"{name} q_(L-j) error decreasing", _nonincreasing(errors), errors[-1]),
        _close(f"{name} q_(L-j) relative error at L=1000", 0.0, errors[-1], 0.05),
    ]

    L = 2000
    model = exponential_model(L, rho1=1.0 + sign * C / L)
    costs = ConstantCost(c=1.0)
    p = RegimeParams(j1=1.0, j2=1.0, rho2=0.5, rho12=rho12, costs=costs)
    limit = j_upper(p, C) if sign > 0 else j_lower(p, C)
    exact = objective_exact(model, costs)
    error = abs(exact / limit - 1.0)
    checks.append(_close(f"{name} objective relative error at L=2000", 0.0, error, 0.02))
    return checks


def simulator_oracle() -> list[Check]:
    """Simulated time fractions against the exact ones at L = 50, rho1 = 1."""
    model = exponential_model(SIM_LEVELS)
    cfg = SimConfig(
        model=model,
        costs=ConstantCost(c=1.0),
        horizon=SIM_HORIZON,
        warmup=SIM_WARMUP,
        seed=SIM_SEED,
        replications=SIM_REPLICATIONS,
    )
    estimate = simulate(cfg)
    exact = stationary(model)
    occupancy = exact.occupancy()
    checks = [_close("simulated p1", exact.p1, estimate.p1, 3 * estimate.p1_se)]

    simulated = np.concatenate([estimate.q, [estimate.p2]])
    se = np.concatenate([estimate.q_se, [estimate.p2_se]])
    reference = np.concatenate([occupancy.q, [occupancy.p2]])
    share = float(np.mean(np.abs(simulated - reference) <= 3 * se))
    checks.append(Check("levels within 3 SE", 0.95, share, 0.0, share >= 0.95))
    total = estimate.p1 + float(simulated.sum())
    checks.append(_close("time fractions sum to 1", 1.0, total, 1e-9))

    small = cfg.model_copy(update={"horizon": 2_000.0, "warmup": 100.0, "replications": 2})
    first, second = simulate(small), simulate(small)
    checks.append(
        _holds("seed determinism", first.p1 == second.p1 and np.array_equal(first.q, second.q))
    )
    return checks


SCENARIOS: dict[str, Callable[[], list[Check]]] = {
    "table1": reference_sweep,
    "balanced": balanced_identities,
    "upper": lambda: _regime_convergence(+1),
    "lower": lambda: _regime_convergence(-1),
    "simulator": simulator_oracle,
}


def run_scenario(name: str) -> list[Check]:
    """Run one named scenario.

    Raises:
        ConfigError: If the scenario is unknown.
    """
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}", field="scenario")
    checks = SCENARIOS[name]()
    passed = sum(check.passed for check in checks)
    logger.info(f"Scenario {name}: {passed}/{len(checks)} checks passed")
    return checks
