"""
Tests for the next-event simulator.

Short horizons keep most tests fast; the level-by-level comparison with the exact engine
is marked slow.
"""

import math
from unittest.mock import patch

import numpy as np
import pytest
from pydantic import ValidationError

from damctl.costs import ConstantCost, LinearCost
from damctl.dists import Exponential
from damctl.errors import ConfigError
from damctl.exact import DamModelParams, renewal_summary, stationary
from damctl.sim import RunningAreas, SimConfig, simulate


def make_config(L: int = 5, lam: float = 1.0, **kwargs) -> SimConfig:
    model = DamModelParams(
        lam=lam, b1=Exponential(rate=1.0), b2=Exponential(rate=2.0), L=L, j1=1.0, j2=1.0
    )
    params = {
        "model": model,
        "costs": ConstantCost(c=1.0),
        "horizon": 2_000.0,
        "warmup": 100.0,
        "seed": 7,
        "replications": 4,
    }
    params.update(kwargs)
    return SimConfig(**params)


class TestSimConfig:
    """Tests for SimConfig validation."""

    def test_horizon_must_exceed_warmup(self):
        """The observation window must not be empty."""
        with pytest.raises(ValidationError):
            make_config(horizon=100.0, warmup=100.0)

    def test_raw_fields_are_validated(self):
        """simulate() accepts raw fields and reports violations as ConfigError."""
        raw = make_config().model_dump()
        raw["replications"] = 0

        with pytest.raises(ConfigError) as exc_info:
            simulate(raw)

        assert exc_info.value.field == "replications"


class TestRunningAreas:
    """Tests for RunningAreas."""

    def test_clipping_to_window(self):
        """Only time inside [start, end] counts; levels above L share one bin."""
        areas = RunningAreas(2, start=1.0, end=3.0)

        areas.add(0, 0.0, 2.0)
        areas.add(5, 2.0, 4.0)
        areas.add(1, 4.0, 5.0)

        np.testing.assert_allclose(areas.fractions(), [0.5, 0.0, 0.0, 0.5])


class TestSimulate:
    """Tests for simulate()."""

    def test_fractions_sum_to_one(self):
        """Every replication spends all of its window somewhere."""
        estimate = simulate(make_config())

        total = estimate.p1 + estimate.p2 + estimate.q.sum()

        assert total == pytest.approx(1.0, abs=1e-12)
        assert estimate.q.shape == (5,)
        assert estimate.replications == 4

    def test_idle_fraction_matches_renewal_count(self):
        """p1 is close to 1 / E[services per busy period]."""
        cfg = make_config(horizon=20_000.0, replications=8)

        estimate = simulate(cfg)

        expected = 1.0 / renewal_summary(cfg.model).services_total
        assert abs(estimate.p1 - expected) < 4 * estimate.p1_se

    def test_light_traffic_is_mostly_idle(self):
        """With almost no inflow the output is frozen nearly all the time."""
        estimate = simulate(make_config(lam=0.001, horizon=100_000.0, replications=2))

        assert estimate.p1 > 0.99

    def test_objective_of_mean_fractions(self):
        """The objective is linear in the time fractions."""
        cfg = make_config(costs=LinearCost(c_top=3.0, c_bottom=1.0))

        estimate = simulate(cfg)

        model = cfg.model
        expected = (
            estimate.p1 * model.penalty_lower
            + estimate.p2 * model.penalty_upper
            + float(np.dot(estimate.q, np.linspace(3.0, 1.0, model.L)))
        )
        assert estimate.objective == pytest.approx(expected, rel=1e-12)

    def test_same_seed_same_result(self):
        """Runs are reproducible from the seed."""
        first = simulate(make_config())
        second = simulate(make_config())

        assert first.p1 == second.p1
        np.testing.assert_array_equal(first.q, second.q)

    def test_other_seed_other_result(self):
        """Different seeds give different paths."""
        first = simulate(make_config(seed=1))
        second = simulate(make_config(seed=2))

        assert first.p1 != second.p1

    def test_independent_of_worker_count(self):
        """Replication streams do not depend on the thread that runs them."""
        with patch("damctl.sim.max_workers", return_value=1):
            serial = simulate(make_config())

        parallel = simulate(make_config())

        np.testing.assert_array_equal(serial.q, parallel.q)

    def test_exclusive_count_changes_the_switch(self):
        """Counting the entering unit out delays the switch to B2."""
        inclusive = simulate(make_config())
        exclusive = simulate(make_config(exclusive_count=True))

        assert not np.array_equal(inclusive.q, exclusive.q)

    def test_single_replication_has_no_error_bar(self):
        """Standard errors need at least two replications."""
        estimate = simulate(make_config(replications=1))

        assert math.isnan(estimate.p1_se)
        assert np.all(np.isnan(estimate.q_se))

    def test_standard_error_shrinks_like_inverse_root(self):
        """SE of p1 scales as replications**-1/2."""
        counts = [16, 64, 256]
        errors = [
            simulate(make_config(horizon=300.0, warmup=30.0, replications=n)).p1_se for n in counts
        ]

        slope = np.polyfit(np.log(counts), np.log(errors), 1)[0]

        assert -0.8 <= slope <= -0.2


@pytest.mark.slow
class TestAgainstExactEngine:
    """Simulated time fractions against the exact occupancy."""

    def test_levels_within_three_standard_errors(self):
        """At L = 50 at least 95% of the level fractions lie within 3 SE."""
        cfg = make_config(L=50, horizon=50_000.0, warmup=5_000.0, replications=16, seed=11)

        estimate = simulate(cfg)
        occupancy = stationary(cfg.model).occupancy()

        simulated = np.concatenate([[estimate.p1], estimate.q, [estimate.p2]])
        se = np.concatenate([[estimate.p1_se], estimate.q_se, [estimate.p2_se]])
        exact = np.concatenate([[occupancy.p1], occupancy.q, [occupancy.p2]])
        assert np.mean(np.abs(simulated - exact) <= 3 * se) >= 0.95
