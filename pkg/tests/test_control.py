"""
Unit tests for the regime choice: scalar minimisation, solve, sweeps and the balanced
threshold.
"""

import logging
import math
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from damctl.asympt import RegimeParams, balanced_limit
from damctl.control import (
    Regime,
    ScalarMinimum,
    minimize_scalar,
    plot_grid,
    solve,
    sweep_j2,
    threshold_j2,
)
from damctl.costs import ConstantCost, LinearCost
from damctl.errors import AmbiguityError, BracketError

REFERENCE = RegimeParams(
    j1=1.0, j2=1.06, rho2=0.5, rho12=1.0, costs=LinearCost(c_top=2.0, c_bottom=1.0)
)


class TestMinimizeScalar:
    """Tests for minimize_scalar()."""

    def test_interior_minimum(self):
        """A smooth bowl is located to the requested resolution."""
        f = MagicMock(side_effect=lambda C: (C - 1.3) ** 2 + 0.5)

        result = minimize_scalar(f, c_max=10.0, tol=1e-5)

        assert result.C == pytest.approx(1.3, abs=1e-4)
        assert result.value == pytest.approx(0.5)
        assert result.slope == pytest.approx(0.0, abs=1e-3)
        assert f.call_count > 60

    def test_boundary_minimum(self):
        """Increasing functions are minimised at C = 0."""
        result = minimize_scalar(lambda C: C + 2.0, c_max=5.0)

        assert result == ScalarMinimum(C=0.0, value=2.0, slope=pytest.approx(1.0))

    def test_far_minimum(self):
        """Minima near c_max are reached through the linear part of the grid."""
        result = minimize_scalar(lambda C: abs(C - 47.0), c_max=50.0, tol=1e-4)

        assert result.C == pytest.approx(47.0, abs=1e-3)


class TestSolve:
    """Tests for solve()."""

    def test_upper_regime(self):
        """Cheap overflow favours the upper regime."""
        solution = solve(REFERENCE)

        assert solution.regime is Regime.UPPER
        assert solution.C == pytest.approx(0.200, abs=0.01)
        assert solution.objective < solution.balanced_value
        assert solution.balanced_value == pytest.approx(2.53)

    def test_balanced_regime(self):
        """Past the threshold the balanced regime is kept."""
        solution = solve(REFERENCE.model_copy(update={"j2": 1.34}))

        assert solution.regime is Regime.BALANCED
        assert solution.C == 0.0
        assert solution.objective == solution.balanced_value

    def test_lower_regime(self):
        """Costly overflow with cheap emptying favours the lower regime."""
        params = RegimeParams(j1=0.2, j2=3.0, rho2=0.5, rho12=1.0, costs=ConstantCost(c=1.0))

        solution = solve(params)

        assert solution.regime is Regime.LOWER
        assert solution.C > 0.0
        assert solution.lower_min.slope == pytest.approx(0.0, abs=1e-2)

    def test_small_upper_dip_beats_balanced(self):
        """An interior upper minimum wins however small its gain."""
        params = RegimeParams(j1=1.0, j2=0.995, rho2=0.5, rho12=1.0, costs=ConstantCost(c=1.0))

        solution = solve(params)

        assert solution.regime is Regime.UPPER
        assert solution.C == pytest.approx(0.0037, abs=1e-3)
        assert solution.objective < solution.balanced_value

    def test_pure_argmin_rule(self):
        """value_tol = 0 lets a negligible interior dip decide."""
        params = REFERENCE.model_copy(update={"j2": 1.34})

        solution = solve(params, value_tol=0.0)

        assert solution.regime in (Regime.LOWER, Regime.BALANCED)
        assert solution.objective <= balanced_limit(params)

    def test_ambiguous_minima(self):
        """Equal interior minima on both sides are refused."""
        minima = [ScalarMinimum(1.0, 0.5, 0.0), ScalarMinimum(2.0, 0.5, 0.0)]

        with patch("damctl.control.minimize_scalar", side_effect=minima):
            with pytest.raises(AmbiguityError) as exc_info:
                solve(REFERENCE)

        assert exc_info.value.upper_value == 0.5

    def test_both_sides_pick_the_lower_value(self, caplog):
        """When both sides improve, the smaller objective wins with a warning."""
        minima = [ScalarMinimum(1.0, 0.9, 0.0), ScalarMinimum(2.0, 0.4, 0.0)]

        with patch("damctl.control.minimize_scalar", side_effect=minima):
            with caplog.at_level(logging.WARNING, logger="damctl.control"):
                solution = solve(REFERENCE)

        assert solution.regime is Regime.LOWER
        assert solution.C == 2.0
        assert "Both regimes" in caplog.text


class TestBalancedCondition:
    """The balanced regime is only chosen when j1 <= j2 rho2 / (1 - rho2)."""

    @staticmethod
    def _effective_penalty(params: RegimeParams) -> float:
        return params.j2 * params.rho2 / (1.0 - params.rho2)

    def test_random_parameters(self):
        """Balanced solutions never have a dominant emptying penalty."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            top = rng.uniform(1.0, 2.0)
            costs = (
                ConstantCost(c=top)
                if rng.random() < 0.5
                else LinearCost(c_top=top, c_bottom=top - rng.uniform(0.1, 1.0))
            )
            j1 = rng.uniform(0.5, 2.0)
            rho2 = rng.uniform(0.3, 0.6)
            # log(j2' / j1), at least 0.5% away from the boundary
            log_ratio = rng.choice([-1.0, 1.0]) * rng.uniform(0.005, 0.5)
            j2 = j1 * math.exp(log_ratio) * (1.0 - rho2) / rho2
            params = RegimeParams(
                j1=j1, j2=j2, rho2=rho2, rho12=rng.uniform(0.5, 2.0), costs=costs
            )

            solution = solve(params)

            if solution.regime is Regime.BALANCED:
                assert params.j1 <= self._effective_penalty(params)
            if params.j1 > self._effective_penalty(params):
                assert solution.regime is Regime.UPPER

    def test_constant_costs_at_equality(self):
        """j1 = j2' with constant costs is balanced."""
        params = RegimeParams(j1=1.0, j2=1.0, rho2=0.5, rho12=1.0, costs=ConstantCost(c=1.0))

        solution = solve(params)

        assert solution.regime is Regime.BALANCED
        assert solution.upper_min.C == 0.0
        assert solution.lower_min.C == 0.0

    def test_decreasing_costs_at_equality(self):
        """j1 = j2' with strictly decreasing costs still favours the upper regime."""
        params = RegimeParams(
            j1=1.0, j2=1.0, rho2=0.5, rho12=1.0, costs=LinearCost(c_top=2.0, c_bottom=1.0)
        )

        solution = solve(params)

        assert solution.regime is Regime.UPPER
        assert solution.C > 0.0


class TestSweep:
    """Tests for sweep_j2()."""

    def test_rows_follow_input_order(self):
        """Rows come back in the order of the j2 values."""
        j2_values = [1.2, 1.06, 1.34]

        rows = sweep_j2(REFERENCE, j2_values)

        assert [row.j2 for row in rows] == j2_values
        assert rows[1].C > rows[0].C > rows[2].C == 0.0

    def test_response_is_monotone(self):
        """Up to the threshold the optimal C does not grow with j2."""
        rows = sweep_j2(REFERENCE, list(np.round(np.arange(1.0, 1.35, 0.02), 2)))

        assert all(b.C <= a.C + 1e-3 for a, b in zip(rows, rows[1:], strict=False))

    def test_single_worker(self):
        """Results do not depend on the worker count."""
        with patch("damctl.control.max_workers", return_value=1):
            serial = sweep_j2(REFERENCE, [1.1, 1.2])

        assert serial == sweep_j2(REFERENCE, [1.1, 1.2])

    def test_empty_grid(self):
        """An empty sweep is a caller error."""
        with pytest.raises(ValueError):
            sweep_j2(REFERENCE, [])


class TestThreshold:
    """Tests for threshold_j2()."""

    def test_reference_threshold(self):
        """Linear costs 2 -> 1 put the threshold at 4/3."""
        assert threshold_j2(REFERENCE) == pytest.approx(4.0 / 3.0, abs=0.01)

    def test_constant_costs(self):
        """Constant costs put the threshold at j1 (1 - rho2) / rho2."""
        params = RegimeParams(j1=1.5, j2=1.0, rho2=0.4, rho12=2.0, costs=ConstantCost(c=1.0))

        assert threshold_j2(params) == pytest.approx(1.5 * 0.6 / 0.4, abs=0.01)

    def test_balanced_threshold_is_consistent_with_solve(self):
        """At the computed threshold solve() keeps the balanced regime."""
        rng = np.random.default_rng(2024)
        for _ in range(5):
            top = rng.uniform(1.0, 2.0)
            costs = (
                ConstantCost(c=top)
                if rng.random() < 0.5
                else LinearCost(c_top=top, c_bottom=top - rng.uniform(0.1, 1.0))
            )
            params = RegimeParams(
                j1=rng.uniform(0.5, 2.0),
                j2=1.0,
                rho2=rng.uniform(0.3, 0.6),
                rho12=rng.uniform(0.5, 2.0),
                costs=costs,
            )

            threshold = threshold_j2(params, tol=1e-5)
            solution = solve(params.model_copy(update={"j2": threshold}))

            assert solution.regime is Regime.BALANCED
            assert solution.upper_min.C == 0.0

    def test_bracket_without_sign_change(self):
        """A range where the minimiser never leaves zero is rejected."""
        params = RegimeParams(j1=0.0, j2=1.0, rho2=0.5, rho12=1.0, costs=ConstantCost(c=1.0))

        with pytest.raises(BracketError):
            threshold_j2(params)


class TestPlotGrid:
    """Tests for plot_grid()."""

    def test_rows(self):
        """C = 0 gives the balanced value on both sides."""
        rows = plot_grid(REFERENCE, [0.0, 0.5])

        assert rows[0] == (0.0, pytest.approx(2.53), pytest.approx(2.53))
        assert rows[1][2] == pytest.approx(2.6814127, abs=1e-6)

    def test_literal_lower_side(self):
        """The printed lower form is infinite at C = 0."""
        rows = plot_grid(REFERENCE, [0.0, 1.0], literal=True)

        assert math.isinf(rows[0][2])
        assert math.isfinite(rows[1][2])
