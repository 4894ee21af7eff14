"""
Choice of the optimal regime.

Each regime functional is minimised over C in [0, c_max] by a coarse grid scan followed by
golden-section refinement. The balanced regime is optimal when neither side improves on
the common value at C = 0; otherwise the side with the interior minimum wins.
"""

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import StrEnum
from typing import NamedTuple

import numpy as np

from .asympt import RegimeParams, balanced_limit, j_lower, j_upper
from .errors import AmbiguityError, BracketError
from .settings import max_workers

logger = logging.getLogger(__name__)

DEFAULT_C_MAX = 50.0
DEFAULT_TOL = 1e-4
# Smallest improvement over the balanced value that lets the lower regime win
DEFAULT_VALUE_TOL = 1e-5
GRID_POINTS = 64
INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2


class Regime(StrEnum):
    BALANCED = "balanced"
    UPPER = "upper"
    LOWER = "lower"


class ScalarMinimum(NamedTuple):
    """Minimiser of a scalar function, with the numerical slope there."""

    C: float
    value: float
    slope: float


@dataclass(frozen=True)
class ControlSolution:
    """Optimal regime and the three candidates it was chosen from."""

    regime: Regime
    C: float
    objective: float
    upper_min: ScalarMinimum
    lower_min: ScalarMinimum
    balanced_value: float


class SweepRow(NamedTuple):
    j2: float
    regime: Regime
    C: float
    objective: float


def _search_grid(c_max: float, tol: float) -> np.ndarray:
    """0, a geometric run from tol and a linear run up to c_max."""
    half = GRID_POINTS // 2
    geometric = np.geomspace(tol, c_max, half - 1)
    linear = np.linspace(c_max / half, c_max, half)
    return np.unique(np.concatenate([[0.0], geometric, linear]))


def _golden_section(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Midpoint of a bracket of width <= tol around the minimum of f on [a, b]."""
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(steps):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= INV_PHI
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= INV_PHI
            d = a + INV_PHI * h
            yd = f(d)
    return 0.5 * (a + b)


def _slope(f: Callable[[float], float], C: float, c_max: float) -> float:
    h = 1e-6 * max(1.0, C)
    if C - h < 0:
        return (f(C + h) - f(C)) / h
    if C + h > c_max:
        return (f(C) - f(C - h)) / h
    return (f(C + h) - f(C - h)) / (2 * h)


def minimize_scalar(
    f: Callable[[float], float], c_max: float = DEFAULT_C_MAX, tol: float = DEFAULT_TOL
) -> ScalarMinimum:
    """Minimise ``f`` over [0, c_max].

    Args:
        f: Function of C, finite on the interval.
        c_max: Right end of the search interval.
        tol: Argmin resolution; a refined argmin below tol is reported as C = 0.

    Returns:
        The minimiser, its value and a finite-difference slope there.
    """
    grid = _search_grid(c_max, tol)
    values = np.array([f(float(c)) for c in grid])
    best = int(np.argmin(values))
    low = float(grid[max(best - 1, 0)])
    high = float(grid[min(best + 1, grid.size - 1)])
    C = _golden_section(f, low, high, tol)
    value = f(C)
    if values[best] < value:
        C, value = float(grid[best]), float(values[best])
    if C < tol:
        C, value = 0.0, f(0.0)
    logger.debug(f"Minimum on [0, {c_max}] at C={C:.6g}, value={value:.10g}")
    return ScalarMinimum(C=C, value=value, slope=_slope(f, C, c_max))


def _lower_functional(p: RegimeParams, literal: bool) -> Callable[[float], float]:
    if not literal:
        return lambda C: j_lower(p, C)
    # the printed form blows up at C = 0
    return lambda C: j_lower(p, C, literal=True) if C > 0 else math.inf


def solve(
    p: RegimeParams,
    c_max: float = DEFAULT_C_MAX,
    tol: float = DEFAULT_TOL,
    value_tol: float = DEFAULT_VALUE_TOL,
    literal: bool = False,
) -> ControlSolution:
    """Optimal regime for the given parameters.

    Args:
        p: Regime parameters.
        c_max: Right end of the C search interval.
        tol: Argmin resolution.
        value_tol: The lower side is preferred to the balanced regime only when it improves
            the objective by more than this; 0 gives the pure argmin rule. An interior upper
            minimum always wins over balanced.
        literal: Use the printed lower-regime functional.

    Returns:
        The chosen regime with all candidates.

    Raises:
        AmbiguityError: If both sides have interior minima of equal value.
    """
    upper = minimize_scalar(lambda C: j_upper(p, C), c_max, tol)
    lower = minimize_scalar(_lower_functional(p, literal), c_max, tol)
    balanced = balanced_limit(p)

    upper_wins = upper.C > tol
    lower_wins = lower.C > tol and balanced - lower.value > value_tol
    if upper_wins and lower_wins:
        if abs(upper.value - lower.value) < tol:
            raise AmbiguityError(upper.value, lower.value)
        logger.warning(
            f"Both regimes improve on balanced: upper={upper.value:.10g}, lower={lower.value:.10g}"
        )
        upper_wins = upper.value < lower.value
        lower_wins = not upper_wins

    if upper_wins:
        solution = ControlSolution(Regime.UPPER, upper.C, upper.value, upper, lower, balanced)
    elif lower_wins:
        solution = ControlSolution(Regime.LOWER, lower.C, lower.value, upper, lower, balanced)
    else:
        solution = ControlSolution(Regime.BALANCED, 0.0, balanced, upper, lower, balanced)
    logger.info(
        f"j2={p.j2:.6g}: {solution.regime} C={solution.C:.6g} objective={solution.objective:.10g}"
    )
    return solution


def sweep_j2(
    p: RegimeParams,
    j2_values: Sequence[float],
    c_max: float = DEFAULT_C_MAX,
    tol: float = DEFAULT_TOL,
    value_tol: float = DEFAULT_VALUE_TOL,
    literal: bool = False,
) -> list[SweepRow]:
    """Solve once per j2, rows in the order of ``j2_values``.

    Raises:
        ValueError: If ``j2_values`` is empty.
    """
    if not j2_values:
        raise ValueError("j2_values must not be empty")

    def row(j2: float) -> SweepRow:
        solution = solve(p.model_copy(update={"j2": j2}), c_max, tol, value_tol, literal)
        return SweepRow(j2, solution.regime, solution.C, solution.objective)

    with ThreadPoolExecutor(max_workers=min(len(j2_values), max_workers())) as executor:
        return list(executor.map(row, j2_values))


def threshold_j2(
    p: RegimeParams,
    low: float | None = None,
    high: float | None = None,
    tol: float = 1e-3,
    c_max: float = DEFAULT_C_MAX,
    c_tol: float = DEFAULT_TOL,
) -> float:
    """Smallest j2 at which the upper-regime minimiser reaches C = 0.

    The default range is ``[0, j1 (1 - rho2) / rho2 + 10]``, which contains the
    constant-cost boundary for every rho2.

    Raises:
        BracketError: If the upper minimiser is not interior at ``low`` or is interior at
            ``high``.
    """
    if low is None:
        low = 0.0
    if high is None:
        high = p.j1 * (1.0 - p.rho2) / p.rho2 + 10.0

    def upper_interior(j2: float) -> bool:
        candidate = p.model_copy(update={"j2": j2})
        return minimize_scalar(lambda C: j_upper(candidate, C), c_max, c_tol).C > c_tol

    if not upper_interior(low) or upper_interior(high):
        raise BracketError("upper minimiser does not change sides", low, high)
    while high - low > tol:
        mid = 0.5 * (low + high)
        if upper_interior(mid):
            low = mid
        else:
            high = mid
    logger.info(f"Balanced threshold j2={high:.6g} (j1={p.j1:.6g})")
    return high


def plot_grid(
    p: RegimeParams, c_values: Sequence[float], literal: bool = False
) -> list[tuple[float, float, float]]:
    """``(C, J_upper(C), J_lower(C))`` for each C."""
    lower = _lower_functional(p, literal)
    return [(float(C), j_upper(p, C), lower(C)) for C in c_values]
