"""
Water-cost models over the levels 1..L.

Costs are positive and nonincreasing in the level. Besides the per-level values the module
provides the Cesaro limit c*, the backward generating cost function
``C_L(z) = sum_{j<L} c_{L-j} z**j`` and the limit functions psi(C) (upper regime) and
eta(C) (lower regime), together with their finite-L proxies.
"""

import logging
import math
from collections.abc import Callable
from functools import lru_cache
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
import pandas as pd
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    model_validator,
)
from scipy import special

from .errors import ConfigError, ConvergenceError, DomainError, IoError
from .settings import validated

logger = logging.getLogger(__name__)

COST_EVAL_LEVELS = 100_000
RICHARDSON_TOL = 1e-6
# Level arrays kept: three level counts per extrapolation, for psi and eta
LEVELS_CACHE_SIZE = 8
# Below this value of x = 2C/rho12 the kernels switch to their series
SERIES_THRESHOLD = 1e-4

Extension = Literal["repeat-last", "stretch"]


class ConstantCost(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["constant"] = "constant"
    c: NonNegativeFloat

    def levels(self, L: int) -> np.ndarray:
        return np.full(L, self.c)

    def to_text(self) -> str:
        return f"constant:{self.c!r}"


class LinearCost(BaseModel):
    """Costs falling linearly from ``c_top`` at level 1 to ``c_bottom`` at level L."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["linear"] = "linear"
    c_top: PositiveFloat
    c_bottom: PositiveFloat

    @model_validator(mode="after")
    def _check_order(self) -> "LinearCost":
        if not self.c_bottom < self.c_top:
            raise ValueError(f"c_bottom ({self.c_bottom}) must be below c_top ({self.c_top})")
        return self

    def levels(self, L: int) -> np.ndarray:
        if L == 1:
            return np.array([self.c_top])
        return np.linspace(self.c_top, self.c_bottom, L)

    def to_text(self) -> str:
        return f"linear:{self.c_top!r},{self.c_bottom!r}"


class TableCost(BaseModel):
    """Tabulated costs with a rule for levels beyond the table."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["table"] = "table"
    values: tuple[PositiveFloat, ...] = Field(min_length=1)
    extension: Extension = "repeat-last"
    source: str | None = None

    @model_validator(mode="after")
    def _check_monotone(self) -> "TableCost":
        for i, (prev, cur) in enumerate(zip(self.values, self.values[1:], strict=False), start=2):
            if cur > prev:
                raise ValueError(f"table costs must be nonincreasing, level {i} rises to {cur}")
        return self

    def levels(self, L: int) -> np.ndarray:
        values = np.asarray(self.values)
        if L <= values.size:
            return values[:L].copy()
        if self.extension == "repeat-last":
            return np.concatenate([values, np.full(L - values.size, values[-1])])
        # stretch: piecewise-linear rescaling of the table onto L levels
        positions = np.linspace(0.0, values.size - 1, L)
        return np.interp(positions, np.arange(values.size), values)

    def to_text(self) -> str:
        if self.source is not None:
            return f"table:{self.source},{self.extension}"
        return "table:" + "|".join(repr(v) for v in self.values) + f",{self.extension}"


CostModel = Annotated[ConstantCost | LinearCost | TableCost, Field(discriminator="kind")]


@lru_cache(maxsize=LEVELS_CACHE_SIZE)
def _levels_cached(costs: CostModel, L: int) -> np.ndarray:
    values = costs.levels(L)
    values.flags.writeable = False
    return values


def levels(costs: CostModel, L: int) -> np.ndarray:
    """Costs c_1..c_L as a read-only array."""
    if L < 1:
        raise DomainError(f"L must be at least 1, got {L}", argument=L)
    return _levels_cached(costs, L)


def cost_at(costs: CostModel, i: int, L: int) -> float:
    """Cost of level ``i`` when there are ``L`` levels.

    Raises:
        IndexError: If ``i`` is outside [1, L].
    """
    if not 1 <= i <= L:
        raise IndexError(f"level {i} outside [1, {L}]")
    return float(levels(costs, L)[i - 1])


def _richardson(estimate: Callable[[int], float], L: int, what: str) -> float:
    """Extrapolate an O(1/L) sequence from L, 2L and 4L, checking the two extrapolations agree."""
    at_l, at_2l, at_4l = estimate(L), estimate(2 * L), estimate(4 * L)
    first = 2.0 * at_2l - at_l
    second = 2.0 * at_4l - at_2l
    if abs(first - second) > RICHARDSON_TOL:
        raise ConvergenceError(
            f"{what} does not settle: {first:.10g} vs {second:.10g}", bracket=(L, 4 * L)
        )
    return second


def c_star(costs: CostModel, l_eval: int = COST_EVAL_LEVELS) -> float:
    """Cesaro limit ``lim (1/L) sum c_i``.

    Raises:
        ConvergenceError: If the Table averages do not settle.
    """
    if isinstance(costs, ConstantCost):
        return costs.c
    if isinstance(costs, LinearCost):
        return 0.5 * (costs.c_top + costs.c_bottom)
    return _richardson(lambda n: float(np.mean(levels(costs, n))), l_eval, "Cesaro average")


def upper_kernel(x: float) -> float:
    """``1/x - 1/(e**x - 1)``: weight of the top cost under the upper regime, 1/2 at x = 0."""
    if x < SERIES_THRESHOLD:
        return 0.5 - x / 12.0 + x**3 / 720.0
    return float((1.0 - 1.0 / special.exprel(x)) / x)


def lower_kernel(x: float) -> float:
    """``1/(1 - e**-x) - 1/x``; ``upper_kernel(x) + lower_kernel(x) = 1``."""
    if x < SERIES_THRESHOLD:
        return 0.5 + x / 12.0 - x**3 / 720.0
    return float((1.0 / special.exprel(-x) - 1.0) / x)


def _check_args(C: float, rho12: float) -> None:
    if C < 0:
        raise DomainError(f"C must be nonnegative, got {C!r}", argument=C, boundary=0.0)
    if rho12 <= 0:
        raise DomainError(f"rho12 must be positive, got {rho12!r}", argument=rho12, boundary=0.0)


def _geometric_weights(ratio_log: float, L: int) -> np.ndarray:
    """``z**j`` for j = 0..L-1 with ``log z = ratio_log``, scaled so the largest is 1."""
    exponents = np.arange(L) * ratio_log
    return np.exp(exponents - exponents.max())


def psi_proxy(costs: CostModel, C: float, rho12: float, L: int) -> float:
    """Finite-L upper-regime average cost ``sum c_{L-j} w_j / sum w_j``, ``w_j = (1 - x/L)**j``."""
    _check_args(C, rho12)
    x = 2.0 * C / rho12
    if x >= L:
        raise DomainError(f"L={L} too small for x={x!r}", argument=L, boundary=x)
    weights = _geometric_weights(math.log1p(-x / L), L)
    return float(np.dot(levels(costs, L)[::-1], weights) / weights.sum())


def eta_proxy(costs: CostModel, C: float, rho12: float, L: int) -> float:
    """Finite-L lower-regime average cost, weights ``(1 + x/L)**j``."""
    _check_args(C, rho12)
    x = 2.0 * C / rho12
    weights = _geometric_weights(math.log1p(x / L), L)
    return float(np.dot(levels(costs, L)[::-1], weights) / weights.sum())


def _proxy_levels(x: float, l_eval: int) -> int:
    # keeps 1 - x/L positive with room to spare
    return max(l_eval, 2 * math.ceil(x))


def psi(costs: CostModel, C: float, rho12: float, l_eval: int = COST_EVAL_LEVELS) -> float:
    """Limiting average water cost under the upper regime.

    Args:
        costs: Cost model.
        C: Control variable, ``C = lim L * delta``.
        rho12: Limit of the scaled second moment of B1.
        l_eval: Base number of levels for Table proxies.

    Returns:
        psi(C); equals c* at C = 0 and is nonincreasing in C.

    Raises:
        ConvergenceError: If a Table proxy does not settle.
    """
    _check_args(C, rho12)
    if C == 0:
        return c_star(costs, l_eval)
    if isinstance(costs, ConstantCost):
        return costs.c
    x = 2.0 * C / rho12
    if isinstance(costs, LinearCost):
        return costs.c_bottom + (costs.c_top - costs.c_bottom) * upper_kernel(x)
    return _richardson(
        lambda n: psi_proxy(costs, C, rho12, n), _proxy_levels(x, l_eval), "psi proxy"
    )


def eta(costs: CostModel, C: float, rho12: float, l_eval: int = COST_EVAL_LEVELS) -> float:
    """Limiting average water cost under the lower regime; mirror of :func:`psi`."""
    _check_args(C, rho12)
    if C == 0:
        return c_star(costs, l_eval)
    if isinstance(costs, ConstantCost):
        return costs.c
    x = 2.0 * C / rho12
    if isinstance(costs, LinearCost):
        return costs.c_bottom + (costs.c_top - costs.c_bottom) * lower_kernel(x)
    return _richardson(
        lambda n: eta_proxy(costs, C, rho12, n), _proxy_levels(x, l_eval), "eta proxy"
    )


def backward_generating(costs: CostModel, z: float, L: int) -> float:
    """Backward generating cost function ``sum_{j=0}^{L-1} c_{L-j} z**j``."""
    return float(np.polynomial.polynomial.polyval(z, levels(costs, L)[::-1]))


def c_upper_backward(costs: CostModel, C: float, rho12: float, L: int) -> float:
    """Upper-regime cost term through the backward generating function at ``z = 1 - x/L``."""
    _check_args(C, rho12)
    x = 2.0 * C / rho12
    if x == 0:
        return float(np.mean(levels(costs, L)))
    return float(
        (x / L) * backward_generating(costs, 1.0 - x / L, L) / (-math.expm1(-x))
    )


def c_lower_backward(costs: CostModel, C: float, rho12: float, L: int) -> float:
    """Lower-regime cost term through the backward generating function at ``z = 1 + x/L``."""
    _check_args(C, rho12)
    x = 2.0 * C / rho12
    if x == 0:
        return float(np.mean(levels(costs, L)))
    return float((x / L) * backward_generating(costs, 1.0 + x / L, L) / math.expm1(x))


def load_table(path: str, extension: Extension = "repeat-last") -> TableCost:
    """Read a cost table, one positive value per line.

    Raises:
        IoError: If the file cannot be read.
        ConfigError: If the values are not positive and nonincreasing.
    """
    try:
        frame = pd.read_csv(Path(path), header=None, comment="#")
    except (OSError, pd.errors.EmptyDataError) as e:
        raise IoError(path, str(e)) from e
    if frame.shape[1] != 1:
        raise ConfigError(f"expected one value per line in {path}", field="cost")
    values = tuple(_number(str(v)) for v in frame.iloc[:, 0])
    logger.info(f"Loaded {len(values)} cost levels from {path}")
    return validated(
        TableCost, {"values": values, "extension": extension, "source": path}
    )


def parse_cost(text: str) -> CostModel:
    """Parse ``constant:C`` | ``linear:TOP,BOTTOM`` | ``table:PATH_OR_VALUES[,RULE]``.

    Inline tables separate values with ``|``.

    Raises:
        ConfigError: On malformed text or invalid parameters.
    """
    kind, sep, params = text.strip().partition(":")
    kind = kind.strip().lower()
    if not sep or not params:
        raise ConfigError(f"expected kind:params, got {text!r}", field="cost")

    if kind == "table":
        target, _, rule = params.rpartition(",")
        if not target:
            target, rule = params, "repeat-last"
        if rule not in ("repeat-last", "stretch"):
            raise ConfigError(f"unknown table extension rule {rule!r}", field="cost")
        extension: Extension = "stretch" if rule == "stretch" else "repeat-last"
        if "|" in target or _is_number(target):
            values = tuple(_number(v) for v in target.split("|"))
            return validated(TableCost, {"values": values, "extension": extension})
        return load_table(target, extension)

    numbers = [_number(v) for v in params.split(",")]
    if kind == "constant" and len(numbers) == 1:
        return validated(ConstantCost, {"c": numbers[0]})
    if kind == "linear" and len(numbers) == 2:
        return validated(LinearCost, {"c_top": numbers[0], "c_bottom": numbers[1]})
    raise ConfigError(f"cannot parse cost {text!r}", field="cost")


def format_cost(costs: CostModel) -> str:
    """Config-text form of a cost model."""
    return costs.to_text()


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", field="cost") from None
