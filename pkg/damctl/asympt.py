"""
Heavy-traffic functionals of the three regimes.

With ``x = 2C / rho12`` the long-run objective per level tends to

- balanced (rho1 = 1):    j1 rho12/2 + j2' rho12/2 + c*,
- upper (rho1 = 1 + C/L): C [j1 / (e^x - 1) + j2' e^x / (e^x - 1)] + psi(C),
- lower (rho1 = 1 - C/L): C [j1 e^x / (e^x - 1) + j2' / (e^x - 1)] + eta(C),

where ``j2' = j2 rho2 / (1 - rho2)``. Both regime functionals reduce to the balanced value
as C -> 0. The module also gives the level probabilities near the upper threshold.
"""

import logging
import math

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat
from scipy import special

from .costs import CostModel, c_star, eta, psi
from .dists import DistributionSpec, scale_to_load, scaled_moment
from .errors import DomainError

logger = logging.getLogger(__name__)


class RegimeParams(BaseModel):
    """Inputs of the heavy-traffic functionals."""

    model_config = ConfigDict(frozen=True)

    j1: NonNegativeFloat
    j2: NonNegativeFloat
    rho2: float = Field(gt=0.0, lt=1.0)
    rho12: PositiveFloat
    costs: CostModel

    @property
    def j2_effective(self) -> float:
        """``j2 * rho2 / (1 - rho2)``: the upper penalty as seen through the B2 excursions."""
        return self.j2 * self.rho2 / (1.0 - self.rho2)


def regime_params_from_specs(
    lam: float,
    b1: DistributionSpec,
    b2: DistributionSpec,
    j1: float,
    j2: float,
    costs: CostModel,
) -> RegimeParams:
    """Derive rho2 from B2 and rho12 from the B1 family rescaled to rho1 = 1."""
    rho2 = scaled_moment(b2, lam, 1)
    rho12 = scaled_moment(scale_to_load(b1, lam, 1.0), lam, 2)
    logger.info(f"Derived regime parameters rho2={rho2:.10g}, rho12={rho12:.10g}")
    return RegimeParams(j1=j1, j2=j2, rho2=rho2, rho12=rho12, costs=costs)


def _check_control(C: float) -> None:
    if C < 0:
        raise DomainError(f"C must be nonnegative, got {C!r}", argument=C, boundary=0.0)


def _rising_share(p: RegimeParams, C: float) -> float:
    """``C / (e^x - 1)``, equal to rho12/2 at C = 0."""
    return 0.5 * p.rho12 / float(special.exprel(2.0 * C / p.rho12))


def _falling_share(p: RegimeParams, C: float) -> float:
    """``C e^x / (e^x - 1)``, equal to rho12/2 at C = 0."""
    return 0.5 * p.rho12 / float(special.exprel(-2.0 * C / p.rho12))


def balanced_limit(p: RegimeParams) -> float:
    """Limit objective per level for rho1 = 1."""
    half = 0.5 * p.rho12
    return p.j1 * half + p.j2_effective * half + c_star(p.costs)


def j_upper(p: RegimeParams, C: float) -> float:
    """Limit objective per level for rho1 = 1 + delta with ``L * delta -> C``.

    Args:
        p: Regime parameters.
        C: Control variable; C = 0 gives the balanced value.

    Returns:
        The objective value.
    """
    _check_control(C)
    penalties = p.j1 * _rising_share(p, C) + p.j2_effective * _falling_share(p, C)
    return penalties + psi(p.costs, C, p.rho12)


def j_lower(p: RegimeParams, C: float, literal: bool = False) -> float:
    """Limit objective per level for rho1 = 1 - delta with ``L * delta -> C``.

    Args:
        p: Regime parameters.
        C: Control variable; C = 0 gives the balanced value.
        literal: Evaluate :func:`j_lower_literal` instead of the mirrored form.

    Returns:
        The objective value.
    """
    if literal:
        return j_lower_literal(p, C)
    _check_control(C)
    penalties = p.j1 * _falling_share(p, C) + p.j2_effective * _rising_share(p, C)
    return penalties + eta(p.costs, C, p.rho12)


def j_lower_literal(p: RegimeParams, C: float) -> float:
    """Lower-regime functional with the exponent ``rho12 / 2C`` as it is usually printed.

    ``C [j1 e^y + j2' (e^y - 1)] + eta(C)`` with ``y = rho12 / 2C``. It does not reduce to
    the balanced value as C -> 0 and is kept for comparison only.
    """
    if C <= 0:
        raise DomainError("the printed lower functional is undefined at C = 0", argument=C)
    y = 0.5 * p.rho12 / C
    if y > 700.0:
        return math.inf
    return C * (p.j1 * math.exp(y) + p.j2_effective * math.expm1(y)) + eta(p.costs, C, p.rho12)


def _check_delta(delta: float, rho12: float) -> float:
    if delta <= 0 or rho12 <= 0:
        raise DomainError(f"delta and rho12 must be positive, got {delta!r}, {rho12!r}")
    return 2.0 * delta / rho12


def q_upper_approx(delta: float, C: float, rho12: float, j: int) -> float:
    """Probability of level ``L - j`` for rho1 = 1 + delta, L delta -> C.

    Raises:
        DomainError: Unless ``0 < 2 delta / rho12 < 1``.
    """
    a = _check_delta(delta, rho12)
    if a >= 1.0:
        raise DomainError(f"2*delta/rho12 must be below 1, got {a!r}", argument=a, boundary=1.0)
    x = 2.0 * C / rho12
    return a * (1.0 - a) ** j / (-math.expm1(-x))


def q_lower_approx(delta: float, C: float, rho12: float, j: int) -> float:
    """Probability of level ``L - j`` for rho1 = 1 - delta, L delta -> C."""
    a = _check_delta(delta, rho12)
    x = 2.0 * C / rho12
    return a * (1.0 + a) ** j / math.expm1(x)
