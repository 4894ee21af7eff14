"""
Exact finite-L stationary quantities of the dam.

The expected numbers of B1 services in a busy period of the M/GI/1/n queue, Ev_n, solve a
convolution recurrence in the mixed-Poisson weights r_j. The increments
``d_n = Ev_n - Ev_{n-1}`` obey the all-positive form

    d_{n+1} = (Rbar_n + sum_{i=1}^{n} d_i Rbar_{n+1-i}) / r_0,   d_0 = 1,

with ``Rbar_j = P(N > j)``. Stationary probabilities are ratios of these counts, so the
table is stored with a running power-of-two scale that keeps values finite for rho1 > 1.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, model_validator

from .costs import CostModel, levels
from .dists import (
    DistributionSpec,
    lst_derivative,
    poisson_weights,
    root_phi,
    root_tau,
    scaled_moment,
)
from .errors import DomainError
from .settings import MAX_LEVELS, log_scaling_enabled

logger = logging.getLogger(__name__)

RESCALE_EXPONENT = 512
RESCALE_LIMIT = 2.0**RESCALE_EXPONENT


class DamModelParams(BaseModel):
    """Dam model: Poisson inflow, two service laws and the penalised thresholds."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: PositiveFloat = Field(alias="lambda")
    b1: DistributionSpec
    b2: DistributionSpec
    L: int = Field(ge=1, le=MAX_LEVELS)
    j1: NonNegativeFloat
    j2: NonNegativeFloat

    @model_validator(mode="after")
    def _check_b2_load(self) -> "DamModelParams":
        if self.rho2 >= 1.0:
            raise ValueError(f"B2 must be subcritical, got rho2={self.rho2!r}")
        return self

    @property
    def rho1(self) -> float:
        return self.lam * self.b1.mean()

    @property
    def rho2(self) -> float:
        return self.lam * self.b2.mean()

    @property
    def penalty_lower(self) -> float:
        """J1 = j1 * L."""
        return self.j1 * self.L

    @property
    def penalty_upper(self) -> float:
        """J2 = j2 * L."""
        return self.j2 * self.L


@dataclass(frozen=True)
class BusyPeriodTable:
    """Busy-period service counts Ev_0..Ev_L, stored as ``true = stored * exp(log_scale)``."""

    counts: np.ndarray
    increments: np.ndarray
    log_scale: float

    @property
    def L(self) -> int:
        return self.counts.size - 1

    def count(self, n: int) -> float:
        """True value of Ev_n (may be inf when it exceeds the float range)."""
        return _unscale(float(self.counts[n]), self.log_scale)

    def increment(self, n: int) -> float:
        """True value of Ev_n - Ev_{n-1} (d_0 = 1)."""
        return _unscale(float(self.increments[n]), self.log_scale)

    @property
    def unit(self) -> float:
        """Stored value of the constant 1, i.e. ``exp(-log_scale)``."""
        return float(self.increments[0])


def _unscale(value: float, log_scale: float) -> float:
    if value == 0.0:
        return 0.0
    exponent = math.log(value) + log_scale
    return math.exp(exponent) if exponent < 709.0 else math.inf


@dataclass(frozen=True)
class StationaryResult:
    """Stationary probabilities as given by the closed-form expressions.

    Attributes:
        p1: Probability of the level sitting at the lower bound.
        p2: Probability term of the level above the upper bound.
        q: q_1..q_L.
        defect: ``1 - (p1 + p2 + sum q)``, equal to ``rho1 * p1``.
        rho1: Traffic intensity of B1.
        rho2: Traffic intensity of B2.
    """

    p1: float
    p2: float
    q: np.ndarray
    defect: float
    rho1: float
    rho2: float

    def renormalized(self) -> "StationaryResult":
        """(p1, p2, q) divided by their sum; defect 0."""
        total = 1.0 - self.defect
        return StationaryResult(
            p1=self.p1 / total,
            p2=self.p2 / total,
            q=self.q / total,
            defect=0.0,
            rho1=self.rho1,
            rho2=self.rho2,
        )

    def occupancy(self) -> "StationaryResult":
        """Long-run fractions of time at 0, at each level 1..L and above L; sums to 1."""
        p2 = self.p2 / self.rho2
        q = self.q / self.rho1
        return StationaryResult(
            p1=self.p1,
            p2=p2,
            q=q,
            defect=1.0 - (self.p1 + p2 + math.fsum(q)),
            rho1=self.rho1,
            rho2=self.rho2,
        )


@dataclass(frozen=True)
class RenewalSummary:
    """Busy-cycle expectations of the dam."""

    services_b1: float
    services_b2: float
    services_total: float
    busy_time_b1: float
    busy_time_b2: float
    busy_period: float
    idle_period: float

    @property
    def cycle(self) -> float:
        return self.busy_period + self.idle_period


def busy_counts(
    b1: DistributionSpec, lam: float, L: int, log_scaling: bool | None = None
) -> BusyPeriodTable:
    """Expected B1 services per busy period of M/GI/1/n for n = 0..L.

    Args:
        b1: Service-time law below the upper threshold.
        lam: Arrival rate.
        L: Number of levels.
        log_scaling: Rescale by powers of two instead of overflowing; defaults to
            ``DAMCTL_LOG_SCALING``.

    Returns:
        The scaled table.

    Raises:
        OverflowError: If counts exceed the float range with log-scaling disabled.
    """
    if not 1 <= L <= MAX_LEVELS:
        raise DomainError(f"L must lie in [1, {MAX_LEVELS}], got {L}", argument=L)
    if log_scaling is None:
        log_scaling = log_scaling_enabled()

    weights = poisson_weights(b1, lam, L + 1)
    r0 = float(weights.weights[0])
    tails = weights.tails
    d = np.zeros(L + 1)
    d[0] = 1.0
    log_scale = 0.0
    for n in range(L):
        d[n + 1] = (d[0] * tails[n] + np.dot(d[1 : n + 1], tails[n:0:-1])) / r0
        if d[n + 1] >= RESCALE_LIMIT or not math.isfinite(d[n + 1]):
            if not log_scaling:
                raise OverflowError(f"busy-period count overflows at n={n + 1}; enable log scaling")
            if not math.isfinite(d[n + 1]):
                raise OverflowError(f"busy-period increment not finite at n={n + 1}")
            d[: n + 2] /= RESCALE_LIMIT
            log_scale += RESCALE_EXPONENT * math.log(2.0)
            logger.debug(f"Rescaled busy-period table at n={n + 1}, log_scale={log_scale:.6g}")
    return BusyPeriodTable(counts=np.cumsum(d), increments=d, log_scale=log_scale)


def stationary(model: DamModelParams, table: BusyPeriodTable | None = None) -> StationaryResult:
    """Stationary p1, p2 and q_1..q_L in ratio form against the scaled table.

    Args:
        model: Dam parameters.
        table: Precomputed ``busy_counts(model.b1, model.lam, model.L)``.

    Returns:
        The raw probabilities and their normalization defect.
    """
    if table is None:
        table = busy_counts(model.b1, model.lam, model.L)
    rho1, rho2 = model.rho1, model.rho2
    unit = table.unit
    top = float(table.counts[model.L])
    denominator = unit + (rho1 - rho2) * top

    p1 = (1.0 - rho2) * unit / denominator
    p2 = (rho2 * unit + rho2 * (rho1 - 1.0) * top) / denominator
    q = rho1 * (1.0 - rho2) * table.increments[1:] / denominator
    defect = 1.0 - (p1 + p2 + math.fsum(q))
    return StationaryResult(p1=p1, p2=p2, q=q, defect=defect, rho1=rho1, rho2=rho2)


def objective_exact(
    model: DamModelParams, costs: CostModel, result: StationaryResult | None = None
) -> float:
    """Objective ``p1*J1 + p2*J2 + sum q_i c_i`` of the closed-form probabilities."""
    if result is None:
        result = stationary(model)
    return (
        result.p1 * model.penalty_lower
        + result.p2 * model.penalty_upper
        + float(np.dot(result.q, levels(costs, model.L)))
    )


def renewal_summary(model: DamModelParams, table: BusyPeriodTable | None = None) -> RenewalSummary:
    """Expected services, busy time and idle time of one busy cycle.

    The total number of services in a busy period equals the number of arrivals in a
    cycle, so ``p1 = 1 / services_total``. Busy times follow from Wald's identity.
    """
    if table is None:
        table = busy_counts(model.b1, model.lam, model.L)
    rho1, rho2 = model.rho1, model.rho2
    services_b1 = table.count(model.L)
    # stored form avoids inf - inf for huge counts
    unit = table.unit
    top = float(table.counts[model.L])
    services_b2 = _unscale(
        max(unit + (rho1 - 1.0) * top, 0.0) / (1.0 - rho2), table.log_scale
    )
    services_total = _unscale((unit + (rho1 - rho2) * top) / (1.0 - rho2), table.log_scale)
    busy_time_b1 = rho1 * services_b1 / model.lam
    busy_time_b2 = rho2 * services_b2 / model.lam
    return RenewalSummary(
        services_b1=services_b1,
        services_b2=services_b2,
        services_total=services_total,
        busy_time_b1=busy_time_b1,
        busy_time_b2=busy_time_b2,
        busy_period=busy_time_b1 + busy_time_b2,
        idle_period=1.0 / model.lam,
    )


def busy_count_asymptotic(b1: DistributionSpec, lam: float, L: int) -> float:
    """Large-L approximation of Ev_L.

    rho1 = 1 gives ``2L / rho12``; rho1 > 1 gives
    ``phi**-L / (1 + lambda * B'(lambda - lambda*phi)) + 1 / (1 - rho1)``; rho1 < 1 gives the
    limit ``1 / (1 - rho1)``.
    """
    rho1 = scaled_moment(b1, lam, 1)
    if math.isclose(rho1, 1.0, rel_tol=0.0, abs_tol=1e-12):
        return 2.0 * L / scaled_moment(b1, lam, 2)
    if rho1 < 1.0:
        return 1.0 / (1.0 - rho1)
    phi = root_phi(b1, lam)
    slope = 1.0 + lam * lst_derivative(b1, lam - lam * phi)
    return phi ** (-L) / slope + 1.0 / (1.0 - rho1)


def mg1_queue_probabilities(b1: DistributionSpec, lam: float, n: int) -> np.ndarray:
    """Stationary queue-length probabilities 0..n of the plain M/GI/1 queue (rho1 < 1).

    They equal ``(1 - rho1) * (Ev_i - Ev_{i-1})``.
    """
    rho1 = scaled_moment(b1, lam, 1)
    if rho1 >= 1.0:
        raise DomainError(f"M/GI/1 queue is unstable at rho1={rho1!r}", argument=rho1, boundary=1.0)
    table = busy_counts(b1, lam, n)
    return (1.0 - rho1) * table.increments / table.unit


def willmot_tail(b1: DistributionSpec, lam: float, i: int, tau: float | None = None) -> float:
    """Geometric tail ``(1-rho1)(1-tau) / (tau**i (1 + lambda B'(lambda - lambda tau)))``."""
    rho1 = scaled_moment(b1, lam, 1)
    if tau is None:
        tau = root_tau(b1, lam)
    slope = 1.0 + lam * lst_derivative(b1, lam - lam * tau)
    return (1.0 - rho1) * (1.0 - tau) / (tau**i * slope)
