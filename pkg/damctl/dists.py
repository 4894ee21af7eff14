"""
Service-time distribution families.

Each family exposes closed-form moments, its Laplace-Stieltjes transform B(s), the
distribution of the number of Poisson(lambda) arrivals during one service (the
mixed-Poisson weights r_j), and the characteristic roots phi < 1 < tau of
``z = B(lambda - lambda * z)``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator
from scipy import optimize, special, stats

from .errors import ConfigError, ConvergenceError, DomainError, ExistenceError, RegimeError
from .settings import validated

logger = logging.getLogger(__name__)

PHI_BRACKET = (1e-9, 1.0 - 1e-9)
TAU_LOWER = 1.0 + 1e-9
# Entire transforms have no pole to stay away from
TAU_UPPER_ENTIRE = 64.0
ROOT_MAX_ITER = 200
ROOT_XTOL = 1e-15
ROOT_RESIDUAL = 1e-12
WEIGHT_SUM_TOL = 1e-12


class _ServiceLaw(BaseModel):
    """Common interface of the parametric service-time families."""

    model_config = ConfigDict(frozen=True)

    def mean(self) -> float:
        return self.moment(1)

    def moment(self, order: int) -> float:
        raise NotImplementedError

    def transform(self, s: float) -> float:
        raise NotImplementedError

    def transform_derivative(self, s: float) -> float:
        raise NotImplementedError

    def abscissa(self) -> float:
        """Largest ``a`` such that the transform diverges at ``s = -a`` (inf when entire)."""
        return math.inf

    def arrival_counts(self, lam: float) -> list[tuple[float, stats.rv_discrete]]:
        """Mixture components (weight, frozen scipy law) of the arrivals-per-service count."""
        raise NotImplementedError

    def tau_upper(self, lam: float) -> float:
        """Right end of the tau search bracket, keeping ``lambda - lambda*z`` in the domain."""
        if math.isinf(self.abscissa()):
            return TAU_UPPER_ENTIRE
        return 1.0 + 0.999 * self.abscissa() / lam

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, factor: float) -> "DistributionSpec":
        """Same shape with every duration multiplied by ``factor``."""
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError


class Exponential(_ServiceLaw):
    family: Literal["exp"] = "exp"
    rate: PositiveFloat

    def moment(self, order: int) -> float:
        return math.factorial(order) / self.rate**order

    def transform(self, s: float) -> float:
        return self.rate / (self.rate + s)

    def transform_derivative(self, s: float) -> float:
        return -self.rate / (self.rate + s) ** 2

    def abscissa(self) -> float:
        return self.rate

    def arrival_counts(self, lam: float) -> list[tuple[float, stats.rv_discrete]]:
        # Geometric on {0, 1, ...}
        return [(1.0, stats.nbinom(1, self.rate / (self.rate + lam)))]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size)

    def scaled(self, factor: float) -> "DistributionSpec":
        return Exponential(rate=self.rate / factor)

    def to_text(self) -> str:
        return f"exp:{self.rate!r}"


class Erlang(_ServiceLaw):
    family: Literal["erlang"] = "erlang"
    shape: PositiveInt
    rate: PositiveFloat

    def moment(self, order: int) -> float:
        return float(special.poch(self.shape, order)) / self.rate**order

    def transform(self, s: float) -> float:
        return (self.rate / (self.rate + s)) ** self.shape

    def transform_derivative(self, s: float) -> float:
        return -self.shape * self.rate**self.shape / (self.rate + s) ** (self.shape + 1)

    def abscissa(self) -> float:
        return self.rate

    def arrival_counts(self, lam: float) -> list[tuple[float, stats.rv_discrete]]:
        return [(1.0, stats.nbinom(self.shape, self.rate / (self.rate + lam)))]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def scaled(self, factor: float) -> "DistributionSpec":
        return Erlang(shape=self.shape, rate=self.rate / factor)

    def to_text(self) -> str:
        return f"erlang:{self.shape},{self.rate!r}"


class HyperExponential(_ServiceLaw):
    family: Literal["hyperexp"] = "hyperexp"
    weights: tuple[PositiveFloat, ...]
    rates: tuple[PositiveFloat, ...]

    @model_validator(mode="after")
    def _check_mixture(self) -> "HyperExponential":
        if not self.weights:
            raise ValueError("hyperexp needs at least one phase")
        if len(self.weights) != len(self.rates):
            raise ValueError(
                f"weights and rates differ in length ({len(self.weights)} != {len(self.rates)})"
            )
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {math.fsum(self.weights)!r}")
        return self

    def moment(self, order: int) -> float:
        return math.fsum(
            w * math.factorial(order) / mu**order
            for w, mu in zip(self.weights, self.rates, strict=True)
        )

    def transform(self, s: float) -> float:
        return math.fsum(w * mu / (mu + s) for w, mu in zip(self.weights, self.rates, strict=True))

    def transform_derivative(self, s: float) -> float:
        return -math.fsum(
            w * mu / (mu + s) ** 2 for w, mu in zip(self.weights, self.rates, strict=True)
        )

    def abscissa(self) -> float:
        return min(self.rates)

    def arrival_counts(self, lam: float) -> list[tuple[float, stats.rv_discrete]]:
        return [
            (w, stats.nbinom(1, mu / (mu + lam)))
            for w, mu in zip(self.weights, self.rates, strict=True)
        ]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        phase = rng.choice(len(self.rates), size=size, p=np.asarray(self.weights))
        return rng.exponential(1.0, size) / np.asarray(self.rates)[phase]

    def scaled(self, factor: float) -> "DistributionSpec":
        return HyperExponential(
            weights=self.weights, rates=tuple(mu / factor for mu in self.rates)
        )

    def to_text(self) -> str:
        weights = "|".join(repr(w) for w in self.weights)
        rates = "|".join(repr(mu) for mu in self.rates)
        return f"hyperexp:{weights};{rates}"


class Deterministic(_ServiceLaw):
    family: Literal["det"] = "det"
    value: PositiveFloat

    def moment(self, order: int) -> float:
        return self.value**order

    def transform(self, s: float) -> float:
        return math.exp(-s * self.value)

    def transform_derivative(self, s: float) -> float:
        return -self.value * math.exp(-s * self.value)

    def arrival_counts(self, lam: float) -> list[tuple[float, stats.rv_discrete]]:
        return [(1.0, stats.poisson(lam * self.value))]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.value)

    def scaled(self, factor: float) -> "DistributionSpec":
        return Deterministic(value=self.value * factor)

    def to_text(self) -> str:
        return f"det:{self.value!r}"


DistributionSpec = Annotated[
    Exponential | Erlang | HyperExponential | Deterministic, Field(discriminator="family")
]


@dataclass(frozen=True)
class MixedPoissonWeights:
    """Law of the number N of Poisson arrivals during one service, truncated at n_max.

    Attributes:
        lam: Arrival rate.
        weights: r_0..r_n, ``r_j = P(N = j)``.
        tails: ``P(N > j)`` for j = 0..n, evaluated in closed form.
        tail_mass: ``P(N > n)``, the mass beyond the window.
    """

    lam: float
    weights: np.ndarray
    tails: np.ndarray
    tail_mass: float

    def __post_init__(self) -> None:
        if self.weights[0] + self.weights[1] >= 1.0:
            raise DomainError(
                f"r_0 + r_1 = {self.weights[0] + self.weights[1]!r} violates r_0 + r_1 < 1"
            )
        total = math.fsum(self.weights) + self.tail_mass
        if abs(total - 1.0) > 1e-10:
            raise ConvergenceError(f"weights and tail mass sum to {total!r}, expected 1")

    @property
    def gamma1(self) -> float:
        """First factorial moment sum n r_n over the window (equals rho when tail_mass ~ 0)."""
        j = np.arange(self.weights.size)
        return float(np.dot(j, self.weights))

    @property
    def gamma2(self) -> float:
        """Second factorial moment sum n(n-1) r_n over the window."""
        j = np.arange(self.weights.size)
        return float(np.dot(j * (j - 1), self.weights))


def _check_domain(spec: _ServiceLaw, s: float) -> None:
    if s <= -spec.abscissa():
        raise DomainError(
            f"transform of {spec.to_text()} diverges at s={s!r}",
            argument=s,
            boundary=-spec.abscissa(),
        )


def lst(spec: DistributionSpec, s: float) -> float:
    """Laplace-Stieltjes transform ``B(s) = E[exp(-s X)]``.

    Args:
        spec: Service-time law.
        s: Transform argument, strictly right of the abscissa of convergence.

    Returns:
        The transform value, positive and equal to 1 at s = 0.

    Raises:
        DomainError: If ``s`` is at or beyond the divergence boundary.
    """
    _check_domain(spec, s)
    return spec.transform(s)


def lst_derivative(spec: DistributionSpec, s: float) -> float:
    """Derivative ``B'(s) = -E[X exp(-s X)]``; ``B'(0) = -mean``.

    Raises:
        DomainError: If ``s`` is at or beyond the divergence boundary.
    """
    _check_domain(spec, s)
    return spec.transform_derivative(s)


def scaled_moment(spec: DistributionSpec, lam: float, order: int) -> float:
    """``lambda**order * E[X**order]``; order 1 is the traffic intensity."""
    if order not in (1, 2, 3):
        raise DomainError(f"scaled moment order must be 1, 2 or 3, got {order}", argument=order)
    return lam**order * spec.moment(order)


def poisson_weights(spec: DistributionSpec, lam: float, n_max: int) -> MixedPoissonWeights:
    """Probabilities r_0..r_{n_max} of j arrivals during one service, plus the tail mass.

    Args:
        spec: Service-time law.
        lam: Poisson arrival rate.
        n_max: Last index of the window (at least 1).

    Returns:
        The weights with their closed-form tails.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be at least 1, got {n_max}", argument=n_max)
    j = np.arange(n_max + 1)
    weights = np.zeros(n_max + 1)
    tails = np.zeros(n_max + 1)
    for share, law in spec.arrival_counts(lam):
        weights += share * law.pmf(j)
        tails += share * law.sf(j)
    tail_mass = float(tails[-1])
    if tail_mass > 1e-12:
        logger.debug(f"Mixed-Poisson window 0..{n_max} leaves tail mass {tail_mass:.3e}")
    return MixedPoissonWeights(lam=lam, weights=weights, tails=tails, tail_mass=tail_mass)


def _refine_root(spec: DistributionSpec, lam: float, low: float, high: float) -> float:
    def gap(z: float) -> float:
        return spec.transform(lam - lam * z) - z

    try:
        root = optimize.bisect(gap, low, high, xtol=ROOT_XTOL, maxiter=ROOT_MAX_ITER)
    except (RuntimeError, ValueError) as e:
        raise ConvergenceError(f"bisection failed: {e}", bracket=(low, high)) from e
    residual = abs(gap(root))
    if residual >= ROOT_RESIDUAL:
        raise ConvergenceError(f"root residual {residual:.3e} above tolerance", bracket=(low, high))
    logger.debug(f"Root of z = B(lambda - lambda z) for {spec.to_text()}: {root!r}")
    return float(root)


def root_phi(spec: DistributionSpec, lam: float) -> float:
    """Root phi in (0, 1) of ``z = B(lambda - lambda z)`` for a supercritical law.

    Raises:
        RegimeError: If rho <= 1.
        ConvergenceError: If the bracket shows no sign change.
    """
    rho = scaled_moment(spec, lam, 1)
    if rho <= 1.0:
        raise RegimeError("phi exists only for rho > 1", rho=rho)
    low, high = PHI_BRACKET
    gap_low = spec.transform(lam - lam * low) - low
    gap_high = spec.transform(lam - lam * high) - high
    if gap_low * gap_high > 0:
        raise ConvergenceError("no sign change for phi", bracket=(low, high))
    return _refine_root(spec, lam, low, high)


def root_tau(spec: DistributionSpec, lam: float) -> float:
    """Root tau > 1 of ``z = B(lambda - lambda z)`` for a subcritical law.

    Raises:
        RegimeError: If rho >= 1.
        ExistenceError: If no root lies inside the admissible bracket.
    """
    rho = scaled_moment(spec, lam, 1)
    if rho >= 1.0:
        raise RegimeError("tau exists only for rho < 1", rho=rho)
    low, high = TAU_LOWER, spec.tau_upper(lam)
    if spec.transform(lam - lam * high) - high <= 0:
        raise ExistenceError(f"no root tau > 1 for {spec.to_text()}", bracket=(low, high))
    return _refine_root(spec, lam, low, high)


def scale_to_load(spec: DistributionSpec, lam: float, rho: float) -> DistributionSpec:
    """Rescale the time axis of ``spec`` so that ``lambda * mean = rho``."""
    if rho <= 0:
        raise DomainError(f"target load must be positive, got {rho!r}", argument=rho)
    return spec.scaled(rho / (lam * spec.mean()))


def sample(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` service times."""
    return spec.sample(rng, size)


def format_spec(spec: DistributionSpec) -> str:
    """Config-text form, e.g. ``erlang:3,2.0``."""
    return spec.to_text()


def _floats(text: str, field: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise ConfigError(f"expected numbers, got {text!r}", field=field) from None


def parse_spec(text: str, field: str = "distribution") -> DistributionSpec:
    """Parse ``family:param[,param...]`` into a DistributionSpec.

    Supported forms: ``exp:RATE``, ``erlang:SHAPE,RATE``, ``hyperexp:W1|W2;R1|R2``,
    ``det:VALUE``.

    Raises:
        ConfigError: On unknown families, malformed numbers or invalid parameters.
    """
    family, sep, params = text.strip().partition(":")
    if not sep or not params:
        raise ConfigError(f"expected family:params, got {text!r}", field=field)
    family = family.strip().lower()

    if family == "exp":
        (rate,) = _expect(_floats(params, field), 1, field)
        data: dict[str, object] = {"family": "exp", "rate": rate}
    elif family == "erlang":
        shape, rate = _expect(_floats(params, field), 2, field)
        if shape != int(shape):
            raise ConfigError(f"erlang shape must be an integer, got {shape!r}", field=field)
        data = {"family": "erlang", "shape": int(shape), "rate": rate}
    elif family == "hyperexp":
        weights, semi, rates = params.partition(";")
        if not semi:
            raise ConfigError(f"expected hyperexp:W1|W2;R1|R2, got {text!r}", field=field)
        data = {
            "family": "hyperexp",
            "weights": tuple(_floats(weights.replace("|", ","), field)),
            "rates": tuple(_floats(rates.replace("|", ","), field)),
        }
    elif family == "det":
        (value,) = _expect(_floats(params, field), 1, field)
        data = {"family": "det", "value": value}
    else:
        raise ConfigError(f"unknown distribution family {family!r}", field=field)

    return validated(_SpecEnvelope, {"spec": data}).spec


def _expect(values: list[float], count: int, field: str) -> list[float]:
    if len(values) != count:
        raise ConfigError(f"expected {count} parameter(s), got {len(values)}", field=field)
    return values


class _SpecEnvelope(BaseModel):
    spec: DistributionSpec
