"""
Next-event simulation of the dam.

Poisson arrivals raise the level by one; the server works one unit at a time and picks its
service law when the service starts: B2 if the level (the unit entering service included)
is above L, B1 otherwise. At level 0 the output is frozen until the next arrival. Time
spent at 0, at each level 1..L and above L is integrated between events.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, model_validator

from .costs import CostModel, levels
from .exact import DamModelParams
from .settings import max_workers, validated

logger = logging.getLogger(__name__)

DRAW_BLOCK = 4096

Sampler = Callable[[np.random.Generator, int], np.ndarray]


class SimConfig(BaseModel):
    """Simulation run: model, costs, time window and random streams."""

    model_config = ConfigDict(frozen=True)

    model: DamModelParams
    costs: CostModel
    horizon: PositiveFloat
    warmup: NonNegativeFloat = 0.0
    seed: int = Field(ge=0, lt=2**64)
    replications: int = Field(default=1, ge=1)
    exclusive_count: bool = False

    @model_validator(mode="after")
    def _check_window(self) -> "SimConfig":
        if not self.horizon > self.warmup:
            raise ValueError(f"horizon ({self.horizon}) must exceed warmup ({self.warmup})")
        return self


@dataclass(frozen=True)
class SimEstimate:
    """Replication means and standard errors of the time fractions and the objective."""

    p1: float
    p1_se: float
    p2: float
    p2_se: float
    q: np.ndarray
    q_se: np.ndarray
    objective: float
    objective_se: float
    replications: int


class _Stream:
    """Buffered draws from one random substream."""

    def __init__(self, draw: Sampler, seed: np.random.SeedSequence):
        self._draw = draw
        self._rng = np.random.Generator(np.random.Philox(seed))
        self._buffer: list[float] = []
        self._next = 0

    def next(self) -> float:
        if self._next == len(self._buffer):
            self._buffer = self._draw(self._rng, DRAW_BLOCK).tolist()
            self._next = 0
        value = self._buffer[self._next]
        self._next += 1
        return value


class RunningAreas:
    """Time integrals of the level indicators over the observation window."""

    def __init__(self, L: int, start: float, end: float):
        self.areas = [0.0] * (L + 2)
        self._top = L + 1
        self._start = start
        self._end = end

    def add(self, level: int, t0: float, t1: float) -> None:
        low = max(t0, self._start)
        high = min(t1, self._end)
        if high > low:
            self.areas[min(level, self._top)] += high - low

    def fractions(self) -> np.ndarray:
        areas = np.asarray(self.areas)
        return areas / areas.sum()


def _replicate(cfg: SimConfig, index: int) -> np.ndarray:
    """Time fractions (level 0, levels 1..L, above L) of one replication."""
    model = cfg.model
    L = model.L
    arrival_seed, normal_seed, excess_seed = np.random.SeedSequence([cfg.seed, index]).spawn(3)
    mean_gap = 1.0 / model.lam
    arrivals = _Stream(lambda rng, n: rng.exponential(mean_gap, n), arrival_seed)
    normal = _Stream(model.b1.sample, normal_seed)
    excess = _Stream(model.b2.sample, excess_seed)
    shift = 1 if cfg.exclusive_count else 0

    def service(level: int) -> float:
        return excess.next() if level - shift > L else normal.next()

    areas = RunningAreas(L, cfg.warmup, cfg.horizon)
    t = 0.0
    level = 0
    next_arrival = arrivals.next()
    completion = math.inf
    while True:
        t_next = min(next_arrival, completion)
        areas.add(level, t, t_next)
        if t_next >= cfg.horizon:
            break
        t = t_next
        if next_arrival <= completion:
            level += 1
            next_arrival = t + arrivals.next()
            if level == 1:
                completion = t + service(level)
        else:
            level -= 1
            completion = t + service(level) if level > 0 else math.inf
    logger.debug(f"Replication {index} finished at level {level}")
    return areas.fractions()


def _standard_error(samples: np.ndarray) -> np.ndarray:
    if samples.shape[0] < 2:
        return np.full(samples.shape[1:], math.nan)
    return samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])


def simulate(cfg: SimConfig | dict) -> SimEstimate:
    """Run the replications of ``cfg`` and average them.

    Args:
        cfg: Simulation configuration, or its raw fields.

    Returns:
        Means and standard errors across replications.

    Raises:
        ConfigError: If raw fields violate the configuration invariants.
    """
    if not isinstance(cfg, SimConfig):
        cfg = validated(SimConfig, cfg)
    model = cfg.model
    logger.info(
        f"Simulating L={model.L} rho1={model.rho1:.6g} rho2={model.rho2:.6g} "
        f"for {cfg.replications} replication(s) of horizon {cfg.horizon:g}"
    )
    workers = min(cfg.replications, max_workers())
    with ThreadPoolExecutor(max_workers=workers) as executor:
        runs = list(executor.map(lambda i: _replicate(cfg, i), range(cfg.replications)))
    fractions = np.vstack(runs)

    cost_levels = levels(cfg.costs, model.L)
    objectives = (
        fractions[:, 0] * model.penalty_lower
        + fractions[:, -1] * model.penalty_upper
        + fractions[:, 1:-1] @ cost_levels
    )
    mean = fractions.mean(axis=0)
    se = _standard_error(fractions)
    return SimEstimate(
        p1=float(mean[0]),
        p1_se=float(se[0]),
        p2=float(mean[-1]),
        p2_se=float(se[-1]),
        q=mean[1:-1],
        q_se=se[1:-1],
        objective=float(objectives.mean()),
        objective_se=float(_standard_error(objectives[:, None])[0]),
        replications=cfg.replications,
    )
