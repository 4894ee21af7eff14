"""
Command-line interface.

Usage:
    damctl <command> [options]

Commands:
    exact      Exact finite-L stationary probabilities and objective
    asympt     Heavy-traffic functionals over a grid of C (plot data)
    solve      Optimal regime for one parameter set
    sweep      Optimal regime over a grid of j2
    simulate   Discrete-event estimate of the time fractions and objective
    validate   Cross-engine consistency checks for a named scenario

Example:
    damctl solve --rho12 1 --rho2 0.5 --j1 1 --j2 1.06 --cost linear:2,1
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .asympt import RegimeParams, balanced_limit, regime_params_from_specs
from .control import (
    DEFAULT_C_MAX,
    DEFAULT_TOL,
    DEFAULT_VALUE_TOL,
    plot_grid,
    solve,
    sweep_j2,
    threshold_j2,
)
from .costs import CostModel, parse_cost
from .dists import parse_spec
from .errors import ConfigError, DamctlError, IoError
from .exact import DamModelParams, objective_exact, renewal_summary, stationary
from .output import Results, emit, solution_document
from .settings import LOG_FORMAT, log_level, validated
from .sim import SimConfig, simulate
from .validation import SCENARIOS, run_scenario

logger = logging.getLogger(__name__)

COMMANDS = ("exact", "asympt", "solve", "sweep", "simulate", "validate")
DEFAULT_FORMAT = {
    "exact": "json",
    "asympt": "csv",
    "solve": "json",
    "sweep": "csv",
    "simulate": "json",
    "validate": "csv",
}
DEFAULT_PLOT_GRID = "0:2:0.1"

# Keys accepted in --config files, in serialization order (identical to the flag names)
CONFIG_KEYS = (
    "lambda",
    "b1",
    "b2",
    "L",
    "j1",
    "j2",
    "cost",
    "rho12",
    "rho2",
    "c-max",
    "tol",
    "value-tol",
    "paper-literal",
    "literal-lower",
    "renormalize",
    "threshold",
    "grid",
    "horizon",
    "warmup",
    "seed",
    "replications",
    "exclusive-count",
    "scenario",
    "format",
    "output",
)


class RunConfig(BaseModel):
    """Merged configuration of one CLI run (config file, then flags)."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    lam: float | None = Field(default=None, alias="lambda")
    b1: str | None = None
    b2: str | None = None
    L: int | None = None
    j1: float | None = None
    j2: str | None = None
    cost: str | None = None
    rho12: float | None = None
    rho2: float | None = None
    c_max: float = Field(default=DEFAULT_C_MAX, gt=0)
    tol: float = Field(default=DEFAULT_TOL, gt=0)
    value_tol: float = Field(default=DEFAULT_VALUE_TOL, ge=0)
    literal_lower: bool = Field(default=False, alias="paper_literal")
    renormalize: bool = False
    threshold: bool = False
    grid: str | None = None
    horizon: float | None = None
    warmup: float = 0.0
    seed: int = 0
    replications: int = 1
    exclusive_count: bool = False
    scenario: str | None = None
    format: Literal["csv", "json"] | None = None
    output: str = "-"

    def require(self, name: str) -> Any:
        value = getattr(self, name)
        if value is None:
            raise ConfigError("required for this command", field=_flag_name(name))
        return value

    def j2_value(self) -> float:
        return _number(self.require("j2"), "j2")

    def cost_model(self) -> CostModel:
        return parse_cost(self.require("cost"))

    def dam_model(self) -> DamModelParams:
        return validated(
            DamModelParams,
            {
                "lambda": self.require("lam"),
                "b1": parse_spec(self.require("b1"), field="b1"),
                "b2": parse_spec(self.require("b2"), field="b2"),
                "L": self.require("L"),
                "j1": self.require("j1"),
                "j2": self.j2_value(),
            },
        )

    def regime_params(self, j2: float | None = None) -> RegimeParams:
        """Regime parameters from --rho12/--rho2, or derived from the B1/B2 specs."""
        if j2 is None:
            j2 = self.j2_value()
        costs = self.cost_model()
        j1 = self.require("j1")
        if self.rho12 is not None and self.rho2 is not None:
            return validated(
                RegimeParams,
                {"j1": j1, "j2": j2, "rho2": self.rho2, "rho12": self.rho12, "costs": costs},
            )
        derived = regime_params_from_specs(
            self.require("lam"),
            parse_spec(self.require("b1"), field="b1"),
            parse_spec(self.require("b2"), field="b2"),
            j1,
            j2,
            costs,
        )
        update = {k: v for k, v in (("rho12", self.rho12), ("rho2", self.rho2)) if v is not None}
        return validated(RegimeParams, derived.model_copy(update=update).model_dump())


def _flag_name(field: str) -> str:
    return "lambda" if field == "lam" else field.replace("_", "-")


def _number(text: str, field: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", field=field) from None


def parse_grid(text: str, field: str = "grid") -> list[float]:
    """``a:b:step`` (inclusive) or a comma-separated list of numbers."""
    if ":" not in text:
        return [_number(part, field) for part in text.split(",")]
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"expected start:stop:step, got {text!r}", field=field)
    start, stop, step = (_number(part, field) for part in parts)
    if step <= 0 or stop < start:
        raise ConfigError(f"empty grid {text!r}", field=field)
    count = int(round((stop - start) / step)) + 1
    return [round(start + k * step, 10) for k in range(count)]


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment.

    Raises:
        ConfigError: On malformed lines or unknown keys, with the line number.
    """
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", line=number)
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown key", field=key, line=number)
        values[key] = value.strip()
    return values


def format_config(values: dict[str, str]) -> str:
    """Serialize config values in canonical key order."""
    return "".join(f"{key}={values[key]}\n" for key in CONFIG_KEYS if key in values)


def load_config(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(path, e.strerror or str(e)) from e
    return parse_config(text)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge the --config file with explicit flags (flags win)."""
    merged: dict[str, Any] = {}
    if args.config:
        merged.update({k.replace("-", "_"): v for k, v in load_config(args.config).items()})
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        merged[key] = value
    return validated(RunConfig, merged)


def _run_exact(cfg: RunConfig) -> Results:
    model = cfg.dam_model()
    costs = cfg.cost_model()
    raw = stationary(model)
    result = raw.renormalized() if cfg.renormalize else raw
    occupancy = raw.occupancy()
    renewal = renewal_summary(model)
    document = {
        "command": "exact",
        "view": "renormalized" if cfg.renormalize else "raw",
        "rho1": result.rho1,
        "rho2": result.rho2,
        "p1": result.p1,
        "p2": result.p2,
        "q": result.q,
        "defect": result.defect,
        "objective": objective_exact(model, costs, result),
        "occupancy": {"p1": occupancy.p1, "p2": occupancy.p2, "q": occupancy.q},
        "renewal": {
            "services_b1": renewal.services_b1,
            "services_b2": renewal.services_b2,
            "services_total": renewal.services_total,
            "busy_period": renewal.busy_period,
            "idle_period": renewal.idle_period,
        },
    }
    if cfg.format == "csv":
        rows = [{"level": "0", "probability": result.p1}]
        rows += [{"level": str(i), "probability": v} for i, v in enumerate(result.q, start=1)]
        rows.append({"level": "above", "probability": result.p2})
        return rows
    return document


def _run_asympt(cfg: RunConfig) -> Results:
    p = cfg.regime_params()
    c_values = parse_grid(cfg.grid or DEFAULT_PLOT_GRID)
    rows = [
        {"C": C, "J_upper": upper, "J_lower": lower}
        for C, upper, lower in plot_grid(p, c_values, literal=cfg.literal_lower)
    ]
    if cfg.format == "json":
        return {"command": "asympt", "balanced_limit": balanced_limit(p), "rows": rows}
    return rows


def _run_solve(cfg: RunConfig) -> dict[str, Any]:
    p = cfg.regime_params()
    solution = solve(p, cfg.c_max, cfg.tol, cfg.value_tol, literal=cfg.literal_lower)
    document = solution_document(solution)
    document["params"] = {"j1": p.j1, "j2": p.j2, "rho2": p.rho2, "rho12": p.rho12}
    if cfg.threshold:
        document["threshold_j2"] = threshold_j2(p, c_max=cfg.c_max, c_tol=cfg.tol)
    return document


def _run_sweep(cfg: RunConfig) -> list[dict[str, Any]]:
    j2_values = parse_grid(cfg.require("j2"), field="j2")
    p = cfg.regime_params(j2=j2_values[0])
    rows = sweep_j2(p, j2_values, cfg.c_max, cfg.tol, cfg.value_tol, literal=cfg.literal_lower)
    return [
        {"j2": row.j2, "regime": str(row.regime), "C": row.C, "objective": row.objective}
        for row in rows
    ]


def _run_simulate(cfg: RunConfig) -> Results:
    sim_cfg = validated(
        SimConfig,
        {
            "model": cfg.dam_model(),
            "costs": cfg.cost_model(),
            "horizon": cfg.require("horizon"),
            "warmup": cfg.warmup,
            "seed": cfg.seed,
            "replications": cfg.replications,
            "exclusive_count": cfg.exclusive_count,
        },
    )
    estimate = simulate(sim_cfg)
    if cfg.format == "csv":
        rows = [{"level": "0", "probability": estimate.p1, "se": estimate.p1_se}]
        rows += [
            {"level": str(i), "probability": v, "se": se}
            for i, (v, se) in enumerate(zip(estimate.q, estimate.q_se, strict=True), start=1)
        ]
        rows.append({"level": "above", "probability": estimate.p2, "se": estimate.p2_se})
        return rows
    return {
        "command": "simulate",
        "replications": estimate.replications,
        "p1": estimate.p1,
        "p1_se": estimate.p1_se,
        "p2": estimate.p2,
        "p2_se": estimate.p2_se,
        "q": estimate.q,
        "q_se": estimate.q_se,
        "objective": estimate.objective,
        "objective_se": estimate.objective_se,
    }


def _dispatch(command: str, cfg: RunConfig) -> tuple[Results, int]:
    """Run one command; returns its results and exit code."""
    if command == "exact":
        return _run_exact(cfg), 0
    elif command == "asympt":
        return _run_asympt(cfg), 0
    elif command == "solve":
        return _run_solve(cfg), 0
    elif command == "sweep":
        return _run_sweep(cfg), 0
    elif command == "simulate":
        return _run_simulate(cfg), 0
    elif command == "validate":
        checks = run_scenario(cfg.require("scenario"))
        failed = [check.name for check in checks if not check.passed]
        if failed:
            logger.warning(f"Failed checks: {', '.join(failed)}")
        return [check._asdict() for check in checks], 3 if failed else 0
    raise ConfigError(f"unknown command {command!r}", field="command")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file with the same keys as the flags")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--output", help="output path, - for stdout")
    common.add_argument("--verbose", "-v", action="store_true", help="log at INFO level")

    model = common.add_argument_group("model")
    model.add_argument("--lambda", type=float, help="arrival rate")
    model.add_argument("--b1", help="service law below the upper threshold, e.g. exp:1.0")
    model.add_argument("--b2", help="service law above the upper threshold, e.g. exp:2.0")
    model.add_argument("--L", type=int, help="number of levels between the thresholds")
    model.add_argument("--j1", type=float, help="lower-crossing penalty coefficient")
    model.add_argument("--j2", help="upper-crossing penalty coefficient (sweep: grid)")
    model.add_argument("--cost", help="constant:C | linear:TOP,BOTTOM | table:FILE[,RULE]")

    regime = common.add_argument_group("heavy traffic")
    regime.add_argument("--rho12", type=float, help="limit of lambda^2 E[X^2] for B1")
    regime.add_argument("--rho2", type=float, help="traffic intensity of B2")
    regime.add_argument("--c-max", type=float, help="right end of the C search")
    regime.add_argument("--tol", type=float, help="argmin resolution")
    regime.add_argument("--value-tol", type=float, help="objective resolution of the regime choice")
    regime.add_argument(
        "--paper-literal",
        "--literal-lower",
        dest="literal_lower",
        action="store_true",
        default=None,
        help="printed lower functional",
    )
    regime.add_argument("--grid", help="C grid a:b:step for plot data")
    regime.add_argument("--threshold", action="store_true", default=None)

    exact = common.add_argument_group("exact")
    exact.add_argument("--renormalize", action="store_true", default=None)

    sim = common.add_argument_group("simulation")
    sim.add_argument("--horizon", type=float)
    sim.add_argument("--warmup", type=float)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--replications", type=int)
    sim.add_argument("--exclusive-count", action="store_true", default=None)

    common.add_argument("--scenario", choices=tuple(SCENARIOS), help="validate scenario")

    parser = argparse.ArgumentParser(
        prog="damctl", description="Optimal output-rate control of a large dam"
    )
    parser.add_argument("--version", action="version", version=f"damctl {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level="INFO" if verbose else log_level(), format=LOG_FORMAT, stream=sys.stderr
    )


def run(argv: list[str]) -> int:
    """Execute one command.

    Args:
        argv: Arguments without the program name.

    Returns:
        0 on success, 2 on configuration or IO errors, 3 on numerical errors or failed
        validation checks.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(bool(args.verbose))

    try:
        cfg = build_run_config(args)
        results, code = _dispatch(args.command, cfg)
        emit(results, cfg.format or DEFAULT_FORMAT[args.command], cfg.output)
        return code
    except DamctlError as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(f"damctl {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        print(f"damctl {args.command}: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))
