"""
CSV / JSON emission of command results.

CSV uses '.' decimals, 10 significant digits, LF line endings and the key order of the
first row. JSON is a single document carrying ``schema_version``.
"""

import io
import json
import logging
import sys
from typing import Any

import numpy as np
import pandas as pd

from .control import ControlSolution, ScalarMinimum
from .errors import ConfigError, IoError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Results = list[dict[str, Any]] | dict[str, Any]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.floating | np.integer):
        return _jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def render(results: Results, fmt: str) -> str:
    """Text of ``results`` in ``fmt`` (``csv`` or ``json``)."""
    if fmt == "json":
        body = {"rows": results} if isinstance(results, list) else dict(results)
        document = {"schema_version": SCHEMA_VERSION, **body}
        return json.dumps(_jsonable(document), indent=2, ensure_ascii=False) + "\n"
    if isinstance(results, dict):
        rows = results.get("rows")
        if rows is None:
            # documents flatten to one row of their scalar fields
            nested = dict | list | np.ndarray
            rows = [{k: v for k, v in results.items() if not isinstance(v, nested)}]
        results = rows
    buffer = io.StringIO()
    pd.DataFrame(results).to_csv(buffer, index=False, float_format="%.10g", lineterminator="\n")
    return buffer.getvalue()


def emit(results: Results, fmt: str, path: str = "-") -> None:
    """Write results as CSV (rows) or as a single JSON document.

    Args:
        results: Table rows with a stable key order, or a document.
        fmt: ``csv`` or ``json``.
        path: Output file, ``-`` for stdout.

    Raises:
        IoError: If the file cannot be written.
    """
    text = render(results, fmt)
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise IoError(path, e.strerror or str(e)) from e
    logger.info(f"Wrote {fmt} output to {path}")


def read_document(text: str) -> dict[str, Any]:
    """Parse a JSON document written by :func:`emit`.

    Raises:
        ConfigError: If the text is not a document of the supported schema.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    if not isinstance(document, dict) or document.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("missing or unsupported schema_version", field="schema_version")
    return document


def _minimum(m: ScalarMinimum) -> dict[str, float]:
    return {"C": m.C, "value": m.value, "slope": m.slope}


def solution_document(solution: ControlSolution) -> dict[str, Any]:
    """Document of a solve result."""
    return {
        "command": "solve",
        "regime": str(solution.regime),
        "C": solution.C,
        "objective": solution.objective,
        "balanced_value": solution.balanced_value,
        "upper_min": _minimum(solution.upper_min),
        "lower_min": _minimum(solution.lower_min),
    }
