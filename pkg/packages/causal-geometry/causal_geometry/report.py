"""Run reports: per-point records, residual summaries and their JSON/CSV forms."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .logger import logger

#: Exit statuses of a run.
STATUS_PASS = 0
STATUS_FAIL = 1
STATUS_CONFIG_ERROR = 2
STATUS_RUNTIME_ERROR = 3


def plain(value: Any) -> Any:
    """Convert numpy scalars and arrays to JSON-ready Python values.

    Non-finite floats become None.
    """
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class CheckSummary:
    """Aggregate of one residual over all records."""

    name: str
    tolerance: float
    values: list[float] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def maximum(self) -> float:
        return max(self.values, default=0.0)

    @property
    def p95(self) -> float:
        if not self.values:
            return 0.0
        return float(np.percentile(self.values, 95))

    @property
    def passed(self) -> bool:
        return all(math.isfinite(v) and v <= self.tolerance for v in self.values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "count": self.count,
            "max": self.maximum,
            "p95": self.p95,
            "tolerance": self.tolerance,
            "verdict": "pass" if self.passed else "fail",
        }


class RunReport:
    """Records of one run in input order, with check summaries and timing."""

    def __init__(self, operation: str, geometry: str, config: Optional[dict[str, Any]] = None):
        self.operation = operation
        self.geometry = geometry
        self.config = config or {}
        self.records: list[dict[str, Any]] = []
        self.errors: list[dict[str, Any]] = []
        self.timing: dict[str, float] = {}
        self._checks: dict[str, CheckSummary] = {}

    def observe(self, name: str, value: Optional[float], tolerance: float) -> None:
        """Add one residual value; None means not applicable and is skipped."""
        if value is None:
            return
        summary = self._checks.setdefault(name, CheckSummary(name, tolerance))
        summary.values.append(float(value))

    def add(
        self,
        record: dict[str, Any],
        checks: dict[str, tuple[Optional[float], float]],
    ) -> None:
        """Append a record with its ``{check: (value, tolerance)}`` residuals."""
        record = dict(record)
        record["checks"] = {name: value for name, (value, _) in checks.items()}
        self.records.append(record)
        for name, (value, tolerance) in checks.items():
            self.observe(name, value, tolerance)

    def add_error(self, index: int, point: Any, error: dict[str, str]) -> None:
        """Record a point whose evaluation raised; ``error`` has type and message."""
        self.errors.append({"index": index, "point": point, **error})

    @property
    def summaries(self) -> list[CheckSummary]:
        return list(self._checks.values())

    def summary(self, name: str) -> CheckSummary:
        return self._checks[name]

    @property
    def passed(self) -> bool:
        return all(summary.passed for summary in self.summaries)

    @property
    def status(self) -> int:
        if self.errors:
            return STATUS_RUNTIME_ERROR
        return STATUS_PASS if self.passed else STATUS_FAIL

    def to_dict(self) -> dict[str, Any]:
        return plain(
            {
                "operation": self.operation,
                "geometry": self.geometry,
                "status": self.status,
                "config": self.config,
                "records": self.records,
                "summaries": [summary.to_dict() for summary in self.summaries],
                "errors": self.errors,
                "timing": self.timing,
            }
        )

    def to_json(self) -> str:
        # json writes floats with repr, which round-trips exactly
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> list[dict[str, Any]]:
        """Flat rows for CSV: trajectory rows when records carry them."""
        rows: list[dict[str, Any]] = []
        for index, record in enumerate(self.records):
            if "rows" in record:
                rows.extend({"record": index, **row} for row in record["rows"])
            else:
                rows.append({"record": index, **flatten(record)})
        return rows

    def to_csv(self) -> str:
        rows = self.table()
        columns: dict[str, None] = {}
        for row in rows:
            columns.update(dict.fromkeys(row))
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(csv_cell(row.get(column)) for column in columns)
        return buffer.getvalue()

    def render(self, format: str = "json") -> str:
        return self.to_csv() if format == "csv" else self.to_json() + "\n"

    def write(self, path: Optional[Union[str, Path]] = None, format: str = "json") -> None:
        """Write the report to ``path``, or to stdout when it is None."""
        text = self.render(format)
        if path is None:
            sys.stdout.write(text)
            return
        Path(path).write_text(text)
        logger.info(f"Wrote {format} report for {self.operation} to {path}")


def flatten(record: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    """``{"x": [1, 2], "checks": {"vg": 0.1}}`` -> ``{"x1": 1, "x2": 2, "checks.vg": 0.1}``."""
    flat: dict[str, Any] = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple, np.ndarray)):
            items = np.asarray(value, dtype=object)
            for index in np.ndindex(items.shape):
                flat[name + "_".join(str(j + 1) for j in index)] = items[index]
        else:
            flat[name] = value
    return flat


def csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


__all__ = [
    "STATUS_PASS",
    "STATUS_FAIL",
    "STATUS_CONFIG_ERROR",
    "STATUS_RUNTIME_ERROR",
    "plain",
    "CheckSummary",
    "RunReport",
    "flatten",
    "csv_cell",
]
