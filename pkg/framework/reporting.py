"""
Report model and output formats (JSON, CSV, text)
"""

import dataclasses
import io
import json
import math
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, Field
from rich.console import Console
from rich.table import Table

from .errors import UsageError

VERSION = "0.1.0"
FORMATS = ("json", "csv", "text")


class Provenance(BaseModel):
    """Where a report came from"""
    inputs: Dict[str, Any] = Field(default_factory=dict, description="Command inputs as given")
    version: str = Field(default=VERSION, description="Engine version")
    seed: Optional[int] = Field(default=None, description="Seed used by randomised steps")


class Report(BaseModel):
    """Result of one CLI command"""
    command: str = Field(description="Subcommand path, e.g. 'comg prob'")
    result: Any = Field(description="Command-specific result, already JSON-safe")
    provenance: Provenance = Field(default_factory=Provenance)


def to_jsonable(value: Any) -> Any:
    """Exact JSON rendering: Fractions as 'p/q' strings, infinities as 'inf'/'-inf'"""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump())
    if isinstance(value, dict):
        return {_key(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted((to_jsonable(v) for v in value), key=str)
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return str(value)


def _key(key: Any) -> str:
    if isinstance(key, tuple):
        return "|".join(str(to_jsonable(k)) for k in key)
    return str(to_jsonable(key))


def build_report(command: str, result: Any, inputs: Optional[Dict[str, Any]] = None,
                 seed: Optional[int] = None) -> Report:
    return Report(
        command=command,
        result=to_jsonable(result),
        provenance=Provenance(inputs=to_jsonable(inputs or {}), seed=seed),
    )


def render_json(report: Report) -> str:
    return json.dumps(report.model_dump(), sort_keys=True, indent=2) + "\n"


def report_rows(report: Report) -> List[Dict[str, Any]]:
    """Tabular view: result['rows'] when present, else one row of the flat result"""
    result = report.result
    if isinstance(result, dict) and isinstance(result.get("rows"), list):
        return result["rows"]
    if isinstance(result, list):
        return [r if isinstance(r, dict) else {"value": r} for r in result]
    if isinstance(result, dict):
        return [{k: (json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v)
                 for k, v in result.items()}]
    return [{"value": result}]


def render_csv(report: Report) -> str:
    """Column order follows result['columns'] when the result declares one"""
    rows = report_rows(report)
    columns = report.result.get("columns") if isinstance(report.result, dict) else None
    frame = pd.DataFrame(rows, columns=columns) if columns else pd.DataFrame(rows)
    return frame.to_csv(index=False, lineterminator="\n")


def render_text(report: Report) -> str:
    rows = report_rows(report)
    table = Table(title=report.command)
    columns: List[str] = []
    for row in rows:
        columns.extend(c for c in row if c not in columns)
    for column in columns:
        table.add_column(str(column))
    for row in rows:
        table.add_row(*(str(row.get(c, "")) for c in columns))
    buffer = io.StringIO()
    Console(file=buffer, width=160, color_system=None).print(table)
    return buffer.getvalue()


def render(report: Report, fmt: str = "json") -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "csv":
        return render_csv(report)
    if fmt == "text":
        return render_text(report)
    raise UsageError(f"Unknown output format {fmt!r}; expected one of {', '.join(FORMATS)}")
