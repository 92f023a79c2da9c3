"""
Tabular scan results and their CSV/JSON serialization.

CSV layout::

    # key: <JSON value>            metadata, one line per key, sorted
    col_a,col_b,...                main header
    ...rows...
    # [section] contours           optional named sections
    col_x,col_y,...
    ...rows...

Floats are written in their shortest round-trip form (always with a decimal
point or exponent), so parsing a file back reproduces every value bit for bit
and integers stay distinguishable from floats.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

Row = list[Any]

SECTION_PREFIX = "# [section] "
_INT_RE = re.compile(r"^[+-]?\d+$")


@dataclass
class ScanResult:
    columns: list[str]
    rows: list[Row]
    sections: dict[str, tuple[list[str], list[Row]]] = field(default_factory=dict)
    failures: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row has {len(r)} cells, header has {len(self.columns)}")
        for name, (cols, rows) in self.sections.items():
            for r in rows:
                if len(r) != len(cols):
                    raise ValueError(f"section {name!r}: row has {len(r)} cells, header has {len(cols)}")

    def column(self, name: str, section: str | None = None) -> list[Any]:
        cols, rows = (self.columns, self.rows) if section is None else self.sections[section]
        k = cols.index(name)
        return [r[k] for r in rows]

    def section(self, name: str) -> "ScanResult":
        cols, rows = self.sections[name]
        return ScanResult(columns=list(cols), rows=rows)

    @property
    def ok(self) -> bool:
        return self.failures == 0


def format_cell(x: Any) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def parse_cell(token: str) -> Any:
    if _INT_RE.match(token):
        return int(token)
    try:
        return float(token)
    except ValueError:
        return token


def _write_table(writer, cols: Sequence[str], rows: Iterable[Row]) -> None:
    writer.writerow(list(cols))
    for r in rows:
        writer.writerow([format_cell(x) for x in r])


def to_csv(result: ScanResult) -> str:
    buf = io.StringIO()
    for key in sorted(result.metadata):
        buf.write(f"# {key}: {json.dumps(result.metadata[key], sort_keys=True, allow_nan=False, default=str)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    _write_table(writer, result.columns, result.rows)
    for name, (cols, rows) in result.sections.items():
        buf.write(f"{SECTION_PREFIX}{name}\n")
        _write_table(writer, cols, rows)
    return buf.getvalue()


def from_csv(text: str) -> ScanResult:
    metadata: dict[str, Any] = {}
    tables: list[tuple[str | None, list[str] | None, list[Row]]] = [(None, None, [])]
    for line in text.split("\n"):
        if not line:
            continue
        if line.startswith(SECTION_PREFIX):
            tables.append((line[len(SECTION_PREFIX):], None, []))
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            metadata[key] = json.loads(value)
            continue
        cells = next(csv.reader([line]))
        name, cols, rows = tables[-1]
        if cols is None:
            tables[-1] = (name, cells, rows)
        else:
            rows.append([parse_cell(c) for c in cells])
    _, cols, rows = tables[0]
    sections = {name: (c or [], r) for name, c, r in tables[1:]}
    return ScanResult(columns=cols or [], rows=rows, sections=sections, metadata=metadata)


def data_section(text: str) -> str:
    """The CSV text with metadata lines removed; section markers are kept."""
    return "".join(
        line + "\n" for line in text.split("\n") if line and (not line.startswith("#") or line.startswith(SECTION_PREFIX))
    )


def _json_cell(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def to_json(result: ScanResult) -> str:
    doc = {
        "metadata": result.metadata,
        "columns": result.columns,
        "rows": [[_json_cell(x) for x in r] for r in result.rows],
        "sections": {
            name: {"columns": cols, "rows": [[_json_cell(x) for x in r] for r in rows]}
            for name, (cols, rows) in result.sections.items()
        },
    }
    return json.dumps(doc, sort_keys=False, allow_nan=False, default=str) + "\n"


def from_json(text: str) -> ScanResult:
    doc = json.loads(text)
    nan = math.nan
    rows = [[nan if x is None else x for x in r] for r in doc["rows"]]
    sections = {
        name: (s["columns"], [[nan if x is None else x for x in r] for r in s["rows"]])
        for name, s in doc.get("sections", {}).items()
    }
    return ScanResult(columns=doc["columns"], rows=rows, sections=sections, metadata=doc.get("metadata", {}))


def write_output(result: ScanResult, path: "str | Path | None", fmt: str = "csv") -> str:
    """Serialize ``result``; write it to ``path`` unless ``path`` is None. Returns the text."""
    if fmt == "csv":
        text = to_csv(result)
    elif fmt == "json":
        text = to_json(result)
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    if path is not None:
        p = Path(path)
        try:
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write output to {p}: {exc.strerror}") from exc
    return text
