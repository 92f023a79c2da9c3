from __future__ import annotations

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from squeezedbath.io import ScanResult, data_section, format_cell, from_csv, from_json, parse_cell, to_csv, to_json, write_output


def _sample() -> ScanResult:
    return ScanResult(
        columns=["gamma", "M", "value", "phase"],
        rows=[[0.5, -1.2, 0.1 + 0.2, "Unbroken"], [0.5, 1.0 / 3.0, 1e-300, "Broken"]],
        sections={"contours": (["gamma", "M", "status"], [[0.5, 0.123456789012345678, "ok"]])},
        metadata={"version": "0.1.0", "config": {"b": 1, "a": [1, 2]}},
    )


def test_csv_roundtrip_is_exact():
    res = _sample()
    back = from_csv(to_csv(res))
    assert back.columns == res.columns
    assert back.rows == res.rows
    assert back.sections == res.sections
    assert back.metadata == res.metadata


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_float_cells_roundtrip_bitwise(values):
    res = ScanResult(columns=["x"], rows=[[v] for v in values])
    back = from_csv(to_csv(res))
    assert [math.copysign(1, r[0]) for r in back.rows] == [math.copysign(1, v) for v in values]
    assert [r[0] for r in back.rows] == values


def test_integers_and_bools():
    assert format_cell(True) == "1"
    assert format_cell(7) == "7"
    assert parse_cell("7") == 7 and isinstance(parse_cell("7"), int)
    assert parse_cell("7.0") == 7.0 and isinstance(parse_cell("7.0"), float)
    assert parse_cell("ok") == "ok"


def test_empty_rows_write_header_and_metadata():
    text = to_csv(ScanResult(columns=["a", "b"], rows=[], metadata={"failures": 0}))
    assert text == "# failures: 0\na,b\n"


def test_metadata_is_sorted_and_section_marker_is_kept():
    text = to_csv(_sample())
    lines = text.splitlines()
    assert lines[0].startswith("# config: ") and lines[1].startswith("# version: ")
    assert "# [section] contours" in lines
    data = data_section(text)
    assert "version" not in data and "# [section] contours\n" in data


def test_row_width_is_checked():
    with pytest.raises(ValueError, match="header has 2"):
        ScanResult(columns=["a", "b"], rows=[[1]])


def test_json_nan_becomes_null_and_back():
    res = ScanResult(columns=["a"], rows=[[math.nan], [1.5]], metadata={"k": 1})
    text = to_json(res)
    assert json.loads(text)["rows"] == [[None], [1.5]]
    back = from_json(text)
    assert math.isnan(back.rows[0][0]) and back.rows[1][0] == 1.5
    assert back.metadata == {"k": 1}


def test_json_roundtrip_sections():
    back = from_json(to_json(_sample()))
    assert back.sections["contours"][1] == _sample().sections["contours"][1]


def test_write_output(tmp_path):
    path = tmp_path / "out.csv"
    text = write_output(_sample(), path)
    assert path.read_text() == text
    with pytest.raises(ValueError, match="format"):
        write_output(_sample(), None, "xml")


def test_write_failure_names_path(tmp_path):
    target = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="missing"):
        write_output(_sample(), target)


def test_section_and_column_accessors():
    res = _sample()
    assert res.column("phase") == ["Unbroken", "Broken"]
    assert res.column("status", section="contours") == ["ok"]
    assert res.section("contours").columns == ["gamma", "M", "status"]
    assert res.ok
