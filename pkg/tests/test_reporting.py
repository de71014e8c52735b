"""
Tests for report rendering
"""

import json
import math
from fractions import Fraction

import pytest

from framework.errors import UsageError
from framework.reporting import build_report, render, to_jsonable


def test_exact_values_render_as_strings():
    assert to_jsonable(Fraction(17, 20)) == "17/20"
    assert to_jsonable(Fraction(3)) == "3"
    assert to_jsonable(math.inf) == "inf"
    assert to_jsonable({("root", "A"): (1, Fraction(1, 2))}) == {"root|A": [1, "1/2"]}
    assert to_jsonable({"b", "a"}) == ["a", "b"]


def test_json_is_deterministic():
    result = {"p": Fraction(1, 2), "z": 1, "a": [Fraction(1, 3)]}
    first = render(build_report("comg prob", result, {"T": 2}, seed=5), "json")
    second = render(build_report("comg prob", dict(reversed(list(result.items()))), {"T": 2}, seed=5), "json")
    assert first == second
    document = json.loads(first)
    assert document["result"]["p"] == "1/2"
    assert document["provenance"]["seed"] == 5
    assert document["provenance"]["inputs"] == {"T": 2}


def test_csv_uses_declared_columns():
    result = {"columns": ["T", "p"], "rows": [{"p": Fraction(1, 2), "T": 1}]}
    assert render(build_report("comg sweep", result), "csv") == "T,p\n1,1/2\n"


def test_empty_sweep_csv_keeps_header():
    result = {"columns": ["T", "p_analytic"], "rows": []}
    assert render(build_report("comg sweep", result), "csv") == "T,p_analytic\n"


def test_flat_result_is_one_row():
    csv = render(build_report("crab safety", {"safe": True, "r_m": 2}), "csv")
    assert csv.splitlines() == ["safe,r_m", "True,2"]


def test_text_table_lists_columns():
    text = render(build_report("mev solve", {"rows": [{"share_set": "mH", "user_utility": 1}]}), "text")
    assert "share_set" in text and "mev solve" in text


def test_unknown_format():
    with pytest.raises(UsageError):
        render(build_report("comg prob", {}), "xml")
