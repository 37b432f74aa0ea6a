from __future__ import annotations

from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from labrun import runner
from labrun.compare import (
    ComparisonSpec,
    bless,
    compare_study,
    compare_tables,
    default_spec_for,
)
from labrun.datastore import SecondaryTable, merge_study_table
from labrun.errors import CompareError

from conftest import make_config


def _table(rows: list[list[str]], result_cols=("V",), types=None) -> SecondaryTable:
    table = SecondaryTable(
        metadata_columns=["K"],
        result_columns=list(result_cols),
        rows=rows,
    )
    table.column_types = types or {"ID": "str", "K": "int", "V": "float"}
    return table


def _pair(actual_v: str, ref_v: str):
    actual = _table([["0000", "1", actual_v]])
    ref = _table([["0000", "1", ref_v]])
    return actual, ref


KEYS = ComparisonSpec(key_columns=("ID", "K"))


def test_identical_tables_pass_at_zero_tolerance():
    table = _table([["0000", "1", "3.14"], ["0000", "2", "2.72"]])
    report = compare_tables(table, table, KEYS)
    assert report.verdict == "Pass"
    col = report.columns[0]
    assert col.max_abs_dev == 0.0
    assert col.max_rel_dev == 0.0


def test_absolute_tolerance_boundary_is_inclusive():
    actual, ref = _pair("1.0625", "1.0")  # deviation exactly 2**-4
    assert compare_tables(actual, ref, ComparisonSpec(("ID", "K"), abs_tol=0.0625)).passed
    assert not compare_tables(actual, ref, ComparisonSpec(("ID", "K"), abs_tol=0.0624)).passed


def test_relative_tolerance_uses_reference_magnitude():
    actual, ref = _pair("101.0", "100.0")
    assert compare_tables(actual, ref, ComparisonSpec(("ID", "K"), rel_tol=0.01)).passed
    assert not compare_tables(actual, ref, ComparisonSpec(("ID", "K"), rel_tol=0.005)).passed


def test_tolerances_combine_as_or():
    actual, ref = _pair("101.0", "100.0")  # abs dev 1.0, rel dev 0.01
    spec = ComparisonSpec(("ID", "K"), abs_tol=1e-6, rel_tol=0.02)
    assert compare_tables(actual, ref, spec).passed
    spec = ComparisonSpec(("ID", "K"), abs_tol=2.0, rel_tol=1e-9)
    assert compare_tables(actual, ref, spec).passed
    spec = ComparisonSpec(("ID", "K"), abs_tol=1e-6, rel_tol=1e-9)
    assert not compare_tables(actual, ref, spec).passed


def test_zero_reference_handled_by_floor():
    actual, ref = _pair("1e-13", "0.0")
    # relative deviation is 1e-13 / 1e-12 = 0.1, not a division blowup
    assert compare_tables(actual, ref, ComparisonSpec(("ID", "K"), rel_tol=0.1)).passed
    assert not compare_tables(actual, ref, ComparisonSpec(("ID", "K"), rel_tol=0.09)).passed


def test_nan_fails_by_default_passes_with_flag():
    actual, ref = _pair("nan", "nan")
    assert not compare_tables(actual, ref, KEYS).passed
    spec = ComparisonSpec(("ID", "K"), nan_equal=True)
    assert compare_tables(actual, ref, spec).passed
    # NaN against a number never passes
    actual, ref = _pair("nan", "1.0")
    assert not compare_tables(actual, ref, spec).passed


def test_missing_and_extra_rows_fail_with_keys_listed():
    actual = _table([["0000", "1", "1.0"], ["0000", "3", "3.0"]])
    ref = _table([["0000", "1", "1.0"], ["0000", "2", "2.0"]])
    report = compare_tables(actual, ref, KEYS)
    assert report.verdict == "Fail"
    assert report.missing_rows == [("0000", "2")]
    assert report.extra_rows == [("0000", "3")]


def test_missing_and_extra_columns_fail():
    actual = SecondaryTable(
        metadata_columns=["K"], result_columns=["V", "W"],
        rows=[["0000", "1", "1.0", "9"]],
        column_types={"ID": "str", "K": "int", "V": "float", "W": "int"},
    )
    ref = SecondaryTable(
        metadata_columns=["K"], result_columns=["V", "U"],
        rows=[["0000", "1", "1.0", "4"]],
        column_types={"ID": "str", "K": "int", "V": "float", "U": "int"},
    )
    report = compare_tables(actual, ref, KEYS)
    assert report.verdict == "Fail"
    assert report.missing_columns == ["U"]
    assert report.extra_columns == ["W"]


def test_duplicate_keys_are_an_error_not_a_verdict():
    dup = _table([["0000", "1", "1.0"], ["0000", "1", "2.0"]])
    ref = _table([["0000", "1", "1.0"]])
    with pytest.raises(CompareError, match="duplicate key in actual table"):
        compare_tables(dup, ref, KEYS)
    with pytest.raises(CompareError, match="duplicate key in reference table"):
        compare_tables(ref, dup, KEYS)


def test_string_cells_must_match_exactly():
    types = {"ID": "str", "K": "int", "V": "str"}
    actual = _table([["0000", "1", "alpha"]], types=types)
    ref = _table([["0000", "1", "beta"]], types=types)
    spec = ComparisonSpec(("ID", "K"), abs_tol=1e9)  # tolerances are numeric-only
    report = compare_tables(actual, ref, spec)
    assert report.verdict == "Fail"
    assert report.columns[0].kind == "string"


def test_per_column_tolerance_overrides_global():
    actual = SecondaryTable(
        metadata_columns=["K"], result_columns=["A", "B"],
        rows=[["0000", "1", "1.05", "1.05"]],
        column_types={"ID": "str", "K": "int", "A": "float", "B": "float"},
    )
    ref = SecondaryTable(
        metadata_columns=["K"], result_columns=["A", "B"],
        rows=[["0000", "1", "1.0", "1.0"]],
        column_types={"ID": "str", "K": "int", "A": "float", "B": "float"},
    )
    spec = ComparisonSpec(("ID", "K"), abs_tol=1e-6, col_abs={"A": 0.1})
    report = compare_tables(actual, ref, spec)
    assert report.verdict == "Fail"
    by_name = {c.column: c for c in report.columns}
    assert by_name["A"].passed
    assert not by_name["B"].passed


def test_default_keys_are_id_plus_metadata():
    table = _table([["0000", "1", "1.0"]])
    spec = default_spec_for(table)
    assert spec.key_columns == ("ID", "K")


def test_negative_tolerance_rejected():
    with pytest.raises(CompareError, match="non-negative"):
        ComparisonSpec(("ID",), abs_tol=-1.0)


def test_empty_table_rejected():
    table = _table([["0000", "1", "1.0"]])
    empty = _table([])
    with pytest.raises(CompareError, match="no rows"):
        compare_tables(empty, table, KEYS)


# ---------------------------------------------------- monotonicity property

@st.composite
def _comparison_case(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    ref_vals = draw(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=n, max_size=n,
        )
    )
    deltas = draw(
        st.lists(
            st.floats(min_value=-10.0, max_value=10.0, allow_nan=False),
            min_size=n, max_size=n,
        )
    )
    ref = _table([["0000", str(i), repr(v)] for i, v in enumerate(ref_vals)])
    actual = _table(
        [["0000", str(i), repr(v + d)] for i, (v, d) in enumerate(zip(ref_vals, deltas))]
    )
    small_abs = draw(st.floats(min_value=0, max_value=5.0, allow_nan=False))
    small_rel = draw(st.floats(min_value=0, max_value=0.5, allow_nan=False))
    grow_abs = draw(st.floats(min_value=0, max_value=5.0, allow_nan=False))
    grow_rel = draw(st.floats(min_value=0, max_value=0.5, allow_nan=False))
    return actual, ref, small_abs, small_rel, grow_abs, grow_rel


@settings(max_examples=150, deadline=None)
@given(_comparison_case())
def test_widening_tolerances_never_flips_pass_to_fail(case):
    actual, ref, abs_tol, rel_tol, grow_abs, grow_rel = case
    tight = compare_tables(actual, ref, ComparisonSpec(("ID", "K"), abs_tol=abs_tol, rel_tol=rel_tol))
    wide = compare_tables(
        actual,
        ref,
        ComparisonSpec(("ID", "K"), abs_tol=abs_tol + grow_abs, rel_tol=rel_tol + grow_rel),
    )
    if tight.passed:
        assert wide.passed


@settings(max_examples=100, deadline=None)
@given(_comparison_case())
def test_self_comparison_passes_at_zero_tolerance(case):
    _, ref, *_ = case
    assert compare_tables(ref, ref, ComparisonSpec(("ID", "K"))).passed


# ------------------------------------------------------------------- bless

def _collected_study(root, tmp_path):
    config = make_config(
        """
        name: blessed
        varied:
          N: [0, 1]
        command: 'printf "V\\n{{N}}\\n" > out.csv'
        outputs: [out.csv]
        """
    )
    runner.materialize(config, root, source_dir=tmp_path)
    runner.run(root, "blessed")
    merge_study_table(root, "blessed")


def test_bless_copies_bytes_and_writes_provenance(root, tmp_path):
    _collected_study(root, tmp_path)
    ref_dir = tmp_path / "ref"
    target = bless(root, "blessed", ref_dir)
    assert target.read_bytes() == (root / "blessed" / "secondary.csv").read_bytes()
    note = yaml.safe_load((ref_dir / "secondary.csv.provenance.yaml").read_text())
    assert note["study"] == "blessed"
    assert "blessed_at" in note


def test_bless_rotates_previous_reference(root, tmp_path):
    _collected_study(root, tmp_path)
    ref_dir = tmp_path / "ref"
    bless(root, "blessed", ref_dir)
    first = (ref_dir / "secondary.csv").read_bytes()
    # change the data, bless again
    (root / "blessed" / "secondary.csv").write_bytes(b"ID,N,V\n0000,0,42\n")
    bless(root, "blessed", ref_dir)
    assert (ref_dir / "secondary.csv.1").read_bytes() == first
    assert (ref_dir / "secondary.csv").read_bytes() == b"ID,N,V\n0000,0,42\n"
    # and once more: .1 shifts to .2
    (root / "blessed" / "secondary.csv").write_bytes(b"ID,N,V\n0000,0,43\n")
    bless(root, "blessed", ref_dir)
    assert (ref_dir / "secondary.csv.2").read_bytes() == first


def test_bless_requires_collected_table(root, tmp_path):
    config = make_config("name: empty\ncommand: 'true'\n")
    runner.materialize(config, root, source_dir=tmp_path)
    with pytest.raises(CompareError, match="no secondary.csv"):
        bless(root, "empty", tmp_path / "ref")


def test_compare_study_writes_comparison_json(root, tmp_path):
    _collected_study(root, tmp_path)
    ref_dir = tmp_path / "ref"
    bless(root, "blessed", ref_dir)
    report = compare_study(root, "blessed", ref_dir)
    assert report.passed
    assert (root / "blessed" / "comparison.json").exists()
