"""Tolerance-based comparison of secondary tables against a reference.

Rows are matched by key columns; numeric cells pass when they are within
an absolute OR a relative tolerance of the reference, string cells must be
equal. The relative deviation uses max(|reference|, 1e-12) in the
denominator so references at zero do not divide away. bless() promotes the
current merged table to be the new reference, keeping the old one as a
numbered backup next to a provenance note.
"""

from __future__ import annotations

import json
import math
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from . import project
from .datastore import SecondaryTable, load_secondary_csv, load_study_secondary
from .errors import CompareError
from .paramspace import ID_COLUMN

REL_FLOOR = 1e-12
REFERENCE_FILE = "secondary.csv"


@dataclass(frozen=True)
class ComparisonSpec:
    """What counts as equal.

    key_columns identify rows across the two tables. Tolerances apply to
    numeric columns: a cell passes if its absolute deviation is within
    abs_tol OR its relative deviation is within rel_tol. Per-column
    overrides win over the global values. NaN compares equal to NaN only
    when nan_equal is set.
    """

    key_columns: tuple[str, ...]
    abs_tol: float = 0.0
    rel_tol: float = 0.0
    col_abs: dict[str, float] = field(default_factory=dict)
    col_rel: dict[str, float] = field(default_factory=dict)
    nan_equal: bool = False

    def __post_init__(self) -> None:
        if not self.key_columns:
            raise CompareError("comparison needs at least one key column")
        for tol in (self.abs_tol, self.rel_tol, *self.col_abs.values(), *self.col_rel.values()):
            if not (isinstance(tol, (int, float)) and tol >= 0 and not math.isnan(tol)):
                raise CompareError(f"tolerances must be non-negative numbers, got {tol!r}")

    def tolerances_for(self, column: str) -> tuple[float, float]:
        return (
            self.col_abs.get(column, self.abs_tol),
            self.col_rel.get(column, self.rel_tol),
        )


def default_spec_for(table: SecondaryTable, **kwargs: Any) -> ComparisonSpec:
    """Keys default to the ID plus all metadata columns."""
    return ComparisonSpec(
        key_columns=(ID_COLUMN, *table.metadata_columns), **kwargs
    )


@dataclass
class ColumnResult:
    column: str
    kind: str  # numeric | string
    passed: bool = True
    checked: int = 0
    mismatches: int = 0
    max_abs_dev: float | None = None
    max_rel_dev: float | None = None
    worst_key: tuple[str, ...] | None = None
    nan_failures: int = 0

    def to_payload(self) -> dict[str, Any]:
        return {
            "column": self.column,
            "kind": self.kind,
            "passed": self.passed,
            "checked": self.checked,
            "mismatches": self.mismatches,
            "max_abs_dev": self.max_abs_dev,
            "max_rel_dev": self.max_rel_dev,
            "worst_key": list(self.worst_key) if self.worst_key else None,
            "nan_failures": self.nan_failures,
        }


@dataclass
class ComparisonReport:
    verdict: str  # Pass | Fail
    key_columns: tuple[str, ...]
    columns: list[ColumnResult] = field(default_factory=list)
    missing_rows: list[tuple[str, ...]] = field(default_factory=list)
    extra_rows: list[tuple[str, ...]] = field(default_factory=list)
    missing_columns: list[str] = field(default_factory=list)
    extra_columns: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "Pass"

    def to_payload(self) -> dict[str, Any]:
        return {
            "schema": 1,
            "verdict": self.verdict,
            "key_columns": list(self.key_columns),
            "columns": [c.to_payload() for c in self.columns],
            "missing_rows": [list(k) for k in self.missing_rows],
            "extra_rows": [list(k) for k in self.extra_rows],
            "missing_columns": self.missing_columns,
            "extra_columns": self.extra_columns,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), indent=2) + "\n"

    def summary_lines(self) -> list[str]:
        lines = [f"verdict: {self.verdict}"]
        if self.missing_columns:
            lines.append(f"missing columns: {', '.join(self.missing_columns)}")
        if self.extra_columns:
            lines.append(f"extra columns: {', '.join(self.extra_columns)}")
        if self.missing_rows:
            lines.append(f"missing rows: {len(self.missing_rows)}")
        if self.extra_rows:
            lines.append(f"extra rows: {len(self.extra_rows)}")
        for col in self.columns:
            if col.kind == "numeric" and col.max_abs_dev is not None:
                state = "ok" if col.passed else "FAIL"
                worst = ",".join(col.worst_key) if col.worst_key else "-"
                lines.append(
                    f"{col.column}: {state} max_abs={col.max_abs_dev:.6g} "
                    f"max_rel={col.max_rel_dev:.6g} worst_at={worst}"
                )
            elif not col.passed:
                lines.append(f"{col.column}: FAIL ({col.mismatches} mismatched cells)")
        return lines


def _key_map(
    table: SecondaryTable, keys: tuple[str, ...], label: str
) -> dict[tuple[str, ...], list[str]]:
    indices = []
    for key in keys:
        if key not in table.columns:
            raise CompareError(f"key column {key!r} not present in {label} table")
        indices.append(table.column_index(key))
    out: dict[tuple[str, ...], list[str]] = {}
    for row in table.rows:
        key = tuple(row[i] for i in indices)
        if key in out:
            raise CompareError(
                f"duplicate key in {label} table: {key}; "
                "add more key columns to identify rows uniquely"
            )
        out[key] = row
    return out


def _is_numeric_pair(actual: SecondaryTable, reference: SecondaryTable, column: str) -> bool:
    return (
        actual.column_types.get(column) in ("int", "float")
        and reference.column_types.get(column) in ("int", "float")
    )


def compare_tables(
    actual: SecondaryTable, reference: SecondaryTable, spec: ComparisonSpec
) -> ComparisonReport:
    """Compare two tables cell by cell under the tolerance rule.

    The verdict is Fail on any missing/extra row or column, any string
    mismatch, or any numeric cell outside both tolerances. Duplicate keys
    in either table are an error, not a Fail: the comparison would be
    ill-defined.
    """
    if not actual.rows:
        raise CompareError("actual table has no rows")
    if not reference.rows:
        raise CompareError("reference table has no rows")

    actual_map = _key_map(actual, spec.key_columns, "actual")
    reference_map = _key_map(reference, spec.key_columns, "reference")

    keyset = set(spec.key_columns)
    actual_cols = [c for c in actual.columns if c not in keyset]
    reference_cols = [c for c in reference.columns if c not in keyset]
    shared = [c for c in reference_cols if c in actual_cols]

    report = ComparisonReport(verdict="Pass", key_columns=spec.key_columns)
    report.missing_columns = [c for c in reference_cols if c not in actual_cols]
    report.extra_columns = [c for c in actual_cols if c not in reference_cols]
    report.missing_rows = sorted(k for k in reference_map if k not in actual_map)
    report.extra_rows = sorted(k for k in actual_map if k not in reference_map)

    matched = [k for k in reference_map if k in actual_map]
    for column in shared:
        numeric = _is_numeric_pair(actual, reference, column)
        result = ColumnResult(column=column, kind="numeric" if numeric else "string")
        abs_tol, rel_tol = spec.tolerances_for(column)
        a_idx = actual.column_index(column)
        r_idx = reference.column_index(column)
        for key in matched:
            a_cell = actual_map[key][a_idx]
            r_cell = reference_map[key][r_idx]
            result.checked += 1
            if not numeric:
                if a_cell != r_cell:
                    result.mismatches += 1
                    result.passed = False
                    if result.worst_key is None:
                        result.worst_key = key
                continue
            a_val = float(a_cell)
            r_val = float(r_cell)
            if math.isnan(a_val) or math.isnan(r_val):
                if spec.nan_equal and math.isnan(a_val) and math.isnan(r_val):
                    continue
                result.nan_failures += 1
                result.mismatches += 1
                result.passed = False
                if result.worst_key is None:
                    result.worst_key = key
                continue
            dev = abs(a_val - r_val)
            rel = dev / max(abs(r_val), REL_FLOOR)
            if result.max_abs_dev is None or dev > result.max_abs_dev:
                result.max_abs_dev = dev
                result.worst_key = key
            if result.max_rel_dev is None or rel > result.max_rel_dev:
                result.max_rel_dev = rel
            within = dev <= abs_tol or dev <= rel_tol * max(abs(r_val), REL_FLOOR)
            if not within:
                result.mismatches += 1
                result.passed = False
        report.columns.append(result)

    if (
        report.missing_columns
        or report.extra_columns
        or report.missing_rows
        or report.extra_rows
        or any(not c.passed for c in report.columns)
    ):
        report.verdict = "Fail"
    return report


def compare_study(
    root: Path, study: str, reference_dir: Path, spec: ComparisonSpec | None = None, **kwargs: Any
) -> ComparisonReport:
    """Compare a study's merged table against reference_dir/secondary.csv.

    Writes the machine-readable report to comparison.json at the study
    root so later report generation can show the verdict.
    """
    root = Path(root)
    actual = load_study_secondary(root, study)
    ref_path = Path(reference_dir) / REFERENCE_FILE
    if not ref_path.is_file():
        raise CompareError(f"no reference table at {ref_path}")
    reference = load_secondary_csv(ref_path, actual.metadata_columns)
    if spec is None:
        spec = default_spec_for(actual, **kwargs)
    report = compare_tables(actual, reference, spec)
    out = project.study_dir(root, study) / project.COMPARISON_FILE
    project.atomic_write_bytes(out, report.to_json().encode("utf-8"))
    return report


def _git_commit(cwd: Path) -> str | None:
    try:
        proc = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=cwd,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return None
    if proc.returncode != 0:
        return None
    return proc.stdout.strip() or None


def bless(root: Path, study: str, reference_dir: Path) -> Path:
    """Promote the study's secondary.csv to be the reference table.

    The copy is byte identical. An existing reference rotates to
    secondary.csv.1 (older ones shift up), together with its provenance
    note. The new provenance records when, from which study, and from
    which source commit (when a git checkout is reachable) the blessing
    happened.
    """
    root = Path(root)
    src = project.study_dir(root, study) / project.SECONDARY_FILE
    if not src.is_file():
        raise CompareError(f"study {study} has no secondary.csv to bless; collect first")
    reference_dir = Path(reference_dir)
    reference_dir.mkdir(parents=True, exist_ok=True)
    target = reference_dir / REFERENCE_FILE
    prov = reference_dir / (REFERENCE_FILE + ".provenance.yaml")

    if target.exists():
        backups = []
        for p in reference_dir.glob(REFERENCE_FILE + ".*"):
            tail = p.name[len(REFERENCE_FILE) + 1:]
            if tail.isdigit():
                backups.append(int(tail))
        for n in sorted(backups, reverse=True):
            shutil.move(reference_dir / f"{REFERENCE_FILE}.{n}", reference_dir / f"{REFERENCE_FILE}.{n + 1}")
            old_prov = reference_dir / f"{REFERENCE_FILE}.{n}.provenance.yaml"
            if old_prov.exists():
                shutil.move(old_prov, reference_dir / f"{REFERENCE_FILE}.{n + 1}.provenance.yaml")
        shutil.move(target, reference_dir / (REFERENCE_FILE + ".1"))
        if prov.exists():
            shutil.move(prov, reference_dir / (REFERENCE_FILE + ".1.provenance.yaml"))

    shutil.copyfile(src, target)
    note = {
        "blessed_at": project.now_iso(),
        "study": study,
        "source": str(src),
        "commit": _git_commit(root),
    }
    prov.write_text(yaml.safe_dump(note, sort_keys=False), encoding="utf-8")
    return target
