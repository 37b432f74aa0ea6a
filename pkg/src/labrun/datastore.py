"""Collection of per-case secondary data into one study table.

Cases write small CSV files (declared by the study's outputs globs); this
module reads them, prepends the case ID and the case's parameter values as
metadata columns, and concatenates everything into secondary.csv at the
study root. Cell values are kept as the exact text the case wrote, so
merging is reproducible byte for byte; a per-column type (int, float, or
string) is inferred for filtering and comparisons.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field
from pathlib import Path

from . import project
from .errors import DataError
from .paramspace import CaseRecord, CaseStatus, ID_COLUMN, StudyConfig
from .values import (
    Scalar,
    infer_column_type,
    looks_numeric,
    parse_as,
    serialize_scalar,
    widen_column_type,
)


@dataclass
class SecondaryTable:
    """Tabular secondary data with a metadata/result column partition.

    columns is ID, then the metadata (parameter) columns, then the result
    columns read from case output. rows hold cell text verbatim;
    column_types maps every column to int, float, or str.
    """

    metadata_columns: list[str]
    result_columns: list[str]
    rows: list[list[str]] = field(default_factory=list)
    column_types: dict[str, str] = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return [ID_COLUMN, *self.metadata_columns, *self.result_columns]

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise DataError(f"no column named {name!r} in table") from None

    def cell(self, row: list[str], name: str) -> str:
        return row[self.column_index(name)]

    def typed_cell(self, row: list[str], name: str) -> Scalar:
        return parse_as(self.column_types.get(name, "str"), self.cell(row, name))

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue().encode("ascii")


def _infer_types(columns: list[str], rows: list[list[str]]) -> dict[str, str]:
    types = {}
    for i, name in enumerate(columns):
        types[name] = infer_column_type([row[i] for row in rows])
    # Case IDs are zero padded and must stay text.
    types[ID_COLUMN] = "str"
    return types


def _read_csv_file(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError:
        raise DataError(f"secondary data must be ASCII CSV: {path}") from None
    except OSError as exc:
        raise DataError(f"cannot read secondary data {path}: {exc}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0]:
        raise DataError(f"secondary CSV has no header row: {path}")
    header, body = rows[0], rows[1:]
    if len(set(header)) != len(header):
        raise DataError(f"duplicate column name in {path}")
    for n, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(
                f"{path}:{n}: row has {len(row)} cells, header has {len(header)}"
            )
    return header, body


def _match_outputs(case_dir: Path, outputs: tuple[str, ...]) -> list[Path]:
    matched: list[Path] = []
    seen = set()
    for pattern in outputs:
        for path in sorted(case_dir.glob(pattern)):
            if path.is_file() and path not in seen:
                seen.add(path)
                matched.append(path)
    return matched


def read_case_secondary(case: CaseRecord, outputs: tuple[str, ...]) -> SecondaryTable:
    """Read one case's secondary CSV files into a table with metadata columns.

    All files matched by the outputs globs must share one header. Result
    column names must not collide with parameter names or the ID column.
    Column types come from the first file; later files may not put
    non-numeric text into a column already inferred numeric.
    """
    if case.dir is None:
        raise DataError(f"case {case.id} has no directory")
    files = _match_outputs(case.dir, outputs)
    if not files:
        raise DataError(
            f"case {case.id} ({case.status.value}) has no secondary data matching "
            f"{list(outputs)} in {case.dir}"
        )

    header: list[str] | None = None
    types: dict[str, str] = {}
    body: list[list[str]] = []
    for path in files:
        file_header, file_rows = _read_csv_file(path)
        if header is None:
            header = file_header
            for i, name in enumerate(header):
                types[name] = infer_column_type([row[i] for row in file_rows])
        elif file_header != header:
            raise DataError(
                f"secondary files of case {case.id} disagree on columns: "
                f"{header} vs {file_header} in {path.name}"
            )
        else:
            for i, name in enumerate(header):
                file_type = infer_column_type([row[i] for row in file_rows])
                widened = widen_column_type(types[name], file_type)
                if widened is None:
                    raise DataError(
                        f"{path}: column {name} was inferred {types[name]} but holds"
                        f" incompatible values"
                    )
                types[name] = widened
        body.extend(file_rows)

    assert header is not None
    reserved = {ID_COLUMN, *case.params.keys()}
    clash = [name for name in header if name in reserved]
    if clash:
        raise DataError(
            f"result column name collides with metadata in case {case.id}: "
            f"{', '.join(clash)}"
        )

    meta_names = list(case.params.keys())
    meta_cells = [serialize_scalar(v) for v in case.params.values()]
    table = SecondaryTable(metadata_columns=meta_names, result_columns=list(header))
    for row in body:
        table.rows.append([case.id, *meta_cells, *row])
    for name, value in case.params.items():
        table.column_types[name] = infer_column_type([serialize_scalar(value)])
    table.column_types.update(types)
    table.column_types[ID_COLUMN] = "str"
    return table


def merge_study_table(root: Path, study: str) -> SecondaryTable:
    """Concatenate secondary data of every Succeeded case into secondary.csv.

    Rows are ordered by case ID, then file order within the case, so the
    merge is deterministic and re-running it reproduces the same bytes.
    Cases that Failed or were Cancelled are skipped (their files stay on
    disk untouched); at least one Succeeded case with data is required.
    Refuses to run while the study lock is active.
    """
    root = Path(root)
    config = project.load_config(root, study)
    if project.lock_is_active(root, study):
        raise DataError(f"study {study} is currently running; collect after it finishes")
    if not config.outputs:
        raise DataError(f"study {study} declares no outputs globs")
    cases = project.load_cases(root, study)
    succeeded = [c for c in cases if c.status is CaseStatus.SUCCEEDED]
    if not succeeded:
        raise DataError(f"study {study} has no Succeeded cases to collect from")

    merged: SecondaryTable | None = None
    for case in sorted(succeeded, key=lambda c: c.id):
        table = read_case_secondary(case, config.outputs)
        if merged is None:
            merged = table
            continue
        if table.metadata_columns != merged.metadata_columns:
            raise DataError(
                f"case {case.id} has different parameters than earlier cases"
            )
        if table.result_columns != merged.result_columns:
            raise DataError(
                "result-schema mismatch across cases: "
                f"{merged.result_columns} vs {table.result_columns} in case {case.id}"
            )
        for name in merged.result_columns:
            widened = widen_column_type(merged.column_types[name], table.column_types[name])
            if widened is None:
                raise DataError(
                    f"case {case.id}: column {name} was inferred "
                    f"{merged.column_types[name]} in earlier cases but holds incompatible values"
                )
            merged.column_types[name] = widened
        merged.rows.extend(table.rows)

    assert merged is not None
    # Metadata types must reflect every case's values, not just the first.
    merged.column_types = _infer_types(merged.columns, merged.rows)
    out = project.study_dir(root, study) / project.SECONDARY_FILE
    project.atomic_write_bytes(out, merged.to_csv_bytes())
    return merged


def load_secondary_csv(path: Path, metadata_columns: list[str]) -> SecondaryTable:
    """Read a merged secondary.csv back, given the study's parameter names."""
    header, body = _read_csv_file(Path(path))
    if not header or header[0] != ID_COLUMN:
        raise DataError(f"{path}: first column must be {ID_COLUMN}")
    missing = [c for c in metadata_columns if c not in header]
    if missing:
        raise DataError(f"{path}: missing metadata columns: {', '.join(missing)}")
    result = [c for c in header[1:] if c not in metadata_columns]
    table = SecondaryTable(
        metadata_columns=[c for c in header[1:] if c in metadata_columns],
        result_columns=result,
        rows=body,
    )
    if table.columns != header:
        raise DataError(
            f"{path}: columns must be ordered ID, metadata, results; got {header}"
        )
    table.column_types = _infer_types(header, body)
    return table


def load_study_secondary(root: Path, study: str) -> SecondaryTable:
    root = Path(root)
    config = project.load_config(root, study)
    path = project.study_dir(root, study) / project.SECONDARY_FILE
    if not path.is_file():
        raise DataError(f"study {study} has no secondary.csv; run collect first")
    return load_secondary_csv(path, config.parameter_names)


def filter_table(table: SecondaryTable, conditions: dict[str, str]) -> SecondaryTable:
    """Rows whose cells equal the given values, compared by column type.

    Numeric columns compare numerically (so 0.001 matches 1e-3), string
    columns compare text exactly. Unknown column names are an error.
    """
    indices: dict[int, tuple[str, str]] = {}
    for name, wanted in conditions.items():
        idx = table.column_index(name)
        indices[idx] = (table.column_types.get(name, "str"), wanted)

    def matches(row: list[str]) -> bool:
        for idx, (ctype, wanted) in indices.items():
            cell = row[idx]
            if ctype in ("int", "float"):
                if not looks_numeric(wanted):
                    return False
                if float(cell) != float(wanted):
                    return False
            elif cell != wanted:
                return False
        return True

    out = SecondaryTable(
        metadata_columns=list(table.metadata_columns),
        result_columns=list(table.result_columns),
        rows=[row for row in table.rows if matches(row)],
        column_types=dict(table.column_types),
    )
    return out
