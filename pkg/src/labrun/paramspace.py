"""Parameter-study expansion.

A study config declares varied parameters (name to list of values) plus
constants, and expands into a flat list of cases. Each case gets a
zero-padded decimal ID assigned in a deterministic order, so the same config
always produces the same case set. The variation table records the full
mapping and can be exported to CSV, JSON, or YAML and parsed back.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, ExpansionError, LabrunError
from .values import Scalar, check_finite, coerce_token, is_scalar, serialize_scalar

DEFAULT_MAX_CASES = 100_000
ID_COLUMN = "ID"
MODES = ("cartesian", "zip")
VARIATION_FORMATS = ("csv", "json", "yaml")

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

_KNOWN_KEYS = {
    "name",
    "mode",
    "varied",
    "constants",
    "command",
    "template_dir",
    "outputs",
    "primary_globs",
}


class CaseStatus(str, Enum):
    """Lifecycle of a single case."""

    PENDING = "Pending"
    RUNNING = "Running"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"
    CANCELLED = "Cancelled"


TERMINAL_STATUSES = (CaseStatus.SUCCEEDED, CaseStatus.FAILED, CaseStatus.CANCELLED)


@dataclass(frozen=True)
class StudyConfig:
    """Validated study declaration.

    varied preserves declaration order; in cartesian mode the last declared
    parameter varies fastest. constants are merged into every case.
    """

    name: str
    command: str
    varied: dict[str, list[Scalar]] = field(default_factory=dict)
    constants: dict[str, Scalar] = field(default_factory=dict)
    mode: str = "cartesian"
    template_dir: str | None = None
    outputs: tuple[str, ...] = ()
    primary_globs: tuple[str, ...] = ()

    @property
    def parameter_names(self) -> list[str]:
        return list(self.varied) + list(self.constants)

    def case_count(self) -> int:
        if self.mode == "zip":
            return max((len(v) for v in self.varied.values()), default=1)
        count = 1
        for vals in self.varied.values():
            count *= len(vals)
        return count

    def to_mapping(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "mode": self.mode,
            "varied": {k: list(v) for k, v in self.varied.items()},
            "constants": dict(self.constants),
            "command": self.command,
        }
        if self.template_dir is not None:
            data["template_dir"] = self.template_dir
        if self.outputs:
            data["outputs"] = list(self.outputs)
        if self.primary_globs:
            data["primary_globs"] = list(self.primary_globs)
        return data

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_mapping(), sort_keys=False)


@dataclass
class CaseRecord:
    """One expanded case: its ID, full parameter set, and runtime state."""

    id: str
    params: dict[str, Scalar]
    status: CaseStatus = CaseStatus.PENDING
    dir: Path | None = None


def _require_str(value: Any, what: str) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{what} must be a non-empty string, got {value!r}")
    return value


def _check_param_name(name: Any) -> str:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise ConfigError(
            f"invalid parameter name {name!r}: use letters, digits, and underscores,"
            " starting with a letter or underscore"
        )
    if name == ID_COLUMN:
        raise ConfigError(f"parameter name {ID_COLUMN} is reserved for the case ID column")
    return name


def _check_value(value: Any, where: str) -> Scalar:
    if not is_scalar(value):
        raise ConfigError(
            f"unsupported value in {where}: {value!r} (allowed: bool, int, float, string)"
        )
    try:
        check_finite(value, where)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return value


def _str_list(value: Any, what: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise ConfigError(f"{what} must be a list of strings, got {value!r}")
    return tuple(value)


def parse_study_config(text: str, source: str = "<string>") -> StudyConfig:
    """Parse and validate a YAML study config.

    Raises ConfigError with a position for YAML syntax errors and with a
    named field for semantic ones (missing command, duplicate parameter,
    empty value list, zip-mode length mismatch, unknown keys).
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            where = f"{source}:{mark.line + 1}:{mark.column + 1}"
        else:
            where = source
        raise ConfigError(f"YAML syntax error at {where}: {exc}") from None

    if not isinstance(raw, dict):
        raise ConfigError(f"study config must be a mapping, got {type(raw).__name__}")

    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(map(str, unknown)))}")
    if "name" not in raw:
        raise ConfigError("missing required key: name")
    if "command" not in raw:
        raise ConfigError("missing required key: command")

    name = _require_str(raw["name"], "name")
    if "/" in name or name in (".", ".."):
        raise ConfigError(f"study name must be a plain directory name, got {name!r}")
    command = _require_str(raw["command"], "command")

    mode = raw.get("mode", "cartesian")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")

    varied_raw = raw.get("varied") or {}
    if not isinstance(varied_raw, dict):
        raise ConfigError("varied must be a mapping of parameter name to value list")
    varied: dict[str, list[Scalar]] = {}
    for key, vals in varied_raw.items():
        pname = _check_param_name(key)
        if not isinstance(vals, list):
            raise ConfigError(f"varied parameter {pname} must map to a list of values")
        if not vals:
            raise ConfigError(f"empty value list for varied parameter {pname}")
        varied[pname] = [_check_value(v, f"varied parameter {pname}") for v in vals]

    constants_raw = raw.get("constants") or {}
    if not isinstance(constants_raw, dict):
        raise ConfigError("constants must be a mapping of parameter name to value")
    constants: dict[str, Scalar] = {}
    for key, val in constants_raw.items():
        pname = _check_param_name(key)
        if pname in varied:
            raise ConfigError(f"duplicate parameter name: {pname} (in varied and constants)")
        constants[pname] = _check_value(val, f"constant {pname}")

    if mode == "zip" and varied:
        lengths = {k: len(v) for k, v in varied.items()}
        if len(set(lengths.values())) > 1:
            detail = ", ".join(f"{k}={n}" for k, n in lengths.items())
            raise ConfigError(f"zip-mode length mismatch: {detail}")

    template_dir = raw.get("template_dir")
    if template_dir is not None:
        template_dir = _require_str(template_dir, "template_dir")

    outputs = _str_list(raw.get("outputs", []), "outputs")
    primary_globs = _str_list(raw.get("primary_globs", []), "primary_globs")

    return StudyConfig(
        name=name,
        command=command,
        varied=varied,
        constants=constants,
        mode=mode,
        template_dir=template_dir,
        outputs=outputs,
        primary_globs=primary_globs,
    )


def load_study_config(path: Path) -> StudyConfig:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read study config {path}: {exc}") from None
    return parse_study_config(text, source=str(path))


def id_width(count: int) -> int:
    """Width of zero-padded case IDs: at least 4 digits, more for large studies."""
    return max(4, len(str(max(count - 1, 0))))


def expand(config: StudyConfig, max_cases: int = DEFAULT_MAX_CASES) -> list[CaseRecord]:
    """Expand a config into its full case list.

    Cartesian mode walks the product of the varied value lists with the last
    declared parameter varying fastest; zip mode pairs the lists elementwise.
    IDs are assigned in that order starting at zero. Refuses to expand past
    max_cases.
    """
    count = config.case_count()
    if count > max_cases:
        raise ExpansionError(
            f"study {config.name} expands to {count} cases, above the cap of {max_cases};"
            " raise --max-cases explicitly if this is intended"
        )

    names = list(config.varied)
    if config.mode == "zip":
        combos = list(zip(*config.varied.values())) if names else [()]
    else:
        combos = list(itertools.product(*config.varied.values()))

    width = id_width(count)
    cases = []
    for index, combo in enumerate(combos):
        params: dict[str, Scalar] = dict(zip(names, combo))
        params.update(config.constants)
        cases.append(CaseRecord(id=format(index, f"0{width}d"), params=params))
    return cases


def _columns_for(cases: list[CaseRecord]) -> list[str]:
    if not cases:
        raise LabrunError("cannot build a variation table for an empty case list")
    return [ID_COLUMN, *cases[0].params.keys()]


def export_variation_table(cases: list[CaseRecord], fmt: str) -> bytes:
    """Serialize the ID-to-parameters mapping in the requested format."""
    columns = _columns_for(cases)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for case in cases:
            writer.writerow([case.id] + [serialize_scalar(v) for v in case.params.values()])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        records = [{ID_COLUMN: c.id, **c.params} for c in cases]
        return (json.dumps(records, indent=2) + "\n").encode("utf-8")
    if fmt == "yaml":
        records = [{ID_COLUMN: c.id, **c.params} for c in cases]
        return yaml.safe_dump(records, sort_keys=False).encode("utf-8")
    raise LabrunError(f"unknown variation table format: {fmt!r} (expected csv, json, or yaml)")


def parse_variation_table(data: bytes, fmt: str) -> list[CaseRecord]:
    """Read a variation table back into case records.

    CSV cells are coerced by literal shape (bool, int, float, else string);
    the ID column always stays text so zero padding survives.
    """
    if fmt == "csv":
        text = data.decode("utf-8")
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise LabrunError("variation table CSV is empty")
        header = rows[0]
        if not header or header[0] != ID_COLUMN:
            raise LabrunError(f"variation table CSV must start with an {ID_COLUMN} column")
        cases = []
        for row in rows[1:]:
            if len(row) != len(header):
                raise LabrunError(f"variation table row has {len(row)} cells, expected {len(header)}")
            params = {name: coerce_token(cell) for name, cell in zip(header[1:], row[1:])}
            cases.append(CaseRecord(id=row[0], params=params))
        return cases
    if fmt in ("json", "yaml"):
        if fmt == "json":
            records = json.loads(data.decode("utf-8"))
        else:
            records = yaml.safe_load(data.decode("utf-8"))
        if not isinstance(records, list):
            raise LabrunError("variation table must be a list of records")
        cases = []
        for rec in records:
            if not isinstance(rec, dict) or ID_COLUMN not in rec:
                raise LabrunError(f"variation record missing {ID_COLUMN}: {rec!r}")
            params = {k: v for k, v in rec.items() if k != ID_COLUMN}
            cases.append(CaseRecord(id=str(rec[ID_COLUMN]), params=params))
        return cases
    raise LabrunError(f"unknown variation table format: {fmt!r} (expected csv, json, or yaml)")


def variation_filename(fmt: str) -> str:
    return f"variation.{fmt}"
