"""On-disk layout of a project root and the study state files.

A project root holds one directory per study:

    <root>/<study>/
        study.yaml        validated copy of the config
        variation.csv     ID-to-parameters table (also .json and .yaml)
        status.json       per-case statuses, counts, latest event seq
        events.jsonl      append-only event log
        control/          cancel request drop box
        .lock             held by the active run coordinator
        <case id>/        one directory per case

status.json is rewritten atomically on every transition; events.jsonl is
append-only with a strictly monotonically increasing, gapless seq starting
at 1. Exactly one process writes either file at a time, enforced by .lock.
"""

from __future__ import annotations

import json
import os
import socket
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from .errors import LabrunError, StudyLockedError, UnknownCaseError, UnknownStudyError
from .paramspace import (
    CaseRecord,
    CaseStatus,
    StudyConfig,
    load_study_config,
    parse_variation_table,
)

STUDY_FILE = "study.yaml"
STATUS_FILE = "status.json"
EVENTS_FILE = "events.jsonl"
LOCK_FILE = ".lock"
CONTROL_DIR = "control"
SECONDARY_FILE = "secondary.csv"
DESCRIPTION_FILE = "description.md"
COMPARISON_FILE = "comparison.json"
REPORT_FILE = "report.html"
SUMMARY_FILE = "summary.json"

EVENT_KINDS = (
    "StudyStarted",
    "CaseStarted",
    "CaseFinished",
    "CaseCancelled",
    "StudyFinished",
)


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def study_dir(root: Path, study: str) -> Path:
    return Path(root) / study


def case_dir(root: Path, study: str, case_id: str) -> Path:
    return study_dir(root, study) / case_id


def require_study(root: Path, study: str) -> Path:
    sdir = study_dir(root, study)
    if not (sdir / STUDY_FILE).is_file():
        raise UnknownStudyError(f"no study named {study!r} under {root}")
    return sdir


def list_studies(root: Path) -> list[str]:
    root = Path(root)
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if (p / STUDY_FILE).is_file())


def load_config(root: Path, study: str) -> StudyConfig:
    return load_study_config(require_study(root, study) / STUDY_FILE)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_json(path: Path, payload: dict[str, Any]) -> None:
    atomic_write_bytes(path, (json.dumps(payload, indent=2) + "\n").encode("utf-8"))


@dataclass
class StudyStatus:
    """Mirror of status.json."""

    study: str
    total: int
    cases: dict[str, CaseStatus]
    latest_seq: int
    started_at: str | None = None
    finished_at: str | None = None
    updated_at: str | None = None

    @property
    def counts(self) -> dict[str, int]:
        counts = {status.value: 0 for status in CaseStatus}
        for status in self.cases.values():
            counts[status.value] += 1
        return counts

    def all_terminal(self) -> bool:
        return all(
            s not in (CaseStatus.PENDING, CaseStatus.RUNNING) for s in self.cases.values()
        )

    def to_payload(self) -> dict[str, Any]:
        return {
            "schema": 1,
            "study": self.study,
            "total": self.total,
            "counts": self.counts,
            "cases": {cid: {"status": st.value} for cid, st in self.cases.items()},
            "latest_seq": self.latest_seq,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "updated_at": self.updated_at,
        }


def write_status(root: Path, study: str, status: StudyStatus) -> None:
    status.updated_at = now_iso()
    atomic_write_json(study_dir(root, study) / STATUS_FILE, status.to_payload())


def read_status(root: Path, study: str) -> StudyStatus:
    path = require_study(root, study) / STATUS_FILE
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LabrunError(f"study {study} has no status file; materialize it first") from None
    except json.JSONDecodeError as exc:
        raise LabrunError(f"corrupt status file for study {study}: {exc}") from None
    cases = {
        cid: CaseStatus(entry["status"]) for cid, entry in payload.get("cases", {}).items()
    }
    return StudyStatus(
        study=payload["study"],
        total=payload["total"],
        cases=cases,
        latest_seq=payload.get("latest_seq", 0),
        started_at=payload.get("started_at"),
        finished_at=payload.get("finished_at"),
        updated_at=payload.get("updated_at"),
    )


def load_cases(root: Path, study: str) -> list[CaseRecord]:
    """Cases with parameters from the variation table and live statuses."""
    sdir = require_study(root, study)
    table = (sdir / "variation.csv").read_bytes()
    cases = parse_variation_table(table, "csv")
    status = read_status(root, study)
    for case in cases:
        case.dir = sdir / case.id
        case.status = status.cases.get(case.id, CaseStatus.PENDING)
    return cases


def require_case(root: Path, study: str, case_id: str) -> CaseStatus:
    status = read_status(root, study)
    if case_id not in status.cases:
        raise UnknownCaseError(f"study {study} has no case {case_id!r}")
    return status.cases[case_id]


def append_event(
    root: Path,
    study: str,
    seq: int,
    kind: str,
    case_id: str = "",
    detail: str = "",
) -> dict[str, Any]:
    """Append one event record. The caller owns seq allocation."""
    assert kind in EVENT_KINDS, kind
    record = {
        "seq": seq,
        "time": now_iso(),
        "kind": kind,
        "case_id": case_id,
        "detail": detail,
    }
    path = study_dir(root, study) / EVENTS_FILE
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    return record


def read_events(root: Path, study: str, since: int = 0) -> list[dict[str, Any]]:
    """Events with seq strictly greater than since, in log order."""
    path = require_study(root, study) / EVENTS_FILE
    if not path.is_file():
        return []
    events = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record["seq"] > since:
                events.append(record)
    return events


class StudyLock:
    """Advisory pid lock on a study directory.

    Created with O_EXCL so exactly one coordinator (or one direct state
    mutation) wins. A lock whose pid is gone on this host counts as stale
    and is replaced.
    """

    def __init__(self, root: Path, study: str):
        self.path = study_dir(root, study) / LOCK_FILE
        self._held = False

    def acquire(self) -> "StudyLock":
        for _ in range(2):
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                if lock_is_stale(self.path):
                    try:
                        self.path.unlink()
                    except FileNotFoundError:
                        pass
                    continue
                raise StudyLockedError(
                    f"study {self.path.parent.name} is locked by an active run ({self.path})"
                ) from None
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(
                    {"pid": os.getpid(), "host": socket.gethostname(), "started_at": now_iso()},
                    fh,
                )
            self._held = True
            return self
        raise StudyLockedError(f"could not acquire lock {self.path}")

    def release(self) -> None:
        if self._held:
            try:
                self.path.unlink()
            except FileNotFoundError:
                pass
            self._held = False

    def __enter__(self) -> "StudyLock":
        return self.acquire()

    def __exit__(self, *exc: object) -> None:
        self.release()


def _read_lock(path: Path) -> dict[str, Any] | None:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None


def lock_is_stale(path: Path) -> bool:
    info = _read_lock(path)
    if info is None:
        # Unreadable or half-written: treat as live briefly; callers retry.
        return not path.exists()
    if info.get("host") != socket.gethostname():
        return False
    pid = info.get("pid")
    if not isinstance(pid, int):
        return True
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return True
    except PermissionError:
        return False
    return False


def lock_is_active(root: Path, study: str) -> bool:
    path = study_dir(root, study) / LOCK_FILE
    return path.exists() and not lock_is_stale(path)


def control_dir(root: Path, study: str) -> Path:
    return study_dir(root, study) / CONTROL_DIR


def request_cancel_file(root: Path, study: str, case_id: str) -> Path:
    cdir = control_dir(root, study)
    cdir.mkdir(exist_ok=True)
    path = cdir / f"cancel-{case_id}"
    path.write_text(now_iso() + "\n", encoding="utf-8")
    return path


def pending_cancel_requests(root: Path, study: str) -> Iterator[tuple[str, Path]]:
    cdir = control_dir(root, study)
    if not cdir.is_dir():
        return
    for path in sorted(cdir.iterdir()):
        if path.name.startswith("cancel-"):
            yield path.name[len("cancel-"):], path
