"""Case materialization and study execution.

materialize() expands a config into per-case directories with rendered
input files; run() executes the pending cases with bounded parallelism,
streaming every transition to status.json and events.jsonl; cancel() works
both against a live run (via a control file the coordinator picks up) and
against idle state (by updating the files directly under the study lock).

Processes are started in their own session so an entire process group can
be signalled: cancellation sends SIGTERM, then SIGKILL after a grace
period. The executor is a small class with submit/poll/terminate/kill so a
batch-scheduler backend can replace it without touching the coordinator.
"""

from __future__ import annotations

import os
import re
import shutil
import signal
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

import yaml

from . import project
from .errors import AlreadyFinishedError, MaterializeError, RunError
from .paramspace import (
    DEFAULT_MAX_CASES,
    CaseRecord,
    CaseStatus,
    StudyConfig,
    VARIATION_FORMATS,
    expand,
    export_variation_table,
    variation_filename,
)
from .values import Scalar, serialize_scalar

CASE_FILE = "case.yaml"
STDOUT_LOG = "stdout.log"
STDERR_LOG = "stderr.log"
KILL_GRACE_SECONDS = 5.0

_PLACEHOLDER_RE = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")


def substitute(text: str, params: dict[str, Scalar], where: str) -> str:
    """Replace {{NAME}} placeholders with serialized parameter values."""

    def repl(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in params:
            raise MaterializeError(
                "unknown placeholder {{" + name + "}} in " + where
            )
        return serialize_scalar(params[name])

    return _PLACEHOLDER_RE.sub(repl, text)


def _render_templates(template_dir: Path, case: CaseRecord, where_prefix: str) -> None:
    for src in sorted(template_dir.rglob("*")):
        rel = src.relative_to(template_dir)
        dst = case.dir / rel
        if src.is_dir():
            dst.mkdir(parents=True, exist_ok=True)
            continue
        dst.parent.mkdir(parents=True, exist_ok=True)
        raw = src.read_bytes()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            # Binary asset: copied as-is, no substitution.
            dst.write_bytes(raw)
        else:
            rendered = substitute(text, case.params, f"{where_prefix}/{rel}")
            dst.write_text(rendered, encoding="utf-8")
        shutil.copymode(src, dst)


def materialize(
    config: StudyConfig,
    root: Path,
    force: bool = False,
    source_dir: Path | None = None,
    max_cases: int = DEFAULT_MAX_CASES,
) -> list[CaseRecord]:
    """Expand a study and create its directory tree under root.

    source_dir is where the config file came from; template_dir and an
    optional description.md are resolved relative to it. Refuses to touch
    an existing non-empty study directory unless force is set, in which
    case the old tree is replaced wholesale.
    """
    root = Path(root)
    cases = expand(config, max_cases=max_cases)
    sdir = project.study_dir(root, config.name)
    if sdir.exists() and any(sdir.iterdir()):
        if not force:
            raise MaterializeError(
                f"study directory {sdir} already exists and is not empty; use force to replace it"
            )
        shutil.rmtree(sdir)
    sdir.mkdir(parents=True, exist_ok=True)

    template_dir: Path | None = None
    if config.template_dir is not None:
        base = Path(source_dir) if source_dir is not None else Path.cwd()
        template_dir = (base / config.template_dir).resolve()
        if not template_dir.is_dir():
            raise MaterializeError(f"template_dir not found: {template_dir}")

    (sdir / project.STUDY_FILE).write_text(config.to_yaml(), encoding="utf-8")
    for fmt in VARIATION_FORMATS:
        (sdir / variation_filename(fmt)).write_bytes(export_variation_table(cases, fmt))
    if source_dir is not None:
        desc = Path(source_dir) / project.DESCRIPTION_FILE
        if desc.is_file():
            shutil.copyfile(desc, sdir / project.DESCRIPTION_FILE)

    for case in cases:
        case.dir = sdir / case.id
        case.dir.mkdir()
        if template_dir is not None:
            _render_templates(template_dir, case, f"case {case.id}")
        command = substitute(config.command, case.params, f"command of case {case.id}")
        (case.dir / CASE_FILE).write_text(
            yaml.safe_dump(
                {"id": case.id, "params": dict(case.params), "command": command},
                sort_keys=False,
            ),
            encoding="utf-8",
        )

    status = project.StudyStatus(
        study=config.name,
        total=len(cases),
        cases={c.id: CaseStatus.PENDING for c in cases},
        latest_seq=0,
    )
    project.write_status(root, config.name, status)
    (sdir / project.EVENTS_FILE).touch()
    project.control_dir(root, config.name).mkdir(exist_ok=True)
    return cases


def _read_case_command(case_dir: Path) -> str:
    payload = yaml.safe_load((case_dir / CASE_FILE).read_text(encoding="utf-8"))
    return payload["command"]


@dataclass
class _Handle:
    case_id: str
    proc: subprocess.Popen
    logs: tuple[IO[bytes], IO[bytes]]
    term_deadline: float | None = None
    cancel_requested: bool = False


class LocalExecutor:
    """Runs case commands as local subprocesses, one process group each."""

    def submit(self, case_id: str, case_dir: Path, command: str) -> _Handle:
        out = (case_dir / STDOUT_LOG).open("wb")
        err = (case_dir / STDERR_LOG).open("wb")
        proc = subprocess.Popen(
            command,
            shell=True,
            cwd=case_dir,
            stdout=out,
            stderr=err,
            start_new_session=True,
        )
        return _Handle(case_id=case_id, proc=proc, logs=(out, err))

    def poll(self, handle: _Handle) -> int | None:
        code = handle.proc.poll()
        if code is not None:
            for log in handle.logs:
                if not log.closed:
                    log.close()
        return code

    def _signal(self, handle: _Handle, sig: int) -> None:
        try:
            os.killpg(os.getpgid(handle.proc.pid), sig)
        except (ProcessLookupError, PermissionError):
            pass

    def terminate(self, handle: _Handle) -> None:
        self._signal(handle, signal.SIGTERM)

    def kill(self, handle: _Handle) -> None:
        self._signal(handle, signal.SIGKILL)


@dataclass
class RunResult:
    study: str
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.counts.get(CaseStatus.FAILED.value, 0) > 0:
            return 3
        if self.counts.get(CaseStatus.CANCELLED.value, 0) > 0:
            return 4
        return 0


class _Coordinator:
    """Single-process event loop that owns all study state while running."""

    def __init__(
        self,
        root: Path,
        study: str,
        max_parallel: int,
        poll_interval: float,
        kill_grace: float,
    ):
        self.root = root
        self.study = study
        self.max_parallel = max_parallel
        self.poll_interval = poll_interval
        self.kill_grace = kill_grace
        self.executor = LocalExecutor()
        self.status = project.read_status(root, study)
        self.seq = max(self.status.latest_seq, _last_event_seq(root, study))
        self.running: dict[str, _Handle] = {}
        self.pending: list[str] = [
            cid for cid, st in self.status.cases.items() if st is CaseStatus.PENDING
        ]

    def emit(self, kind: str, case_id: str = "", detail: str = "") -> None:
        self.seq += 1
        project.append_event(self.root, self.study, self.seq, kind, case_id, detail)
        self.status.latest_seq = self.seq

    def flush_status(self) -> None:
        project.write_status(self.root, self.study, self.status)

    def transition(self, case_id: str, new: CaseStatus, kind: str, detail: str = "") -> None:
        self.status.cases[case_id] = new
        self.emit(kind, case_id, detail)

    def apply_cancel_requests(self) -> None:
        for case_id, path in project.pending_cancel_requests(self.root, self.study):
            path.unlink(missing_ok=True)
            current = self.status.cases.get(case_id)
            if current is CaseStatus.PENDING:
                self.pending.remove(case_id)
                self.transition(
                    case_id, CaseStatus.CANCELLED, "CaseCancelled", "cancelled before start"
                )
            elif current is CaseStatus.RUNNING:
                handle = self.running.get(case_id)
                if handle is not None and not handle.cancel_requested:
                    handle.cancel_requested = True
                    handle.term_deadline = time.monotonic() + self.kill_grace
                    self.executor.terminate(handle)

    def reap(self) -> None:
        for case_id in list(self.running):
            handle = self.running[case_id]
            code = self.executor.poll(handle)
            if code is None:
                if (
                    handle.term_deadline is not None
                    and time.monotonic() >= handle.term_deadline
                ):
                    # Grace period expired: escalate to SIGKILL once.
                    handle.term_deadline = None
                    self.executor.kill(handle)
                continue
            del self.running[case_id]
            if handle.cancel_requested:
                self.transition(
                    case_id, CaseStatus.CANCELLED, "CaseCancelled", f"exit {code}"
                )
            elif code == 0:
                self.transition(case_id, CaseStatus.SUCCEEDED, "CaseFinished", "exit 0")
            else:
                self.transition(case_id, CaseStatus.FAILED, "CaseFinished", f"exit {code}")

    def start_pending(self) -> None:
        while self.pending and len(self.running) < self.max_parallel:
            case_id = self.pending.pop(0)
            cdir = project.case_dir(self.root, self.study, case_id)
            command = _read_case_command(cdir)
            handle = self.executor.submit(case_id, cdir, command)
            self.running[case_id] = handle
            self.transition(case_id, CaseStatus.RUNNING, "CaseStarted")

    def abort_running(self) -> None:
        """Terminate whatever is still running and mark it Cancelled."""
        for handle in self.running.values():
            self.executor.terminate(handle)
        deadline = time.monotonic() + self.kill_grace
        while self.running and time.monotonic() < deadline:
            for case_id in list(self.running):
                if self.executor.poll(self.running[case_id]) is not None:
                    handle = self.running.pop(case_id)
                    self.transition(case_id, CaseStatus.CANCELLED, "CaseCancelled", "aborted")
            time.sleep(self.poll_interval)
        for case_id in list(self.running):
            handle = self.running.pop(case_id)
            self.executor.kill(handle)
            handle.proc.wait()
            self.executor.poll(handle)
            self.transition(case_id, CaseStatus.CANCELLED, "CaseCancelled", "aborted")

    def loop(self) -> None:
        if self.status.started_at is None:
            self.status.started_at = project.now_iso()
        self.emit("StudyStarted", detail=f"pending {len(self.pending)}")
        self.flush_status()
        try:
            while self.pending or self.running:
                before = self.seq
                self.apply_cancel_requests()
                self.reap()
                self.start_pending()
                if self.seq != before:
                    self.flush_status()
                if self.pending or self.running:
                    time.sleep(self.poll_interval)
        except BaseException:
            self.abort_running()
            self.pending.clear()
            raise
        finally:
            if self.status.all_terminal():
                self.status.finished_at = project.now_iso()
            counts = self.status.counts
            summary = " ".join(f"{k}={v}" for k, v in counts.items() if v)
            self.emit("StudyFinished", detail=summary or "empty")
            self.flush_status()


def _last_event_seq(root: Path, study: str) -> int:
    events = project.read_events(root, study)
    return events[-1]["seq"] if events else 0


def run(
    root: Path,
    study: str,
    max_parallel: int | None = None,
    poll_interval: float = 0.02,
    kill_grace: float = KILL_GRACE_SECONDS,
) -> RunResult:
    """Execute all pending cases of a materialized study.

    Holds the study lock for the whole run. Cases already in a terminal
    state are left untouched, so an interrupted study can be re-run to
    finish its remainder.
    """
    root = Path(root)
    project.require_study(root, study)
    if max_parallel is None:
        max_parallel = os.cpu_count() or 1
    if max_parallel < 1:
        raise RunError(f"max_parallel must be at least 1, got {max_parallel}")
    with project.StudyLock(root, study):
        coordinator = _Coordinator(root, study, max_parallel, poll_interval, kill_grace)
        coordinator.loop()
        return RunResult(study=study, counts=coordinator.status.counts)


@dataclass
class CancelAck:
    study: str
    case_id: str
    action: str  # requested | cancelled | noop
    status: str


def cancel(root: Path, study: str, case_id: str) -> CancelAck:
    """Request cancellation of one case.

    With a live run, drops a control file the coordinator applies on its
    next tick. With no live run, updates the state files directly under
    the study lock. A case that already Succeeded or Failed is a hard
    rejection; repeating a cancel is a harmless no-op.
    """
    root = Path(root)
    current = project.require_case(root, study, case_id)
    if current in (CaseStatus.SUCCEEDED, CaseStatus.FAILED):
        raise AlreadyFinishedError(
            f"case {case_id} of study {study} already finished ({current.value})"
        )
    if current is CaseStatus.CANCELLED:
        return CancelAck(study, case_id, "noop", current.value)

    if project.lock_is_active(root, study):
        project.request_cancel_file(root, study, case_id)
        return CancelAck(study, case_id, "requested", current.value)

    try:
        lock = project.StudyLock(root, study).acquire()
    except Exception:
        # A run grabbed the lock between the check and now; hand the
        # request to it instead.
        project.request_cancel_file(root, study, case_id)
        return CancelAck(study, case_id, "requested", current.value)
    try:
        status = project.read_status(root, study)
        current = status.cases[case_id]
        if current in (CaseStatus.SUCCEEDED, CaseStatus.FAILED):
            raise AlreadyFinishedError(
                f"case {case_id} of study {study} already finished ({current.value})"
            )
        if current is CaseStatus.CANCELLED:
            return CancelAck(study, case_id, "noop", current.value)
        status.cases[case_id] = CaseStatus.CANCELLED
        seq = max(status.latest_seq, _last_event_seq(root, study)) + 1
        project.append_event(
            root, study, seq, "CaseCancelled", case_id, "cancelled while idle"
        )
        status.latest_seq = seq
        if status.all_terminal() and status.started_at is not None:
            status.finished_at = project.now_iso()
        project.write_status(root, study, status)
        return CancelAck(study, case_id, "cancelled", CaseStatus.CANCELLED.value)
    finally:
        lock.release()


def study_status(root: Path, study: str) -> project.StudyStatus:
    return project.read_status(Path(root), study)
