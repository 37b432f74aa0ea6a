"""HTTP status and cancellation API over the project state files.

The server is read-mostly: every GET renders the current content of
status.json, events.jsonl, and secondary.csv, so it can run next to an
active study run without coordination. The one write path, POST cancel,
goes through the same runner.cancel() used by the CLI. Event polling is a
long poll: the request parks until an event past the client's cursor
appears or the timeout elapses.

All JSON payloads are versioned by the X-Api-Schema response header.
With a token configured, any /api request without the matching bearer
token gets 401.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, urlsplit

from . import project, runner
from .datastore import load_study_secondary
from .errors import (
    AlreadyFinishedError,
    DataError,
    LabrunError,
    UnknownCaseError,
    UnknownStudyError,
)

API_SCHEMA = "1"
DASHBOARD_DIR = Path(__file__).parent / "dashboard"

log = logging.getLogger(__name__)

_STUDY_RE = re.compile(r"/api/studies/([^/]+)\Z")
_CASES_RE = re.compile(r"/api/studies/([^/]+)/cases\Z")
_SECONDARY_RE = re.compile(r"/api/studies/([^/]+)/secondary\Z")
_CANCEL_RE = re.compile(r"/api/studies/([^/]+)/cases/([^/]+)/cancel\Z")
_ASSET_RE = re.compile(r"[A-Za-z0-9_.-]+\Z")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".json": "application/json",
}


@dataclass(frozen=True)
class ApiConfig:
    root: Path
    host: str = "127.0.0.1"
    port: int = 8080
    token: str | None = None
    poll_timeout: float = 25.0


def _json_safe(value: Any) -> Any:
    # Strict JSON has no NaN or infinity; ship them as strings.
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _study_summary(root: Path, name: str) -> dict[str, Any]:
    status = project.read_status(root, name)
    return {
        "name": name,
        "total": status.total,
        "counts": status.counts,
        "latest_seq": status.latest_seq,
        "started_at": status.started_at,
        "finished_at": status.finished_at,
    }


class _Handler(BaseHTTPRequestHandler):
    server_version = "labrun"

    @property
    def config(self) -> ApiConfig:
        return self.server.api_config  # type: ignore[attr-defined]

    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, code: int, payload: Any) -> None:
        body = json.dumps(payload, indent=2, allow_nan=False).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("X-Api-Schema", API_SCHEMA)
        self.end_headers()
        self.wfile.write(body)

    def _error(self, code: int, message: str) -> None:
        self._send_json(code, {"error": message})

    def _authorized(self) -> bool:
        token = self.config.token
        if token is None:
            return True
        supplied = self.headers.get("Authorization", "")
        return supplied == f"Bearer {token}"

    def _serve_asset(self, name: str) -> None:
        if not _ASSET_RE.match(name):
            self._error(404, "not found")
            return
        path = DASHBOARD_DIR / name
        if not path.is_file():
            self._error(404, "not found")
            return
        body = path.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", _CONTENT_TYPES.get(path.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        parts = urlsplit(self.path)
        path = parts.path
        try:
            if path == "/" or path == "/index.html":
                self._serve_asset("index.html")
                return
            if path.startswith("/static/"):
                self._serve_asset(path[len("/static/"):])
                return
            if not path.startswith("/api/"):
                self._error(404, "not found")
                return
            if not self._authorized():
                self._error(401, "unauthorized")
                return
            root = self.config.root

            if path == "/api/studies":
                payload = [_study_summary(root, name) for name in project.list_studies(root)]
                self._send_json(200, payload)
                return
            if path == "/api/events":
                self._events(parse_qs(parts.query))
                return
            m = _STUDY_RE.match(path)
            if m:
                self._study_detail(m.group(1))
                return
            m = _CASES_RE.match(path)
            if m:
                self._cases(m.group(1))
                return
            m = _SECONDARY_RE.match(path)
            if m:
                self._secondary(m.group(1))
                return
            self._error(404, "not found")
        except (UnknownStudyError, UnknownCaseError) as exc:
            self._error(404, str(exc))
        except LabrunError as exc:
            self._error(400, str(exc))
        except BrokenPipeError:
            pass

    def do_POST(self) -> None:  # noqa: N802
        parts = urlsplit(self.path)
        try:
            if not parts.path.startswith("/api/"):
                self._error(404, "not found")
                return
            if not self._authorized():
                self._error(401, "unauthorized")
                return
            m = _CANCEL_RE.match(parts.path)
            if m:
                self._cancel(m.group(1), m.group(2))
                return
            self._error(404, "not found")
        except (UnknownStudyError, UnknownCaseError) as exc:
            self._error(404, str(exc))
        except AlreadyFinishedError as exc:
            self._error(409, str(exc))
        except LabrunError as exc:
            self._error(400, str(exc))
        except BrokenPipeError:
            pass

    def _study_detail(self, name: str) -> None:
        root = self.config.root
        config = project.load_config(root, name)
        payload = _study_summary(root, name)
        payload.update(
            {
                "mode": config.mode,
                "varied": list(config.varied.keys()),
                "constants": {
                    k: _json_safe(v) for k, v in config.constants.items()
                },
            }
        )
        self._send_json(200, payload)

    def _cases(self, name: str) -> None:
        root = self.config.root
        cases = project.load_cases(root, name)
        payload = {
            "study": name,
            "cases": [
                {
                    "id": c.id,
                    "status": c.status.value,
                    "params": {k: _json_safe(v) for k, v in c.params.items()},
                }
                for c in cases
            ],
        }
        self._send_json(200, payload)

    def _secondary(self, name: str) -> None:
        root = self.config.root
        try:
            table = load_study_secondary(root, name)
        except DataError as exc:
            self._error(404, str(exc))
            return
        rows = []
        for row in table.rows:
            rows.append(
                [_json_safe(table.typed_cell(row, col)) for col in table.columns]
            )
        self._send_json(
            200,
            {
                "study": name,
                "columns": table.columns,
                "metadata_columns": table.metadata_columns,
                "result_columns": table.result_columns,
                "column_types": table.column_types,
                "rows": rows,
            },
        )

    def _events(self, query: dict[str, list[str]]) -> None:
        root = self.config.root
        study_values = query.get("study")
        if not study_values:
            self._error(400, "missing required query parameter: study")
            return
        study = study_values[0]
        project.require_study(root, study)
        try:
            since = int(query.get("since", ["0"])[0])
        except ValueError:
            self._error(400, "since must be an integer event sequence number")
            return
        try:
            timeout = float(query.get("timeout", [str(self.config.poll_timeout)])[0])
        except ValueError:
            self._error(400, "timeout must be a number of seconds")
            return
        timeout = max(0.0, min(timeout, self.config.poll_timeout))

        deadline = time.monotonic() + timeout
        while True:
            events = project.read_events(root, study, since=since)
            if events or time.monotonic() >= deadline:
                break
            time.sleep(0.05)
        if events:
            latest = events[-1]["seq"]
        else:
            status = project.read_status(root, study)
            latest = max(since, status.latest_seq)
        self._send_json(
            200, {"study": study, "since": since, "events": events, "latest_seq": latest}
        )

    def _cancel(self, study: str, case_id: str) -> None:
        ack = runner.cancel(self.config.root, study, case_id)
        self._send_json(
            202,
            {
                "study": ack.study,
                "case_id": ack.case_id,
                "action": ack.action,
                "status": ack.status,
            },
        )


class ApiServer:
    """Lifecycle wrapper so tests and the CLI share one entry point."""

    def __init__(self, config: ApiConfig):
        self.config = config
        self._httpd = ThreadingHTTPServer((config.host, config.port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.api_config = config  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.config.host}:{self.port}"

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def serve(config: ApiConfig) -> ApiServer:
    """Bind and return the server; callers pick blocking or threaded start."""
    return ApiServer(config)
