from __future__ import annotations

import threading
import time

import pytest
import requests

from labrun import runner
from labrun.api import ApiConfig, ApiServer
from labrun.datastore import merge_study_table

from conftest import make_config


@pytest.fixture
def server(root):
    srv = ApiServer(ApiConfig(root=root, port=0, poll_timeout=5.0)).start()
    yield srv
    srv.shutdown()


@pytest.fixture
def token_server(root):
    srv = ApiServer(ApiConfig(root=root, port=0, token="hushhush")).start()
    yield srv
    srv.shutdown()


def test_empty_project_lists_no_studies(server):
    resp = requests.get(f"{server.url}/api/studies", timeout=5)
    assert resp.status_code == 200
    assert resp.json() == []
    assert resp.headers["X-Api-Schema"] == "1"


def test_studies_listing_and_detail(server, root, sleep_study):
    sleep_study(count=2, duration=0.02)
    runner.run(root, "sleepy")
    listing = requests.get(f"{server.url}/api/studies", timeout=5).json()
    assert [s["name"] for s in listing] == ["sleepy"]
    assert listing[0]["counts"]["Succeeded"] == 2

    detail = requests.get(f"{server.url}/api/studies/sleepy", timeout=5).json()
    assert detail["total"] == 2
    assert detail["mode"] == "cartesian"
    assert detail["varied"] == ["CASE"]
    assert detail["finished_at"] is not None


def test_unknown_study_404(server):
    resp = requests.get(f"{server.url}/api/studies/ghost", timeout=5)
    assert resp.status_code == 404
    assert "ghost" in resp.json()["error"]


def test_cases_payload(server, root, sleep_study):
    sleep_study(count=2)
    resp = requests.get(f"{server.url}/api/studies/sleepy/cases", timeout=5)
    cases = resp.json()["cases"]
    assert [c["id"] for c in cases] == ["0000", "0001"]
    assert cases[0]["status"] == "Pending"
    assert cases[1]["params"] == {"CASE": 1}


def test_secondary_payload_typed_rows(server, root, sleep_study):
    sleep_study(count=2, duration=0.02)
    runner.run(root, "sleepy")
    merge_study_table(root, "sleepy")
    resp = requests.get(f"{server.url}/api/studies/sleepy/secondary", timeout=5)
    body = resp.json()
    assert body["metadata_columns"] == ["CASE"]
    assert body["result_columns"] == ["IDX", "VALUE"]
    # numeric cells arrive as numbers, the ID as text
    assert body["rows"][0][0] == "0000"
    assert body["rows"][0][1] == 0


def test_secondary_404_before_collect(server, root, sleep_study):
    sleep_study(count=1)
    resp = requests.get(f"{server.url}/api/studies/sleepy/secondary", timeout=5)
    assert resp.status_code == 404


def test_events_cursor_and_timeout(server, root, sleep_study):
    sleep_study(count=2, duration=0.02)
    runner.run(root, "sleepy")
    base = f"{server.url}/api/events?study=sleepy"
    first = requests.get(f"{base}&since=0&timeout=0", timeout=5).json()
    seqs = [e["seq"] for e in first["events"]]
    assert seqs == list(range(1, len(seqs) + 1))
    latest = first["latest_seq"]
    assert latest == seqs[-1]

    # nothing newer: empty answer after the short timeout, cursor unchanged
    start = time.monotonic()
    second = requests.get(f"{base}&since={latest}&timeout=0.3", timeout=5).json()
    assert second["events"] == []
    assert second["latest_seq"] == latest
    assert time.monotonic() - start >= 0.25


def test_events_require_study_parameter(server):
    resp = requests.get(f"{server.url}/api/events", timeout=5)
    assert resp.status_code == 400


def test_long_poll_wakes_during_live_run(server, root, sleep_study):
    sleep_study(count=3, duration=0.3)
    thread = threading.Thread(target=runner.run, args=(root, "sleepy"), kwargs={"max_parallel": 1})

    seen: list[int] = []
    cursor = 0
    thread.start()
    try:
        deadline = time.monotonic() + 30
        done = False
        while not done and time.monotonic() < deadline:
            body = requests.get(
                f"{server.url}/api/events?study=sleepy&since={cursor}&timeout=2",
                timeout=10,
            ).json()
            for event in body["events"]:
                seen.append(event["seq"])
                if event["kind"] == "StudyFinished":
                    done = True
            cursor = body["latest_seq"]
    finally:
        thread.join(timeout=30)
    assert done
    # the combined stream is gapless and strictly increasing
    assert seen == list(range(1, len(seen) + 1))


def test_cancel_running_case_via_api(server, root, sleep_study):
    sleep_study(count=2, duration=5.0)
    results: dict = {}

    def target():
        results["result"] = runner.run(root, "sleepy", max_parallel=2, kill_grace=1.0)

    thread = threading.Thread(target=target)
    thread.start()
    try:
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            cases = requests.get(f"{server.url}/api/studies/sleepy/cases", timeout=5).json()["cases"]
            if any(c["status"] == "Running" for c in cases):
                break
            time.sleep(0.05)
        resp = requests.post(
            f"{server.url}/api/studies/sleepy/cases/0000/cancel", timeout=5
        )
        assert resp.status_code == 202
        assert resp.json()["action"] == "requested"
        resp = requests.post(
            f"{server.url}/api/studies/sleepy/cases/0001/cancel", timeout=5
        )
        assert resp.status_code == 202
    finally:
        thread.join(timeout=30)
    assert results["result"].counts["Cancelled"] == 2


def test_cancel_finished_case_conflict(server, root, sleep_study):
    sleep_study(count=1, duration=0.02)
    runner.run(root, "sleepy")
    resp = requests.post(f"{server.url}/api/studies/sleepy/cases/0000/cancel", timeout=5)
    assert resp.status_code == 409
    assert "already finished" in resp.json()["error"]


def test_cancel_unknown_case_404(server, root, sleep_study):
    sleep_study(count=1)
    resp = requests.post(f"{server.url}/api/studies/sleepy/cases/9999/cancel", timeout=5)
    assert resp.status_code == 404


def test_token_required_when_configured(token_server, root, sleep_study):
    sleep_study(count=1)
    url = f"{token_server.url}/api/studies"
    assert requests.get(url, timeout=5).status_code == 401
    assert (
        requests.get(url, headers={"Authorization": "Bearer wrong"}, timeout=5).status_code
        == 401
    )
    good = requests.get(url, headers={"Authorization": "Bearer hushhush"}, timeout=5)
    assert good.status_code == 200
    # POST is guarded too
    cancel = f"{token_server.url}/api/studies/sleepy/cases/0000/cancel"
    assert requests.post(cancel, timeout=5).status_code == 401
    ok = requests.post(cancel, headers={"Authorization": "Bearer hushhush"}, timeout=5)
    assert ok.status_code == 202


def test_dashboard_served_at_root(server):
    resp = requests.get(f"{server.url}/", timeout=5)
    assert resp.status_code == 200
    assert "text/html" in resp.headers["Content-Type"]


def test_path_traversal_blocked(server):
    resp = requests.get(f"{server.url}/static/..%2F..%2Fetc%2Fpasswd", timeout=5)
    assert resp.status_code == 404
