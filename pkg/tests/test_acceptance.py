"""End-to-end acceptance gate.

Each test here checks one headline guarantee of the toolkit, from exact
reproduction of the bundled demo tables through runner scheduling, archive
determinism, linting, reporting, and the HTTP API. The conftest hook prints
one PASS/FAIL line per test at the end of the run.
"""

from __future__ import annotations

import csv
import io
import math
import random
import re
import tarfile
import threading
import time
from hashlib import sha256
from pathlib import Path

import pytest
import requests

from labrun import demos, project, runner
from labrun.api import ApiConfig, ApiServer
from labrun.cli import main
from labrun.compare import ComparisonSpec, compare_tables
from labrun.crosslink import (
    build_manifest,
    build_secondary_archive,
    matches_any_glob,
    parse_tag,
    verify_links,
)
from labrun.datastore import SecondaryTable
from labrun.errors import CompareError, TagError
from labrun.paramspace import (
    CaseStatus,
    StudyConfig,
    expand,
    export_variation_table,
    parse_variation_table,
)
from labrun.recipelint import lint_recipe
from labrun.report import ChartSpec, generate_study_report


def _run_demo(name: str, tmp_path: Path) -> Path:
    """Export a bundled demo and push it through materialize/run/collect."""
    root = tmp_path / "proj"
    demos.export(name, tmp_path)
    assert main(["materialize", str(tmp_path / name / "study.yaml"), "--root", str(root)]) == 0
    assert main(["run", name, "--root", str(root)]) == 0
    assert main(["collect", name, "--root", str(root)]) == 0
    return root


def test_hyperparameter_demo_reproduces_published_table(tmp_path):
    start = time.monotonic()
    root = _run_demo("hyperparam", tmp_path)
    text = (root / "hyperparam" / "secondary.csv").read_text(encoding="ascii")
    rows = list(csv.reader(io.StringIO(text)))

    header = [
        "ID",
        "OPTIMIZER_STEP",
        "HIDDEN_LAYERS",
        "MAX_ITERATIONS",
        "DELTA_X",
        "EPOCH",
        "TRAINING_MSE",
    ]
    curves = {
        "0000": ("0.0001", ["1.091560", "1.082970", "1.077200", "1.072650"]),
        "0001": ("0.001", ["0.992354", "0.991959", "0.995102", "0.996143"]),
    }
    expected = [header]
    for case_id, (step, losses) in curves.items():
        for epoch, mse in enumerate(losses, start=1):
            expected.append([case_id, step, "10,10,10,10", "3000", "0.0625", str(epoch), mse])

    # exact string equality, trailing zeros included
    assert rows == expected
    assert time.monotonic() - start < 5.0


def test_finite_difference_demo_matches_committed_reference(tmp_path):
    start = time.monotonic()
    root = _run_demo("fd_derivative", tmp_path)
    reference = tmp_path / "fd_derivative" / "reference"
    compare_argv = [
        "compare",
        "fd_derivative",
        "--root",
        str(root),
        "--reference",
        str(reference),
        "--key",
        "ID",
        "--key",
        "X",
        "--abs-tol",
        "1e-12",
    ]
    assert main(compare_argv) == 0
    assert (
        main(["report", "fd_derivative", "--root", str(root), "--clock", "2026-01-01T00:00:00+00:00"])
        == 0
    )
    assert time.monotonic() - start < 30.0

    # nudging a single reference cell by 1e-3 must flip the verdict
    ref_csv = reference / "secondary.csv"
    rows = list(csv.reader(io.StringIO(ref_csv.read_text(encoding="ascii"))))
    col = rows[0].index("FD_DERIVATIVE")
    rows[1][col] = repr(float(rows[1][col]) + 1e-3)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    ref_csv.write_text(buf.getvalue(), encoding="ascii")
    assert main(compare_argv) == 2


def test_expansion_laws_over_random_configs():
    start = time.monotonic()
    rng = random.Random(20260816)
    pool = [0, 1, -3, 7, 42, 2.5, -0.125, 0.001, 1e-8, True, False, "alpha", "beta_2", "x.y"]

    for trial in range(200):
        mode = rng.choice(["cartesian", "zip"])
        names = [f"P{j}" for j in range(rng.randint(1, 3))]
        if mode == "zip":
            length = rng.randint(1, 5)
            varied = {n: [rng.choice(pool) for _ in range(length)] for n in names}
            expected_count = length
        else:
            varied = {
                n: [rng.choice(pool) for _ in range(rng.randint(1, 4))] for n in names
            }
            expected_count = math.prod(len(v) for v in varied.values())
        config = StudyConfig(
            name=f"prop{trial}",
            command="true",
            varied=varied,
            constants={"FIXED": rng.choice(pool)},
            mode=mode,
        )

        cases = expand(config)
        assert len(cases) == expected_count
        ids = [c.id for c in cases]
        assert ids == sorted(ids) and len(set(ids)) == len(ids)
        assert all(len(i) == max(4, len(str(expected_count - 1))) for i in ids)
        assert [c.params for c in expand(config)] == [c.params for c in cases]

        for fmt in ("csv", "json", "yaml"):
            back = parse_variation_table(export_variation_table(cases, fmt), fmt)
            assert [c.id for c in back] == ids
            for original, parsed in zip(cases, back):
                assert parsed.params == original.params
                for key, value in original.params.items():
                    assert type(parsed.params[key]) is type(value)

    assert time.monotonic() - start < 10.0


def _one_value_table(value: str) -> SecondaryTable:
    table = SecondaryTable(metadata_columns=["K"], result_columns=["V"], rows=[["0000", "1", value]])
    table.column_types = {"ID": "str", "K": "int", "V": "float"}
    return table


def test_comparison_tolerances_nan_policy_and_key_uniqueness():
    keys = ComparisonSpec(key_columns=("ID", "K"))

    # reflexivity at zero tolerance
    table = _one_value_table("1.25")
    report = compare_tables(table, table, keys)
    assert report.verdict == "Pass"
    assert all(c.max_abs_dev in (None, 0.0) for c in report.columns)

    # randomized perturbations: passing at a tolerance implies passing at any larger one
    rng = random.Random(7)
    for _ in range(100):
        ref = rng.uniform(-100.0, 100.0)
        actual = ref + rng.uniform(-1.0, 1.0)
        deviation = abs(actual - ref)
        pair = (_one_value_table(repr(actual)), _one_value_table(repr(ref)))
        tight = ComparisonSpec(key_columns=("ID", "K"), abs_tol=deviation * 0.5)
        loose = ComparisonSpec(key_columns=("ID", "K"), abs_tol=deviation)
        looser = ComparisonSpec(key_columns=("ID", "K"), abs_tol=deviation * 2 + 1.0)
        verdicts = [compare_tables(*pair, spec).verdict for spec in (tight, loose, looser)]
        if deviation > 0:
            assert verdicts[0] == "Fail"
        assert verdicts[1] == "Pass"  # rule is <=, equality passes
        assert verdicts[2] == "Pass"

    # NaN never equals NaN unless the flag says so
    nan_pair = (_one_value_table("nan"), _one_value_table("nan"))
    assert compare_tables(*nan_pair, keys).verdict == "Fail"
    relaxed = ComparisonSpec(key_columns=("ID", "K"), nan_equal=True)
    assert compare_tables(*nan_pair, relaxed).verdict == "Pass"

    # duplicate keys make the match ill-defined and are an error
    dup = SecondaryTable(
        metadata_columns=["K"],
        result_columns=["V"],
        rows=[["0000", "1", "1.0"], ["0000", "1", "2.0"]],
    )
    dup.column_types = {"ID": "str", "K": "int", "V": "float"}
    with pytest.raises(CompareError, match="duplicate key"):
        compare_tables(dup, _one_value_table("1.0"), keys)

    # worked example: 1.0 vs 1.05 at rel_tol 0.01 fails with the exact deviation
    spec = ComparisonSpec(key_columns=("ID", "K"), rel_tol=0.01)
    report = compare_tables(_one_value_table("1.05"), _one_value_table("1.0"), spec)
    assert report.verdict == "Fail"
    (column,) = [c for c in report.columns if c.column == "V"]
    assert column.max_rel_dev == (1.05 - 1.0) / 1.0


def test_runner_bounds_parallelism_and_survives_cancel_and_failure(root, sleep_study):
    # six short cases on two slots: the event log must never show three running
    sleep_study(name="clean6", count=6, duration=0.15)
    result = runner.run(root, "clean6", max_parallel=2)
    assert result.exit_code == 0 and result.counts["Succeeded"] == 6
    active = peak = 0
    for event in project.read_events(root, "clean6"):
        if event["kind"] == "CaseStarted":
            active += 1
        elif event["kind"] in ("CaseFinished", "CaseCancelled"):
            active -= 1
        peak = max(peak, active)
    assert peak == 2

    # cancelling one running case leaves five successes and exit code 4
    sleep_study(name="cancel6", count=6, duration=1.5)
    outcome: dict = {}

    def target():
        outcome["result"] = runner.run(root, "cancel6", max_parallel=2, kill_grace=2.0)

    thread = threading.Thread(target=target)
    thread.start()
    try:
        victim = None
        deadline = time.monotonic() + 10
        while victim is None and time.monotonic() < deadline:
            status = project.read_status(root, "cancel6")
            running = [c for c, s in status.cases.items() if s is CaseStatus.RUNNING]
            if running:
                victim = running[0]
            else:
                time.sleep(0.02)
        assert victim is not None, "no case ever reached Running"
        runner.cancel(root, "cancel6", victim)
    finally:
        thread.join(timeout=60)
    assert not thread.is_alive()
    final = {k: v for k, v in outcome["result"].counts.items() if v}
    assert final == {"Succeeded": 5, "Cancelled": 1}
    assert outcome["result"].exit_code == 4

    # one failing case reports exit code 3 without stopping the rest
    sleep_study(name="flaky6", count=6, duration=0.1, fail_ids=(3,))
    result = runner.run(root, "flaky6", max_parallel=2)
    assert result.exit_code == 3
    assert {k: v for k, v in result.counts.items() if v} == {"Succeeded": 5, "Failed": 1}


def test_archive_is_deterministic_and_closed_over_primary_data(tmp_path):
    root = tmp_path / "proj"
    for name in ("hyperparam", "fd_derivative"):
        demos.export(name, tmp_path)
        main(["materialize", str(tmp_path / name / "study.yaml"), "--root", str(root)])
        assert main(["run", name, "--root", str(root)]) == 0
        assert main(["collect", name, "--root", str(root)]) == 0

    # both demos leave bulky primary stand-ins behind that must stay out
    assert list((root / "hyperparam").glob("*/weights.dat"))
    assert list((root / "fd_derivative").glob("*/samples.raw"))

    first = tmp_path / "one.tar.gz"
    second = tmp_path / "two.tar.gz"
    _, digest1, _ = build_secondary_archive(root, ["hyperparam", "fd_derivative"], first)
    _, digest2, _ = build_secondary_archive(root, ["hyperparam", "fd_derivative"], second)
    assert first.read_bytes() == second.read_bytes()
    assert digest1 == digest2 == sha256(first.read_bytes()).hexdigest()
    assert first.with_name(first.name + ".sha256").read_text().split()[0] == digest1

    # independent exhaustive scan of the archive against each study's globs
    primaries = {
        "hyperparam": ("*.dat", "checkpoints/*"),
        "fd_derivative": ("*.raw",),
    }
    with tarfile.open(first, "r:gz") as tar:
        names = tar.getnames()
    assert names == sorted(names)
    assert any(name.endswith("secondary.csv") for name in names)
    for name in names:
        study, _, inner = name.partition("/")
        assert not matches_any_glob(inner, primaries[study]), name

    # link closure on a fully cross-referenced milestone
    blob = tmp_path / "one.tar.gz"
    entries = [
        {
            "role": "report",
            "pid": "10.5555/demo.report",
            "references": ["10.5555/demo.code", "10.5555/demo.data", "fd-jcp-submission"],
        },
        {
            "role": "code-snapshot",
            "pid": "10.5555/demo.code",
            "references": ["10.5555/demo.report", "fd-jcp-submission"],
        },
        {
            "role": "data",
            "pid": "10.5555/demo.data",
            "path": str(blob),
            "references": ["10.5555/demo.report", "fd-jcp-submission"],
        },
    ]
    manifest = build_manifest(entries, "fd-jcp-submission", "abc1234", base_dir=tmp_path)
    assert verify_links(manifest).verdict == "Complete"

    entries[2]["references"] = ["fd-jcp-submission"]
    broken = build_manifest(entries, "fd-jcp-submission", "abc1234", base_dir=tmp_path)
    report = verify_links(broken)
    assert report.verdict == "Incomplete"
    assert report.missing == [("data", "report")]


def test_milestone_tag_grammar_vectors_and_round_trip():
    parsed = parse_tag("ccs-jcp-submission")
    assert (parsed.idea, parsed.venue, parsed.stage) == ("ccs", "jcp", "submission")
    parsed = parse_tag("ccs-jcp-revision-2")
    assert parsed.stage == "revision-2"
    with pytest.raises(TagError):
        parse_tag("ccs--submission")

    rng = random.Random(99)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789_."

    def segment() -> str:
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 8)))

    for _ in range(200):
        stage = rng.choice(["submission", "accepted", "internal", f"revision-{rng.randint(1, 40)}"])
        parts = [segment(), segment(), stage]
        if rng.random() < 0.4:
            parts.append(segment())
        tag = "-".join(parts)
        assert parse_tag(tag).format() == tag


def test_bundled_recipes_lint_to_expected_findings():
    assert lint_recipe(demos.recipe_path("clean.def")) == []
    findings = lint_recipe(demos.recipe_path("dirty.def"))
    assert [(f.rule, f.severity, f.line) for f in findings] == [
        ("R1", "error", 2),
        ("R2", "warning", 5),
        ("R3", "warning", 9),
    ]


def test_report_regenerates_byte_identically_and_stays_self_contained(tmp_path):
    from datetime import datetime, timezone

    root = _run_demo("hyperparam", tmp_path)
    clock = datetime(2026, 1, 2, 3, 4, 5, tzinfo=timezone.utc)
    charts = [ChartSpec.parse("EPOCH:TRAINING_MSE:OPTIMIZER_STEP")]

    html_path, summary_path = generate_study_report(root, "hyperparam", charts, clock=clock)
    first_html = html_path.read_bytes()
    first_summary = summary_path.read_bytes()
    html_path2, summary_path2 = generate_study_report(root, "hyperparam", charts, clock=clock)
    assert html_path2.read_bytes() == first_html
    assert summary_path2.read_bytes() == first_summary

    html = first_html.decode("utf-8")
    assert re.search(r"(src|href)\s*=\s*[\"']https?://", html) is None
    assert "<script" not in html

    # one line per optimizer step, four plotted points each
    polylines = re.findall(r"<polyline[^>]*points=\"([^\"]*)\"", html)
    assert len(polylines) == 2
    for points in polylines:
        assert len(points.split()) == 4
    assert len(re.findall(r"<circle ", html)) == 8


def test_http_api_contract(root, sleep_study):
    server = ApiServer(ApiConfig(root=root, port=0, token="acc3pt", poll_timeout=3.0)).start()
    try:
        base = server.url
        auth = {"Authorization": "Bearer acc3pt"}

        # a configured token locks every api route
        assert requests.get(f"{base}/api/studies", timeout=5).status_code == 401
        bad = {"Authorization": "Bearer wrong"}
        assert requests.get(f"{base}/api/studies", headers=bad, timeout=5).status_code == 401

        # empty project
        resp = requests.get(f"{base}/api/studies", headers=auth, timeout=5)
        assert resp.status_code == 200 and resp.json() == []

        sleep_study(count=4, duration=1.0)
        listing = requests.get(f"{base}/api/studies", headers=auth, timeout=5).json()
        assert [s["name"] for s in listing] == ["sleepy"]

        outcome: dict = {}

        def target():
            outcome["result"] = runner.run(root, "sleepy", max_parallel=2, kill_grace=2.0)

        thread = threading.Thread(target=target)
        thread.start()
        try:
            # live event stream: strictly consecutive cursor, no gaps
            seen: list[int] = []
            cancelled = False
            cursor = 0
            deadline = time.monotonic() + 30
            while time.monotonic() < deadline:
                body = requests.get(
                    f"{base}/api/events?study=sleepy&since={cursor}&timeout=1",
                    headers=auth,
                    timeout=10,
                ).json()
                seen.extend(e["seq"] for e in body["events"])
                cursor = body["latest_seq"]
                if not cancelled:
                    cases = requests.get(
                        f"{base}/api/studies/sleepy/cases", headers=auth, timeout=5
                    ).json()["cases"]
                    running = [c["id"] for c in cases if c["status"] == "Running"]
                    if running:
                        resp = requests.post(
                            f"{base}/api/studies/sleepy/cases/{running[0]}/cancel",
                            headers=auth,
                            timeout=5,
                        )
                        assert resp.status_code == 202
                        cancelled = True
                if any(e["kind"] == "StudyFinished" for e in body["events"]):
                    break
            assert seen == list(range(1, len(seen) + 1))
            assert cancelled
        finally:
            thread.join(timeout=60)
        assert not thread.is_alive()
        assert outcome["result"].counts["Cancelled"] == 1

        # cancelling a finished case is a conflict
        done = [
            c["id"]
            for c in requests.get(f"{base}/api/studies/sleepy/cases", headers=auth, timeout=5).json()[
                "cases"
            ]
            if c["status"] == "Succeeded"
        ]
        resp = requests.post(
            f"{base}/api/studies/sleepy/cases/{done[0]}/cancel", headers=auth, timeout=5
        )
        assert resp.status_code == 409
    finally:
        server.shutdown()
