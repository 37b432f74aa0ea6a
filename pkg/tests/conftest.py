from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from labrun import runner
from labrun.paramspace import StudyConfig, parse_study_config

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report: pytest.TestReport) -> None:
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::", 1)[1]
    _acceptance_results.append((name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        label = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"{label}  {name}")


@pytest.fixture
def root(tmp_path: Path) -> Path:
    """Empty project root."""
    out = tmp_path / "proj"
    out.mkdir()
    return out


def make_config(text: str) -> StudyConfig:
    return parse_study_config(textwrap.dedent(text))


@pytest.fixture
def sleep_study(root: Path, tmp_path: Path):
    """Factory for a study whose cases just sleep (and optionally fail)."""

    def build(
        name: str = "sleepy",
        count: int = 4,
        duration: float = 0.2,
        fail_ids: tuple[int, ...] = (),
    ) -> StudyConfig:
        fail_clause = ""
        if fail_ids:
            cond = " -o ".join(f'"{{{{CASE}}}}" = "{i}"' for i in fail_ids)
            fail_clause = f"if [ {cond} ]; then exit 7; fi; "
        config = make_config(
            f"""
            name: {name}
            varied:
              CASE: {list(range(count))}
            command: >-
              {fail_clause}sleep {duration} && echo IDX,VALUE > out.csv
              && echo "{{{{CASE}}}},1" >> out.csv
            outputs: [out.csv]
            """
        )
        runner.materialize(config, root, source_dir=tmp_path)
        return config

    return build
