from __future__ import annotations

import textwrap

import pytest

from labrun import demos
from labrun.errors import RecipeError
from labrun.recipelint import exit_code_for, lint_recipe, lint_text


def lint(text: str):
    return lint_text(textwrap.dedent(text))


def test_bundled_clean_recipe_has_no_findings():
    findings = lint_recipe(demos.recipe_path("clean.def"))
    assert findings == []
    assert exit_code_for(findings) == 0


def test_bundled_dirty_recipe_finding_set():
    findings = lint_recipe(demos.recipe_path("dirty.def"))
    assert [(f.rule, f.severity, f.line) for f in findings] == [
        ("R1", "error", 2),
        ("R2", "warning", 5),
        ("R3", "warning", 9),
    ]
    assert exit_code_for(findings) == 2


@pytest.mark.parametrize(
    "ref,pinned",
    [
        ("ubuntu", False),
        ("ubuntu:latest", False),
        ("ubuntu:22.04", True),
        ("ubuntu@sha256:abcd", True),
        ("registry.example.com:5000/team/image", False),
        ("registry.example.com:5000/team/image:1.2", True),
    ],
)
def test_r1_base_image_pinning(ref, pinned):
    findings = lint(
        f"""
        Bootstrap: docker
        From: {ref}
        """
    )
    rules = [f.rule for f in findings]
    assert ("R1" in rules) == (not pinned)


def test_r1_is_an_error_severity():
    findings = lint("Bootstrap: docker\nFrom: ubuntu\n")
    assert findings[0].severity == "error"


def test_r2_flags_each_files_line():
    findings = lint(
        """
        Bootstrap: docker
        From: ubuntu:22.04

        %files
            ./data.h5 /data/
            ./config.yaml /etc/app.yaml
        """
    )
    assert [f.rule for f in findings] == ["R2", "R2"]
    assert findings[0].line < findings[1].line


@pytest.mark.parametrize(
    "command,expect",
    [
        ("apt-get install -y gcc", True),
        ("apt-get install -y gcc=4:11.2.0-1ubuntu1", False),
        ("apt-get update", False),
        ("pip3 install numpy", True),
        ("pip3 install numpy==1.26.4", False),
        ("pip install -r requirements.txt", False),
        ("python3 -m pip install scipy", True),
        ("conda install -c conda-forge fenics", True),
        ("conda install fenics=2019.1.0", False),
        ("apk add bash", True),
        ("npm install", False),
    ],
)
def test_r3_unpinned_install_heuristic(command, expect):
    findings = lint(
        f"""
        Bootstrap: docker
        From: ubuntu:22.04

        %post
            {command}
        """
    )
    assert (any(f.rule == "R3" for f in findings)) == expect


def test_r3_joins_backslash_continuations():
    findings = lint(
        """
        Bootstrap: docker
        From: ubuntu:22.04

        %post
            apt-get install -y \\
                gcc=4:11.2.0-1ubuntu1 \\
                make=4.3-4.1build1
        """
    )
    assert findings == []


def test_r3_line_number_is_start_of_continuation():
    findings = lint(
        """
        Bootstrap: docker
        From: ubuntu:22.04

        %post
            apt-get install -y \\
                gcc
        """
    )
    assert [f.rule for f in findings] == ["R3"]
    assert findings[0].line == 6


@pytest.mark.parametrize(
    "command,expect",
    [
        ("git clone https://example.org/x.git", True),
        ("git clone -b v1.2 https://example.org/x.git", False),
        ("git clone --branch v1.2 https://example.org/x.git", False),
        ("git clone https://example.org/x.git && cd x && git checkout 1a2b3c4", False),
    ],
)
def test_r4_git_clone_pinning(command, expect):
    findings = lint(
        f"""
        Bootstrap: docker
        From: ubuntu:22.04

        %post
            {command}
        """
    )
    assert (any(f.rule == "R4" for f in findings)) == expect


def test_findings_ordered_by_line():
    findings = lint(
        """
        Bootstrap: docker
        From: ubuntu

        %files
            ./a /a

        %post
            pip3 install numpy
            git clone https://example.org/x.git
        """
    )
    assert [f.rule for f in findings] == ["R1", "R2", "R3", "R4"]
    lines = [f.line for f in findings]
    assert lines == sorted(lines)


def test_garbled_header_line_is_a_parse_error():
    with pytest.raises(RecipeError, match="line 2"):
        lint("Bootstrap: docker\nthis is not a header\n")


def test_comments_and_blanks_ignored():
    findings = lint(
        """
        # build definition
        Bootstrap: docker
        From: ubuntu:22.04

        %post
            # pinned on purpose
            pip3 install numpy==1.26.4
        """
    )
    assert findings == []


def test_exit_codes():
    clean: list = []
    warn = lint("Bootstrap: docker\nFrom: ubuntu:22.04\n%files\n ./x /x\n")
    err = lint("Bootstrap: docker\nFrom: ubuntu\n")
    assert exit_code_for(clean) == 0
    assert exit_code_for(warn) == 1
    assert exit_code_for(err) == 2
