"""Static checks on Apptainer/Singularity definition files.

The rules encode reproducibility practice for container recipes: pin the
base image, prefer online sources with guaranteed availability over files
copied from the build context, and pin whatever gets installed.

    R1 (error)   base image reference has no version tag or digest
    R2 (warning) %files copies a local file into the image
    R3 (warning) a package installation without pinned versions
    R4 (warning) git clone without a branch, tag, or chained checkout

R3 and R4 are heuristics over common package managers and shell habits;
they can miss exotic constructs. Findings carry line numbers and are
ordered by line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import RecipeError

SEVERITY = {"R1": "error", "R2": "warning", "R3": "warning", "R4": "warning"}

_HEADER_RE = re.compile(r"([A-Za-z][A-Za-z0-9_]*)\s*:\s*(.*)\Z")
_SECTION_RE = re.compile(r"%([A-Za-z]+)\b(.*)\Z")

# Installer verbs: (tokens that start the command, subcommand that installs)
_INSTALLERS = (
    (("apt-get",), "install"),
    (("apt",), "install"),
    (("yum",), "install"),
    (("dnf",), "install"),
    (("zypper",), "install"),
    (("apk",), "add"),
    (("pip",), "install"),
    (("pip2",), "install"),
    (("pip3",), "install"),
    (("python", "-m", "pip"), "install"),
    (("python3", "-m", "pip"), "install"),
    (("conda",), "install"),
    (("mamba",), "install"),
    (("npm",), "install"),
)

_PIN_MARKS = ("==", "=", "@")


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: str
    line: int
    message: str
    excerpt: str

    def format(self) -> str:
        return f"{self.line}: {self.rule} {self.severity}: {self.message}"


@dataclass
class _Line:
    number: int
    text: str


def _parse_sections(text: str) -> tuple[dict[str, str | int], dict[str, list[_Line]]]:
    """Split a definition file into header keywords and section bodies.

    Returns (header mapping plus line numbers, section name to lines).
    Garbled header lines raise RecipeError with their position.
    """
    header: dict[str, str | int] = {}
    sections: dict[str, list[_Line]] = {}
    current: list[_Line] | None = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        stripped = line.strip()
        section_match = _SECTION_RE.match(stripped)
        if section_match and not stripped.startswith("#"):
            name = section_match.group(1).lower()
            current = sections.setdefault(name, [])
            continue
        if current is not None:
            current.append(_Line(number, line))
            continue
        if not stripped or stripped.startswith("#"):
            continue
        m = _HEADER_RE.match(stripped)
        if not m:
            raise RecipeError(f"line {number}: cannot parse header line: {stripped!r}")
        key = m.group(1).lower()
        header[key] = m.group(2).strip()
        header[f"_{key}_line"] = number
    return header, sections


def _joined_commands(lines: list[_Line]) -> list[_Line]:
    """Merge backslash continuations so multi-line commands are analyzed whole."""
    out: list[_Line] = []
    buffer = ""
    start = 0
    for item in lines:
        text = item.text
        if buffer:
            buffer += " " + text.strip()
        else:
            buffer = text
            start = item.number
        if buffer.rstrip().endswith("\\"):
            buffer = buffer.rstrip()[:-1].rstrip()
            continue
        out.append(_Line(start, buffer))
        buffer = ""
    if buffer:
        out.append(_Line(start, buffer))
    return out


def _base_image_pinned(ref: str) -> bool:
    if "@" in ref:
        return True  # digest pin
    tail = ref.rsplit("/", 1)[-1]
    if ":" not in tail:
        return False
    tag = tail.rsplit(":", 1)[1]
    return bool(tag) and tag.lower() != "latest"


def _subcommands(line: str) -> list[str]:
    # Shell operators split a line into independently checked commands.
    return [part for part in re.split(r"&&|\|\||;|\|", line) if part.strip()]


def _unpinned_packages(tokens: list[str], install_word: str) -> list[str]:
    """Package tokens after the install verb that carry no version pin."""
    try:
        at = tokens.index(install_word)
    except ValueError:
        return []
    unpinned = []
    skip_next = False
    for token in tokens[at + 1:]:
        if skip_next:
            skip_next = False
            continue
        if token.startswith("-"):
            # Options with a separate argument (requirement files, channels).
            if token in ("-r", "--requirement", "-c", "--channel", "-f", "--find-links"):
                skip_next = True
            continue
        if "/" in token or token.startswith(".") or token.endswith((".whl", ".deb", ".rpm", ".tar.gz")):
            continue  # local or remote file, not a named package
        if any(mark in token for mark in _PIN_MARKS):
            continue
        unpinned.append(token)
    return unpinned


def _match_installer(tokens: list[str]) -> tuple[str, str] | None:
    for prefix, verb in _INSTALLERS:
        if tuple(tokens[: len(prefix)]) == prefix and verb in tokens[len(prefix):]:
            return " ".join(prefix), verb
    return None


def lint_text(text: str) -> list[LintFinding]:
    header, sections = _parse_sections(text)
    findings: list[LintFinding] = []

    base = header.get("from")
    if isinstance(base, str) and base:
        if not _base_image_pinned(base):
            findings.append(
                LintFinding(
                    rule="R1",
                    severity=SEVERITY["R1"],
                    line=int(header.get("_from_line", 1)),
                    message=(
                        f"base image {base!r} is not pinned to a version tag or digest;"
                        " the build will drift as the upstream tag moves"
                    ),
                    excerpt=base,
                )
            )

    for item in sections.get("files", []):
        stripped = item.text.strip()
        if not stripped or stripped.startswith("#"):
            continue
        source = stripped.split()[0]
        findings.append(
            LintFinding(
                rule="R2",
                severity=SEVERITY["R2"],
                line=item.number,
                message=(
                    f"{source!r} is copied from the local build context; prefer pulling"
                    " from an online source with guaranteed availability so the recipe"
                    " builds anywhere"
                ),
                excerpt=stripped,
            )
        )

    command_lines: list[_Line] = []
    for section in ("post", "setup", "test"):
        command_lines.extend(_joined_commands(sections.get(section, [])))
    for item in sorted(command_lines, key=lambda l: l.number):
        stripped = item.text.strip()
        if not stripped or stripped.startswith("#"):
            continue
        for sub in _subcommands(stripped):
            tokens = sub.split()
            if not tokens:
                continue
            matched = _match_installer(tokens)
            if matched is not None:
                unpinned = _unpinned_packages(tokens, matched[1])
                if unpinned:
                    findings.append(
                        LintFinding(
                            rule="R3",
                            severity=SEVERITY["R3"],
                            line=item.number,
                            message=(
                                f"{matched[0]} installs unpinned packages:"
                                f" {', '.join(unpinned)}; pin exact versions"
                            ),
                            excerpt=sub.strip(),
                        )
                    )
            if "git" in tokens and "clone" in tokens:
                pinned = any(
                    t in ("-b", "--branch", "--revision") for t in tokens
                ) or "checkout" in stripped
                if not pinned:
                    findings.append(
                        LintFinding(
                            rule="R4",
                            severity=SEVERITY["R4"],
                            line=item.number,
                            message=(
                                "git clone without a pinned tag, branch, or commit;"
                                " add --branch <tag> or a chained git checkout"
                            ),
                            excerpt=sub.strip(),
                        )
                    )

    findings.sort(key=lambda f: (f.line, f.rule))
    return findings


def lint_recipe(path: Path) -> list[LintFinding]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RecipeError(f"cannot read recipe {path}: {exc}") from None
    return lint_text(text)


def exit_code_for(findings: list[LintFinding]) -> int:
    """0 clean, 1 warnings only, 2 any error."""
    if any(f.severity == "error" for f in findings):
        return 2
    if findings:
        return 1
    return 0
