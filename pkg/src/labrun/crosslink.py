"""Cross-linking of publication artifacts and long-term archival.

A milestone is named idea-venue-stage with an optional suffix; the stage
is one of submission, accepted, revision-N, internal. A manifest lists the
persistent identifiers (DOIs or URLs) of the artifacts belonging to one
milestone: the report, code snapshots, datasets, container images, and the
repository. verify_links() checks that the pieces reference each other
both ways so any one of them leads to all the others. The secondary-data
archive packs the small study outputs into a tar.gz whose bytes depend
only on content, never on build time.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import re
import tarfile
from dataclasses import dataclass, field
from fnmatch import fnmatch
from pathlib import Path
from typing import Any

import yaml

from . import project
from .errors import ArchiveError, ManifestError, TagError

MANIFEST_SCHEMA = 1
MANIFEST_FILE = "manifest.yaml"
ARCHIVE_WARN_BYTES = 1_000_000_000

ROLES = ("report", "code-snapshot", "data", "container", "repository")
FIXED_STAGES = ("submission", "accepted", "internal")

_DOI_RE = re.compile(r"10\.\d{4,9}/\S+\Z")
_URL_RE = re.compile(r"https?://\S+\Z")
_COMMIT_RE = re.compile(r"[0-9a-f]{7,40}\Z")
_REVISION_RE = re.compile(r"[1-9]\d*\Z")
_SEGMENT_RE = re.compile(r"[a-z0-9_.]+\Z")


@dataclass(frozen=True)
class TagParts:
    """Parsed milestone tag: idea, venue, stage, optional suffix."""

    idea: str
    venue: str
    stage: str
    suffix: str | None = None

    def format(self) -> str:
        parts = [self.idea, self.venue, self.stage]
        if self.suffix:
            parts.append(self.suffix)
        return "-".join(parts)


def parse_tag(name: str) -> TagParts:
    """Parse idea-venue-stage[-suffix]; input is lowercased first.

    stage is submission, accepted, internal, or revision-N with integer
    N >= 1. Empty segments (doubled dashes) and unknown stages are
    rejected.
    """
    lowered = name.strip().lower()
    if not lowered:
        raise TagError("empty tag name")
    segments = lowered.split("-")
    if any(seg == "" for seg in segments):
        raise TagError(f"tag {name!r} has an empty segment (doubled or trailing dash)")
    for seg in segments:
        if not _SEGMENT_RE.match(seg):
            raise TagError(
                f"tag segment {seg!r} has unsupported characters"
                " (use lowercase letters, digits, dot, underscore)"
            )
    if len(segments) < 3:
        raise TagError(f"tag {name!r} needs at least idea-venue-stage")

    idea, venue = segments[0], segments[1]
    if segments[2] in FIXED_STAGES:
        stage = segments[2]
        rest = segments[3:]
    elif segments[2] == "revision":
        if len(segments) < 4 or not _REVISION_RE.match(segments[3]):
            raise TagError(
                f"tag {name!r}: revision stage needs a number >= 1, like revision-2"
            )
        stage = f"revision-{segments[3]}"
        rest = segments[4:]
    else:
        raise TagError(
            f"tag {name!r}: unknown stage {segments[2]!r}"
            " (expected submission, accepted, revision-N, or internal)"
        )
    suffix = "-".join(rest) if rest else None
    return TagParts(idea=idea, venue=venue, stage=stage, suffix=suffix)


def is_valid_pid(pid: str) -> bool:
    return bool(_DOI_RE.match(pid) or _URL_RE.match(pid))


def check_pid(pid: str, where: str) -> str:
    if not isinstance(pid, str) or not is_valid_pid(pid):
        raise ManifestError(
            f"invalid persistent identifier in {where}: {pid!r}"
            " (expected a DOI like 10.1234/suffix or an http(s) URL)"
        )
    return pid


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class ArtifactEntry:
    """One artifact of a milestone: its role, PID, and outbound references."""

    role: str
    pid: str
    version: str = ""
    checksum: str = ""
    references: tuple[str, ...] = ()

    def to_mapping(self) -> dict[str, Any]:
        data: dict[str, Any] = {"role": self.role, "pid": self.pid}
        if self.version:
            data["version"] = self.version
        if self.checksum:
            data["checksum"] = self.checksum
        if self.references:
            data["references"] = list(self.references)
        return data


@dataclass(frozen=True)
class ArtifactManifest:
    tag: TagParts
    commit: str
    entries: tuple[ArtifactEntry, ...]

    def entries_for(self, role: str) -> list[ArtifactEntry]:
        return [e for e in self.entries if e.role == role]

    def to_yaml(self) -> str:
        payload = {
            "schema": MANIFEST_SCHEMA,
            "tag": self.tag.format(),
            "commit": self.commit,
            "artifacts": [e.to_mapping() for e in self.entries],
        }
        return yaml.safe_dump(payload, sort_keys=False)


def build_manifest(
    entries: list[dict[str, Any]],
    tag: str | TagParts,
    commit: str,
    base_dir: Path | None = None,
    out_path: Path | None = None,
) -> ArtifactManifest:
    """Validate entries and assemble a milestone manifest.

    Each entry mapping needs role and pid; optional keys are version,
    references (list of PIDs or the milestone tag), and path (a local file
    whose SHA-256 becomes the entry checksum; missing file is an error).
    A milestone requires exactly one report, at least one code snapshot,
    and at least one data entry.
    """
    parts = tag if isinstance(tag, TagParts) else parse_tag(tag)
    if not isinstance(commit, str) or not _COMMIT_RE.match(commit):
        raise ManifestError(f"commit must be an abbreviated or full hex id, got {commit!r}")

    built: list[ArtifactEntry] = []
    tag_name = parts.format()
    for i, raw in enumerate(entries):
        where = f"artifact entry {i}"
        if not isinstance(raw, dict):
            raise ManifestError(f"{where} must be a mapping, got {raw!r}")
        unknown = set(raw) - {"role", "pid", "version", "references", "path", "checksum"}
        if unknown:
            raise ManifestError(f"{where} has unknown keys: {', '.join(sorted(unknown))}")
        role = raw.get("role")
        if role not in ROLES:
            raise ManifestError(f"{where}: role must be one of {ROLES}, got {role!r}")
        pid = check_pid(raw.get("pid"), where)
        version = str(raw.get("version", ""))
        references = raw.get("references", [])
        if not isinstance(references, list):
            raise ManifestError(f"{where}: references must be a list")
        for ref in references:
            if ref != tag_name:
                check_pid(ref, f"{where} references")
        checksum = str(raw.get("checksum", ""))
        path_value = raw.get("path")
        if path_value:
            path = Path(path_value)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            if not path.is_file():
                raise ManifestError(f"{where}: missing file: {path}")
            checksum = sha256_file(path)
        built.append(
            ArtifactEntry(
                role=role,
                pid=pid,
                version=version,
                checksum=checksum,
                references=tuple(references),
            )
        )

    by_role = {role: [e for e in built if e.role == role] for role in ROLES}
    if len(by_role["report"]) != 1:
        raise ManifestError(
            f"a milestone manifest needs exactly one report entry, got {len(by_role['report'])}"
        )
    if not by_role["code-snapshot"]:
        raise ManifestError("a milestone manifest needs at least one code-snapshot entry")
    if not by_role["data"]:
        raise ManifestError("a milestone manifest needs at least one data entry")

    manifest = ArtifactManifest(tag=parts, commit=commit, entries=tuple(built))
    if out_path is not None:
        Path(out_path).write_text(manifest.to_yaml(), encoding="utf-8")
    return manifest


def load_manifest(path: Path) -> ArtifactManifest:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ManifestError(f"manifest {path} is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ManifestError(f"manifest {path} must be a mapping")
    if raw.get("schema") != MANIFEST_SCHEMA:
        raise ManifestError(
            f"manifest schema {raw.get('schema')!r} not supported (expected {MANIFEST_SCHEMA})"
        )
    artifacts = raw.get("artifacts")
    if not isinstance(artifacts, list):
        raise ManifestError(f"manifest {path} has no artifacts list")
    entries = []
    for item in artifacts:
        entries.append(
            {
                "role": item.get("role"),
                "pid": item.get("pid"),
                "version": item.get("version", ""),
                "checksum": item.get("checksum", ""),
                "references": item.get("references", []),
            }
        )
    # Re-validate through the builder so hand-edited manifests get the
    # same checks as freshly built ones.
    rebuilt = []
    parts = parse_tag(str(raw.get("tag", "")))
    commit = str(raw.get("commit", ""))
    if not _COMMIT_RE.match(commit):
        raise ManifestError(f"manifest commit must be a hex id, got {commit!r}")
    tag_name = parts.format()
    for i, item in enumerate(entries):
        where = f"artifact entry {i}"
        role = item["role"]
        if role not in ROLES:
            raise ManifestError(f"{where}: role must be one of {ROLES}, got {role!r}")
        pid = check_pid(item["pid"], where)
        refs = item["references"]
        if not isinstance(refs, list):
            raise ManifestError(f"{where}: references must be a list")
        for ref in refs:
            if ref != tag_name:
                check_pid(ref, f"{where} references")
        rebuilt.append(
            ArtifactEntry(
                role=role,
                pid=pid,
                version=str(item["version"]),
                checksum=str(item["checksum"]),
                references=tuple(refs),
            )
        )
    return ArtifactManifest(tag=parts, commit=commit, entries=tuple(rebuilt))


@dataclass
class LinkReport:
    verdict: str  # Complete | Incomplete
    missing: list[tuple[str, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.verdict == "Complete"

    def to_payload(self) -> dict[str, Any]:
        return {
            "schema": 1,
            "verdict": self.verdict,
            "missing": [list(edge) for edge in self.missing],
        }


def verify_links(manifest: ArtifactManifest) -> LinkReport:
    """Check the cross-reference closure of a milestone.

    Required edges, reported as (from-role, to-role) when missing:
      - the report references every code-snapshot and data PID
      - every code-snapshot, data, and container entry references the
        report PID back
      - report, code-snapshot, and data entries mention the milestone tag
        in their references, written as (role, "tag")
    """
    report_entry = manifest.entries_for("report")[0] if manifest.entries_for("report") else None
    if report_entry is None:
        raise ManifestError("manifest has no report entry to verify against")
    tag_name = manifest.tag.format()
    missing: list[tuple[str, str]] = []

    for role in ("code-snapshot", "data"):
        for entry in manifest.entries_for(role):
            if entry.pid not in report_entry.references:
                missing.append(("report", role))
                break
    for role in ("code-snapshot", "data", "container"):
        for entry in manifest.entries_for(role):
            if report_entry.pid not in entry.references:
                missing.append((role, "report"))
                break
    for role in ("report", "code-snapshot", "data"):
        for entry in manifest.entries_for(role):
            if tag_name not in entry.references:
                missing.append((role, "tag"))
                break

    verdict = "Complete" if not missing else "Incomplete"
    return LinkReport(verdict=verdict, missing=missing)


def matches_any_glob(rel_posix: str, patterns: tuple[str, ...]) -> bool:
    """fnmatch against the study-relative path, or the basename for
    patterns without a slash."""
    name = rel_posix.rsplit("/", 1)[-1]
    for pattern in patterns:
        if fnmatch(rel_posix, pattern):
            return True
        if "/" not in pattern and fnmatch(name, pattern):
            return True
    return False


def _study_archive_files(root: Path, study: str) -> list[tuple[str, Path]]:
    """(archive name, source path) pairs for one study, unfiltered."""
    sdir = project.require_study(root, study)
    config = project.load_config(root, study)
    wanted: list[Path] = []
    for name in (
        "variation.csv",
        "variation.json",
        "variation.yaml",
        project.STUDY_FILE,
        project.SECONDARY_FILE,
        project.DESCRIPTION_FILE,
        project.COMPARISON_FILE,
        project.REPORT_FILE,
        project.SUMMARY_FILE,
    ):
        path = sdir / name
        if path.is_file():
            wanted.append(path)
    status = project.read_status(root, study)
    for case_id in sorted(status.cases):
        cdir = sdir / case_id
        if not cdir.is_dir():
            continue
        case_file = cdir / "case.yaml"
        if case_file.is_file():
            wanted.append(case_file)
        seen = set()
        for pattern in config.outputs:
            for path in sorted(cdir.glob(pattern)):
                if path.is_file() and path not in seen:
                    seen.add(path)
                    wanted.append(path)
    out = []
    for path in wanted:
        rel = path.relative_to(sdir).as_posix()
        out.append((f"{study}/{rel}", path))
    return out


def build_secondary_archive(
    root: Path,
    studies: list[str],
    out_path: Path,
    warn_bytes: int = ARCHIVE_WARN_BYTES,
) -> tuple[Path, str, list[str]]:
    """Pack the small per-study outputs into a reproducible tar.gz.

    Includes, per study: the config and variation tables, secondary.csv,
    per-case case.yaml and secondary CSVs, and the HTML report with its
    summary when present. Files matching the study's primary_globs are
    excluded, and the finished archive is scanned to prove none slipped
    through. Entry order, ownership, permissions, and all timestamps are
    fixed, so identical inputs give identical bytes. Returns the archive
    path, its SHA-256 (also written to <archive>.sha256), and any
    warnings (an archive above warn_bytes is warned about, not refused).
    """
    root = Path(root)
    if not studies:
        raise ArchiveError("no studies given to archive")
    entries: list[tuple[str, Path]] = []
    primaries: dict[str, tuple[str, ...]] = {}
    for study in sorted(set(studies)):
        config = project.load_config(root, study)
        if not (project.study_dir(root, study) / project.SECONDARY_FILE).is_file():
            raise ArchiveError(
                f"study {study} has no merged secondary.csv; collect before archiving"
            )
        primaries[study] = config.primary_globs
        for name, path in _study_archive_files(root, study):
            rel_in_study = name.split("/", 1)[1]
            if matches_any_glob(rel_in_study, config.primary_globs):
                continue
            entries.append((name, path))

    entries.sort(key=lambda pair: pair[0])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    with out_path.open("wb") as raw:
        # mtime=0 and an empty name keep the gzip header constant.
        with gzip.GzipFile(
            filename="", mode="wb", fileobj=raw, compresslevel=9, mtime=0
        ) as gz:
            with tarfile.open(fileobj=gz, mode="w", format=tarfile.USTAR_FORMAT) as tar:
                for name, path in entries:
                    data = path.read_bytes()
                    info = tarfile.TarInfo(name=name)
                    info.size = len(data)
                    info.mtime = 0
                    info.uid = 0
                    info.gid = 0
                    info.uname = ""
                    info.gname = ""
                    info.mode = 0o644
                    tar.addfile(info, io.BytesIO(data))

    _check_exclusions(out_path, primaries)

    digest = sha256_file(out_path)
    (out_path.parent / (out_path.name + ".sha256")).write_text(
        f"{digest}  {out_path.name}\n", encoding="utf-8"
    )
    warnings = []
    size = out_path.stat().st_size
    if size > warn_bytes:
        warnings.append(
            f"archive is {size} bytes, above the {warn_bytes} byte threshold;"
            " move more outputs under primary_globs or split the archive"
        )
    return out_path, digest, warnings


def _check_exclusions(archive: Path, primaries: dict[str, tuple[str, ...]]) -> None:
    """Post-build scan: no archived member may match its study's primary globs."""
    with tarfile.open(archive, mode="r:gz") as tar:
        for member in tar.getmembers():
            study, _, rel = member.name.partition("/")
            patterns = primaries.get(study, ())
            if rel and matches_any_glob(rel, patterns):
                raise ArchiveError(
                    f"primary data leaked into archive: {member.name}"
                    " (exclusion check failed, archive should be discarded)"
                )
