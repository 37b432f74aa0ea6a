"""Command line interface.

Exit codes are part of the contract so pipelines can branch on them:

    run          0 all succeeded, 3 any case failed, 4 any case cancelled
    compare      0 pass, 2 fail
    verify-links 0 complete, 2 incomplete
    lint-recipe  0 clean, 1 warnings, 2 errors

Everything else exits 0 on success, 1 on a labrun error, and 2 on bad
usage (argparse's convention).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, api, compare, crosslink, recipelint, report, runner
from .datastore import filter_table, load_study_secondary, merge_study_table
from .errors import LabrunError
from .paramspace import DEFAULT_MAX_CASES, load_study_config


def _root_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--root",
        type=Path,
        default=None,
        help="project root holding the studies (default: $LABRUN_ROOT or the current directory)",
    )


def _resolve_root(args: argparse.Namespace) -> Path:
    if args.root is not None:
        return args.root
    env = os.environ.get("LABRUN_ROOT")
    return Path(env) if env else Path.cwd()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labrun",
        description="Parameter studies: expand, run, collect, check, archive, report.",
    )
    parser.add_argument("--version", action="version", version=f"labrun {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("materialize", help="expand a study config into case directories")
    p.add_argument("config", type=Path, help="study YAML file")
    p.add_argument("--force", action="store_true", help="replace an existing study directory")
    p.add_argument(
        "--max-cases",
        type=int,
        default=DEFAULT_MAX_CASES,
        help=f"refuse to expand beyond this many cases (default {DEFAULT_MAX_CASES})",
    )
    _root_arg(p)

    p = sub.add_parser("run", help="execute the pending cases of a study")
    p.add_argument("study")
    p.add_argument("--max-parallel", type=int, default=None, help="case slots (default: CPU count)")
    _root_arg(p)

    p = sub.add_parser("cancel", help="cancel one case")
    p.add_argument("study")
    p.add_argument("case_id")
    _root_arg(p)

    p = sub.add_parser("status", help="show per-case statuses")
    p.add_argument("study")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    _root_arg(p)

    p = sub.add_parser("collect", help="merge per-case secondary CSVs into secondary.csv")
    p.add_argument("study")
    _root_arg(p)

    p = sub.add_parser("show", help="print the merged secondary table, optionally filtered")
    p.add_argument("study")
    p.add_argument(
        "--where",
        action="append",
        default=[],
        metavar="COL=VALUE",
        help="keep rows whose column equals the value (repeatable)",
    )
    _root_arg(p)

    p = sub.add_parser("compare", help="compare secondary.csv against a reference")
    p.add_argument("study")
    p.add_argument("--reference", type=Path, required=True, help="directory holding the reference secondary.csv")
    p.add_argument("--abs-tol", type=float, default=0.0, help="global absolute tolerance")
    p.add_argument("--rel-tol", type=float, default=0.0, help="global relative tolerance")
    p.add_argument(
        "--col-abs",
        action="append",
        default=[],
        metavar="COL=TOL",
        help="per-column absolute tolerance (repeatable)",
    )
    p.add_argument(
        "--col-rel",
        action="append",
        default=[],
        metavar="COL=TOL",
        help="per-column relative tolerance (repeatable)",
    )
    p.add_argument(
        "--key",
        action="append",
        default=[],
        metavar="COL",
        help="row key column (repeatable; default: ID plus all parameters)",
    )
    p.add_argument("--nan-equal", action="store_true", help="NaN compares equal to NaN")
    p.add_argument("--json", action="store_true", help="print the full JSON report")
    _root_arg(p)

    p = sub.add_parser("bless", help="promote secondary.csv to be the reference")
    p.add_argument("study")
    p.add_argument("--reference", type=Path, required=True, help="reference directory to update")
    _root_arg(p)

    p = sub.add_parser("tag", help="milestone tag utilities")
    tag_sub = p.add_subparsers(dest="tag_command", required=True)
    tp = tag_sub.add_parser("check", help="validate a milestone tag name")
    tp.add_argument("name")

    p = sub.add_parser("manifest", help="artifact manifest utilities")
    man_sub = p.add_subparsers(dest="manifest_command", required=True)
    mp = man_sub.add_parser("build", help="build manifest.yaml from a spec file")
    mp.add_argument("spec", type=Path, help="YAML with tag, commit, artifacts")
    mp.add_argument("--out", type=Path, default=None, help="output path (default: manifest.yaml next to the spec)")

    p = sub.add_parser("verify-links", help="check the cross-references of a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("archive", help="build the deterministic secondary-data archive")
    p.add_argument("studies", nargs="+", help="study names to include")
    p.add_argument("--out", type=Path, required=True, help="output .tar.gz path")
    _root_arg(p)

    p = sub.add_parser("report", help="generate the HTML report for a study, or the index")
    p.add_argument("study", nargs="?", help="study name (omit with --index)")
    p.add_argument("--index", action="store_true", help="generate the cross-study index")
    p.add_argument(
        "--chart",
        action="append",
        default=[],
        metavar="X:Y:GROUP",
        help="line chart of Y over X, one line per GROUP value (repeatable)",
    )
    p.add_argument(
        "--clock",
        default=None,
        metavar="ISO8601",
        help="fixed generation timestamp, for reproducible bytes",
    )
    _root_arg(p)

    p = sub.add_parser("lint-recipe", help="check a container recipe for reproducibility")
    p.add_argument("recipe", type=Path)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("demo", help="bundled example studies and recipes")
    demo_sub = p.add_subparsers(dest="demo_command", required=True)
    demo_sub.add_parser("list", help="show what is bundled")
    dp = demo_sub.add_parser("export", help="copy a demo study to a writable directory")
    dp.add_argument("name")
    dp.add_argument("dest", type=Path)

    p = sub.add_parser("serve", help="serve the status API and dashboard")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--token", default=None, help="require this bearer token on /api requests")
    p.add_argument("--poll-timeout", type=float, default=25.0, help="maximum long-poll seconds")
    _root_arg(p)

    return parser


def _parse_col_tols(pairs: list[str], what: str) -> dict[str, float]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise LabrunError(f"{what} expects COL=TOL, got {pair!r}")
        col, _, tol = pair.partition("=")
        try:
            out[col] = float(tol)
        except ValueError:
            raise LabrunError(f"{what}: {tol!r} is not a number") from None
    return out


def _cmd_materialize(args: argparse.Namespace) -> int:
    config = load_study_config(args.config)
    cases = runner.materialize(
        config,
        _resolve_root(args),
        force=args.force,
        source_dir=args.config.resolve().parent,
        max_cases=args.max_cases,
    )
    print(f"materialized {len(cases)} cases of study {config.name}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    result = runner.run(_resolve_root(args), args.study, max_parallel=args.max_parallel)
    summary = " ".join(f"{k}={v}" for k, v in result.counts.items() if v)
    print(f"study {args.study}: {summary}")
    return result.exit_code


def _cmd_cancel(args: argparse.Namespace) -> int:
    ack = runner.cancel(_resolve_root(args), args.study, args.case_id)
    print(f"case {ack.case_id}: {ack.action} (status {ack.status})")
    return 0


def _cmd_status(args: argparse.Namespace) -> int:
    status = runner.study_status(_resolve_root(args), args.study)
    if args.json:
        print(json.dumps(status.to_payload(), indent=2))
        return 0
    print(f"study {status.study}: {status.total} cases, latest event {status.latest_seq}")
    for key, value in status.counts.items():
        if value:
            print(f"  {key}: {value}")
    for case_id, case_status in status.cases.items():
        print(f"  {case_id}  {case_status.value}")
    return 0


def _cmd_collect(args: argparse.Namespace) -> int:
    table = merge_study_table(_resolve_root(args), args.study)
    print(
        f"wrote secondary.csv with {len(table.rows)} rows"
        f" ({len(table.result_columns)} result columns)"
    )
    return 0


def _cmd_show(args: argparse.Namespace) -> int:
    table = load_study_secondary(_resolve_root(args), args.study)
    conditions = {}
    for pair in args.where:
        if "=" not in pair:
            raise LabrunError(f"--where expects COL=VALUE, got {pair!r}")
        col, _, value = pair.partition("=")
        conditions[col] = value
    if conditions:
        table = filter_table(table, conditions)
    sys.stdout.write(table.to_csv_bytes().decode("ascii"))
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    root = _resolve_root(args)
    kwargs = {
        "abs_tol": args.abs_tol,
        "rel_tol": args.rel_tol,
        "col_abs": _parse_col_tols(args.col_abs, "--col-abs"),
        "col_rel": _parse_col_tols(args.col_rel, "--col-rel"),
        "nan_equal": args.nan_equal,
    }
    spec = None
    if args.key:
        spec = compare.ComparisonSpec(key_columns=tuple(args.key), **kwargs)
        result = compare.compare_study(root, args.study, args.reference, spec=spec)
    else:
        result = compare.compare_study(root, args.study, args.reference, **kwargs)
    if args.json:
        print(result.to_json(), end="")
    else:
        for line in result.summary_lines():
            print(line)
    return 0 if result.passed else 2


def _cmd_bless(args: argparse.Namespace) -> int:
    target = compare.bless(_resolve_root(args), args.study, args.reference)
    print(f"blessed {args.study} secondary table into {target}")
    return 0


def _cmd_tag_check(args: argparse.Namespace) -> int:
    parts = crosslink.parse_tag(args.name)
    suffix = f" suffix={parts.suffix}" if parts.suffix else ""
    print(f"ok: idea={parts.idea} venue={parts.venue} stage={parts.stage}{suffix}")
    return 0


def _cmd_manifest_build(args: argparse.Namespace) -> int:
    import yaml

    raw = yaml.safe_load(args.spec.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise LabrunError(f"manifest spec {args.spec} must be a mapping")
    out = args.out if args.out is not None else args.spec.parent / crosslink.MANIFEST_FILE
    manifest = crosslink.build_manifest(
        entries=raw.get("artifacts", []),
        tag=str(raw.get("tag", "")),
        commit=str(raw.get("commit", "")),
        base_dir=args.spec.resolve().parent,
        out_path=out,
    )
    print(f"wrote {out} with {len(manifest.entries)} artifacts for tag {manifest.tag.format()}")
    return 0


def _cmd_verify_links(args: argparse.Namespace) -> int:
    manifest = crosslink.load_manifest(args.manifest)
    result = crosslink.verify_links(manifest)
    if args.json:
        print(json.dumps(result.to_payload(), indent=2))
    else:
        print(f"verdict: {result.verdict}")
        for src, dst in result.missing:
            print(f"  missing link: {src} -> {dst}")
    return 0 if result.complete else 2


def _cmd_archive(args: argparse.Namespace) -> int:
    path, digest, warnings = crosslink.build_secondary_archive(
        _resolve_root(args), args.studies, args.out
    )
    print(f"wrote {path}")
    print(f"sha256 {digest}")
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    root = _resolve_root(args)
    if args.index:
        out = report.generate_index(root)
        print(f"wrote {out}")
        return 0
    if not args.study:
        raise LabrunError("report needs a study name, or --index")
    clock = None
    if args.clock is not None:
        # fromisoformat only grew Z-suffix support in 3.11
        text = args.clock[:-1] + "+00:00" if args.clock.endswith("Z") else args.clock
        try:
            clock = datetime.fromisoformat(text)
        except ValueError:
            raise LabrunError(f"--clock must be an ISO 8601 timestamp, got {args.clock!r}") from None
        if clock.tzinfo is None:
            clock = clock.replace(tzinfo=timezone.utc)
    charts = [report.ChartSpec.parse(c) for c in args.chart]
    html_path, summary_path = report.generate_study_report(
        root, args.study, charts=charts, clock=clock
    )
    print(f"wrote {html_path}")
    print(f"wrote {summary_path}")
    return 0


def _cmd_lint_recipe(args: argparse.Namespace) -> int:
    findings = recipelint.lint_recipe(args.recipe)
    if args.json:
        payload = [
            {
                "rule": f.rule,
                "severity": f.severity,
                "line": f.line,
                "message": f.message,
                "excerpt": f.excerpt,
            }
            for f in findings
        ]
        print(json.dumps(payload, indent=2))
    else:
        for finding in findings:
            print(f"{args.recipe}:{finding.format()}")
        if not findings:
            print(f"{args.recipe}: clean")
    return recipelint.exit_code_for(findings)


def _cmd_demo(args: argparse.Namespace) -> int:
    from . import demos

    if args.demo_command == "list":
        for name in demos.STUDIES:
            print(f"study  {name}  ({demos.demo_dir(name) / 'study.yaml'})")
        for name in demos.RECIPES:
            print(f"recipe {name}  ({demos.recipe_path(name)})")
        return 0
    target = demos.export(args.name, args.dest)
    print(f"exported demo {args.name} to {target}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    config = api.ApiConfig(
        root=_resolve_root(args),
        host=args.host,
        port=args.port,
        token=args.token,
        poll_timeout=args.poll_timeout,
    )
    server = api.serve(config)
    print(f"serving {config.root} on {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


_COMMANDS = {
    "materialize": _cmd_materialize,
    "run": _cmd_run,
    "cancel": _cmd_cancel,
    "status": _cmd_status,
    "collect": _cmd_collect,
    "show": _cmd_show,
    "compare": _cmd_compare,
    "bless": _cmd_bless,
    "verify-links": _cmd_verify_links,
    "archive": _cmd_archive,
    "report": _cmd_report,
    "lint-recipe": _cmd_lint_recipe,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "tag":
            return _cmd_tag_check(args)
        if args.command == "manifest":
            return _cmd_manifest_build(args)
        if args.command == "demo":
            return _cmd_demo(args)
        return _COMMANDS[args.command](args)
    except LabrunError as exc:
        print(f"labrun: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("labrun: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
