"""Batch front door: serve, check, prove, eval, and index subcommands.

Exit codes follow CI conventions: 0 for success, 1 when analysis or proofs
fail, 2 for usage and I/O problems. Diagnostic lines print 1-based
line:column so they are clickable in ordinary terminals.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .evaluator import EvalError, evaluate, format_value
from .positions import Severity
from .printer import print_expr
from .prover import (
    ProverError,
    load_and_replay,
    load_script,
    script_filename,
)
from .syntax import FormulaDecl
from .workspace import Workspace, WorkspaceError, uri_from_path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mupvs",
        description="Specification IDE backend: language server and batch tools.",
    )
    parser.add_argument("--version", action="version", version=f"mupvs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the language server")
    mode = serve.add_mutually_exclusive_group()
    mode.add_argument("--stdio", action="store_true", help="serve over stdio (default)")
    mode.add_argument("--port", type=int, help="serve one client over TCP")
    serve.add_argument("--root", type=Path, help="workspace root directory")
    serve.add_argument("--debounce-ms", type=int, default=None)
    serve.add_argument("--pool-size", type=int, default=None)

    check = sub.add_parser("check", help="typecheck files and list obligations")
    check.add_argument("files", nargs="+", type=Path)

    prove = sub.add_parser("prove", help="replay saved proof scripts for a file")
    prove.add_argument("file", type=Path)
    prove.add_argument("--scripts", type=Path, help="directory of *.proof.json scripts")
    prove.add_argument("--pool-size", type=int, default=1, help="parallel replays")

    evaluate_cmd = sub.add_parser("eval", help="evaluate a ground expression")
    evaluate_cmd.add_argument("file", type=Path)
    evaluate_cmd.add_argument("-e", "--expr", required=True)
    evaluate_cmd.add_argument("--theory", help="theory context (default: last in file)")
    evaluate_cmd.add_argument("--fuel", type=int, default=None)

    index = sub.add_parser("index", help="dump the declaration index")
    index.add_argument("files", nargs="+", type=Path)
    index.add_argument("--json", action="store_true", dest="as_json")
    return parser


def _load_workspace(files: list[Path], out) -> Workspace | None:
    """One workspace holding every named file, so imports resolve."""
    workspace = Workspace()
    for path in files:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as err:
            print(f"error: cannot read {path}: {err}", file=out)
            return None
        workspace.upsert_document(uri_from_path(path.resolve()), text, 1)
    return workspace


def _diagnostic_line(path: Path, diag) -> str:
    pos = diag.range.start
    severity = diag.severity.name.lower()
    return f"{path}:{pos.line + 1}:{pos.character + 1}: {severity}: {diag.message}"


def _count(n: int, noun: str) -> str:
    return f"{n} {noun}" if n == 1 else f"{n} {noun}s"


def _cmd_check(args, out) -> int:
    workspace = _load_workspace(args.files, out)
    if workspace is None:
        return 2
    failed = False
    for path in args.files:
        uri = uri_from_path(path.resolve())
        diagnostics = workspace.diagnostics_for(uri)
        errors = [d for d in diagnostics if d.severity is Severity.ERROR]
        failed = failed or bool(errors)
        for diag in diagnostics:
            print(_diagnostic_line(path, diag), file=out)
        tccs = [tcc for result in workspace.results_for(uri) for tcc in result.tccs]
        for tcc in tccs:
            print(f"  {tcc.id}: {print_expr(tcc.obligation)}", file=out)
        print(
            f"{path}: {_count(len(errors), 'error')}, {_count(len(tccs), 'TCC')}",
            file=out,
        )
    return 1 if failed else 0


def _replay_one(workspace, theory: str, formula: str, scripts_dir: Path | None):
    """Returns (status, detail) for one formula; never raises."""
    if scripts_dir is None:
        return "unfinished", "no scripts directory"
    path = scripts_dir / script_filename(theory, formula)
    if not path.is_file():
        return "unfinished", "no script"
    try:
        script = load_script(path)
        ctx = workspace.proof_context(theory)
        tree = load_and_replay(script, ctx)
    except (ProverError, WorkspaceError, json.JSONDecodeError, OSError) as err:
        return "unfinished", str(err)
    if tree.is_proved:
        return "proved", None
    return "unfinished", "script left open goals"


def _cmd_prove(args, out) -> int:
    path = args.file
    if not path.is_file():
        print(f"error: no such file {path}", file=out)
        return 2
    workspace = Workspace(path.resolve().parent)
    try:
        workspace.scan()
    except WorkspaceError as err:
        print(f"error: {err}", file=out)
        return 2
    uri = uri_from_path(path.resolve())
    unit = workspace.document(uri)
    if unit is None:
        print(f"error: {path} is not a .pvs file under its directory", file=out)
        return 2
    if workspace.has_errors(uri):
        for diag in workspace.diagnostics_for(uri):
            print(_diagnostic_line(path, diag), file=out)
        print(f"{path}: typecheck failed; nothing proved", file=out)
        return 1

    targets: list[tuple[str, str]] = []
    for theory in unit.theories:
        for decl in theory.decls:
            if isinstance(decl, FormulaDecl):
                targets.append((theory.name, decl.name))
        result = workspace.result_for_theory(theory.name)
        if result is not None:
            targets.extend((theory.name, tcc.id) for tcc in result.tccs)

    workers = max(1, args.pool_size)
    # Contexts are built once up front: proof_context mutates workspace
    # caches, so only the replays themselves run in parallel.
    for theory_name in {t for t, _ in targets}:
        workspace.proof_context(theory_name)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(
            pool.map(
                lambda target: _replay_one(workspace, *target, args.scripts),
                targets,
            )
        )

    proved = 0
    for (theory_name, formula), (status, detail) in zip(targets, outcomes):
        workspace.set_formula_status(theory_name, formula, status)
        suffix = f" ({detail})" if detail else ""
        print(f"{theory_name}.{formula}: {status}{suffix}", file=out)
        proved += status == "proved"
    print(f"{proved}/{len(targets)} proved", file=out)
    return 0 if proved == len(targets) else 1


def _cmd_eval(args, out) -> int:
    if not args.file.is_file():
        print(f"error: no such file {args.file}", file=out)
        return 2
    workspace = Workspace(args.file.resolve().parent)
    workspace.scan()
    unit = workspace.document(uri_from_path(args.file.resolve()))
    if unit is None:
        print(f"error: {args.file} is not a .pvs file", file=out)
        return 2
    theory = args.theory
    if theory is None:
        if not unit.theories:
            print("error: file declares no theories", file=out)
            return 1
        theory = unit.theories[-1].name
    try:
        ctx = workspace.proof_context(theory)
        kwargs = {} if args.fuel is None else {"fuel": args.fuel}
        value = evaluate(args.expr, ctx.scope, ctx.env, **kwargs)
    except (EvalError, WorkspaceError) as err:
        print(f"error: {err}", file=out)
        return 1
    print(format_value(value), file=out)
    return 0


def _cmd_index(args, out) -> int:
    workspace = _load_workspace(args.files, out)
    if workspace is None:
        return 2
    entries = list(workspace.index.entries())
    if args.as_json:
        print(json.dumps([entry.to_wire() for entry in entries], indent=2), file=out)
        return 0
    for entry in entries:
        pos = entry.range.start
        print(
            f"{entry.name}\t{entry.description}\t{entry.uri}:{pos.line + 1}:{pos.character + 1}",
            file=out,
        )
    return 0


def _cmd_serve(args) -> int:
    from .server import serve_stdio, serve_tcp

    defaults = {}
    if args.debounce_ms is not None:
        defaults["debounceMs"] = args.debounce_ms
    if args.pool_size is not None:
        defaults["poolSize"] = args.pool_size
    root = args.root
    try:
        if args.port is not None:
            serve_tcp(args.port, root=root, defaults=defaults)
        else:
            serve_stdio(root=root, defaults=defaults)
    except OSError as err:
        print(f"error: cannot serve: {err}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 0
    return 0


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; keep both.
        return int(exc.code or 0)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "check":
        return _cmd_check(args, out)
    if args.command == "prove":
        return _cmd_prove(args, out)
    if args.command == "eval":
        return _cmd_eval(args, out)
    if args.command == "index":
        return _cmd_index(args, out)
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
