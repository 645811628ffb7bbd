"""The language server: one dispatcher, LSP providers, and pvs/* requests.

Incoming messages are routed on the reader thread. Slow prover commands run
on their session's worker and answer through a completion callback, so the
dispatcher never blocks behind a long proof and $/cancelRequest can reach a
command that is still queued. Workspace access is serialized by one lock;
diagnostic publishes happen under it, which pins the published version tag
to the latest acknowledged edit.
"""

from __future__ import annotations

import re
import socket
import sys
import threading
from typing import Callable, Union

from . import rpc
from . import syntax as S
from .evaluator import DEFAULT_FUEL, EvalError, evaluate, format_value
from .lexer import KEYWORDS, TokenKind
from .positions import Range, Severity, SourcePos
from .printer import print_expr, print_type
from .prover import ProverError
from .scheduler import Debouncer, TimerScheduler
from .sessions import FormulaRef, SessionError, SessionPool
from .typecheck import resolve_symbol, type_to_syntax
from .typesys import RecordValue, SubtypeValue
from .workspace import Workspace, WorkspaceError, path_from_uri

from . import __version__

# Domain error codes carried in JSON-RPC error responses; the full table
# with meanings lives in protocol.md and must stay in sync with this map.
ERROR_CODES = {
    "double-initialize": 2001,
    "not-initialized": 2002,
    "document-not-open": 2003,
    "stale-version": 2004,
    "theory-not-found": 2005,
    "formula-not-found": 2006,
    "not-typechecked": 2007,
    "typecheck-failed": 2008,
    "duplicate-session": 2009,
    "unknown-session": 2010,
    "session-done": 2011,
    "parse-error": 2012,
    "type-error": 2013,
    "eval-error": 2014,
    "fuel-exhausted": 2015,
    "read-only-symbol": 2016,
    "capture": 2017,
    "invalid-identifier": 2018,
    "io-error": 2019,
    "invalid-params": 2020,
}

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_ACCESS_TAIL = re.compile(r"([A-Za-z][A-Za-z0-9_]*)`([A-Za-z][A-Za-z0-9_]*)?$")

_SNIPPETS = (
    ("if-then-else", "IF ${1:cond} THEN ${2:expr} ELSE ${3:expr} ENDIF"),
    ("let-in", "LET ${1:name} = ${2:expr} IN ${3:body}"),
    ("forall", "FORALL (${1:x}: ${2:int}): ${3:body}"),
    ("theory", "${1:name}: THEORY\nBEGIN\n  ${0}\nEND ${1:name}"),
)

_COMPLETION_KINDS = {
    "function": 3,
    "const": 21,
    "type": 7,
    "built-in type": 7,
    "formula": 18,
    "tcc": 18,
}

_DEFERRED = object()


class ServerError(Exception):
    """A request failure with a stable numeric code."""

    def __init__(self, kind: str, message: str, data=None):
        super().__init__(message)
        self.kind = kind
        self.code = ERROR_CODES[kind]
        self.data = data


def _error_code(err: Exception) -> int:
    kind = getattr(err, "kind", None)
    if isinstance(err, EvalError) and kind not in ERROR_CODES:
        return ERROR_CODES["eval-error"]
    return ERROR_CODES.get(kind, rpc.INTERNAL_ERROR)


def _position(params: dict) -> SourcePos:
    return SourcePos.from_wire(params["position"])


def _type_text(tv) -> str:
    try:
        return print_type(type_to_syntax(tv))
    except TypeError:
        return ""


class LanguageServer:
    """Protocol state machine; `send` receives every outgoing payload."""

    def __init__(
        self,
        send: Callable[[dict], None],
        root=None,
        scheduler=None,
        defaults: Union[dict, None] = None,
    ):
        self._send = send
        self._root = root
        self._defaults = dict(defaults or {})
        self._scheduler = scheduler if scheduler is not None else TimerScheduler()
        self._workspace: Union[Workspace, None] = None
        self._pool: Union[SessionPool, None] = None
        self._debounce: Union[Debouncer, None] = None
        self._eval_fuel = DEFAULT_FUEL
        self._ws_lock = threading.RLock()
        self._inflight: dict = {}
        self._inflight_lock = threading.Lock()
        self._initialized = False
        self._shutdown = False
        self.exited = False

        self._requests = {
            "initialize": self._initialize,
            "shutdown": self._handle_shutdown,
            "textDocument/hover": self._hover,
            "textDocument/definition": self._definition,
            "textDocument/completion": self._completion,
            "textDocument/codeLens": self._code_lens,
            "textDocument/rename": self._rename,
            "pvs/typecheck": self._pvs_typecheck,
            "pvs/theories": self._pvs_theories,
            "pvs/prove-formula": self._pvs_prove_formula,
            "pvs/proof-command": self._pvs_proof_command,
            "pvs/quit-proof": self._pvs_quit_proof,
            "pvs/evaluate": self._pvs_evaluate,
        }
        self._notifications = {
            "initialized": lambda params: None,
            "exit": self._exit,
            "textDocument/didOpen": self._did_open,
            "textDocument/didChange": self._did_change,
            "textDocument/didClose": self._did_close,
            "$/cancelRequest": self._cancel_request,
        }

    # -- dispatch ----------------------------------------------------------

    def dispatch(self, message: dict) -> None:
        if not isinstance(message, dict) or "method" not in message:
            return  # a response from the client; nothing awaits one
        method = message["method"]
        params = message.get("params") or {}
        if "id" in message:
            self._dispatch_request(message["id"], method, params)
        else:
            self._dispatch_notification(method, params)

    def _dispatch_request(self, msg_id, method: str, params: dict) -> None:
        if not self._initialized and method != "initialize":
            self._send(
                rpc.error_response(
                    msg_id, rpc.SERVER_NOT_INITIALIZED, "server is not initialized"
                )
            )
            return
        if self._shutdown:
            self._send(
                rpc.error_response(
                    msg_id, rpc.INVALID_REQUEST, "server is shutting down"
                )
            )
            return
        handler = self._requests.get(method)
        if handler is None:
            self._send(
                rpc.error_response(msg_id, rpc.METHOD_NOT_FOUND, f"unknown method {method}")
            )
            return
        try:
            result = handler(msg_id, params)
        except ServerError as err:
            self._send(rpc.error_response(msg_id, err.code, str(err), err.data))
        except (WorkspaceError, SessionError, ProverError, EvalError) as err:
            self._send(rpc.error_response(msg_id, _error_code(err), str(err)))
        except (KeyError, TypeError, ValueError) as err:
            self._send(
                rpc.error_response(
                    msg_id, rpc.INVALID_PARAMS, f"bad params for {method}: {err}"
                )
            )
        except Exception as err:  # one poisoned request must not kill the loop
            self._send(
                rpc.error_response(msg_id, rpc.INTERNAL_ERROR, f"{type(err).__name__}: {err}")
            )
        else:
            if result is not _DEFERRED:
                self._send(rpc.response(msg_id, result))

    def _dispatch_notification(self, method: str, params: dict) -> None:
        if not self._initialized and method != "exit":
            return
        handler = self._notifications.get(method)
        if handler is None:
            return
        try:
            handler(params)
        except Exception:
            pass  # notifications never answer, so swallow and keep serving

    # -- lifecycle ---------------------------------------------------------

    def _initialize(self, msg_id, params: dict):
        if self._initialized:
            raise ServerError("double-initialize", "server is already initialized")
        options = {**self._defaults, **(params.get("initializationOptions") or {})}
        root = self._root
        root_uri = params.get("rootUri")
        if root_uri:
            root = path_from_uri(root_uri)
        debounce_ms = options.get("debounceMs", 250)
        self._eval_fuel = options.get("evalFuel", DEFAULT_FUEL)
        self._workspace = Workspace(root)
        self._workspace.subscribe_status(self._on_workspace_status)
        if root is not None and self._workspace.root.is_dir():
            self._workspace.scan()
        self._pool = SessionPool(
            on_status=self._on_proof_status,
            script_dir=root,
            background_workers=options.get("poolSize"),
        )
        self._debounce = Debouncer(self._scheduler, debounce_ms / 1000.0)
        self._initialized = True
        return {
            "capabilities": {
                "textDocumentSync": {"openClose": True, "change": 1},
                "hoverProvider": True,
                "definitionProvider": True,
                "completionProvider": {"triggerCharacters": ["`", "."]},
                "codeLensProvider": {"resolveProvider": False},
                "renameProvider": True,
                "experimental": {
                    "pvsMethods": [
                        "pvs/typecheck",
                        "pvs/theories",
                        "pvs/prove-formula",
                        "pvs/proof-command",
                        "pvs/quit-proof",
                        "pvs/evaluate",
                    ]
                },
            },
            "serverInfo": {"name": "mupvs-server", "version": __version__},
        }

    def _handle_shutdown(self, msg_id, params: dict):
        self._shutdown = True
        if self._debounce is not None:
            self._debounce.cancel_all()
        return None

    def _exit(self, params: dict) -> None:
        self.exited = True
        self.close()

    def close(self) -> None:
        """Drop every live session; runs when the client connection ends."""
        if self._debounce is not None:
            self._debounce.cancel_all()
        if self._pool is not None:
            self._pool.abandon_all()
            self._pool.shutdown()

    # -- documents and diagnostics -----------------------------------------

    def _did_open(self, params: dict) -> None:
        doc = params["textDocument"]
        with self._ws_lock:
            self._workspace.upsert_document(
                doc["uri"], doc["text"], doc["version"], fresh=True
            )
        self._schedule_check(doc["uri"])

    def _did_change(self, params: dict) -> None:
        doc = params["textDocument"]
        changes = params.get("contentChanges") or []
        if not changes:
            return
        text = changes[-1]["text"]  # full-document sync
        with self._ws_lock:
            try:
                self._workspace.upsert_document(doc["uri"], text, doc["version"])
            except WorkspaceError as err:
                if err.kind != "stale-version":
                    raise
                return  # an older edit arrived late; the newer one already won
        self._schedule_check(doc["uri"])

    def _did_close(self, params: dict) -> None:
        uri = params["textDocument"]["uri"]
        if self._debounce is not None:
            self._debounce.cancel(uri)
        with self._ws_lock:
            self._workspace.drop_document(uri)
            # A file inside the workspace root stays visible at its on-disk
            # state so imports from other documents keep resolving.
            if self._workspace.root is None:
                return
            try:
                path = path_from_uri(uri)
                if not (
                    path.is_file()
                    and path.resolve().is_relative_to(self._workspace.root.resolve())
                ):
                    return
                text = path.read_text(encoding="utf-8")
            except (WorkspaceError, OSError):
                return
            self._workspace.upsert_document(uri, text, 0, fresh=True)

    def _schedule_check(self, uri: str) -> None:
        self._debounce.trigger(uri, lambda: self._check_and_publish(uri))

    def _check_and_publish(self, uri: str) -> None:
        with self._ws_lock:
            unit = self._workspace.document(uri)
            if unit is None:
                return
            parse_diags = unit.parse.diagnostics
            if any(d.severity is Severity.ERROR for d in parse_diags):
                diags = parse_diags  # typecheck waits until the file parses
            else:
                diags = self._workspace.diagnostics_for(uri)
            self._send(
                rpc.notification(
                    "textDocument/publishDiagnostics",
                    {
                        "uri": uri,
                        "version": unit.version,
                        "diagnostics": [d.to_wire() for d in diags],
                    },
                )
            )

    # -- symbol resolution helpers -----------------------------------------

    def _unit(self, uri: str):
        unit = self._workspace.document(uri)
        if unit is None:
            raise ServerError("document-not-open", f"document {uri} is not open")
        return unit

    def _token_at(self, unit, pos: SourcePos):
        for token in unit.parse.tokens:
            if token.range.contains(pos):
                return token
        return None

    def _theory_at(self, unit, pos: SourcePos):
        for theory in unit.theories:
            if theory.range.contains(pos):
                return theory
        return None

    def _is_checked(self, unit, pos: SourcePos) -> bool:
        theory = self._theory_at(unit, pos)
        if theory is None:
            return False
        result = self._workspace.result_for_theory(theory.name)
        return result is not None and result.ok

    def _resolve(self, uri: str, pos: SourcePos):
        """Index entries for the symbol at pos, plus its occurrence token."""
        unit = self._unit(uri)
        token = self._token_at(unit, pos)
        if token is None or token.kind is not TokenKind.IDENTIFIER:
            return [], None
        entries = resolve_symbol(
            token.lexeme,
            uri,
            pos,
            self._workspace.index,
            self._is_checked(unit, pos),
        )
        return entries, token

    # -- providers ---------------------------------------------------------

    def _hover(self, msg_id, params: dict):
        uri = params["textDocument"]["uri"]
        with self._ws_lock:
            entries, token = self._resolve(uri, _position(params))
            if not entries:
                return None
            entry = entries[0]
            link_name = entry.uri.rsplit("/", 1)[-1]
            line = entry.range.start.line + 1
            parts = [
                f"**{entry.name}** · {entry.description}",
                f"[{link_name}:{line}]({entry.uri}#L{line})",
                f"```pvs\n{entry.preview}\n```",
            ]
            if len(entries) > 1:
                parts.append(f"{len(entries)} candidates")
            return {
                "contents": {"kind": "markdown", "value": "\n\n".join(parts)},
                "range": token.range.to_wire(),
            }

    def _definition(self, msg_id, params: dict):
        uri = params["textDocument"]["uri"]
        with self._ws_lock:
            entries, _ = self._resolve(uri, _position(params))
            locations = [
                {"uri": e.uri, "range": e.range.to_wire()} for e in entries
            ]
        if not locations:
            return []
        return locations[0] if len(locations) == 1 else locations

    def _completion(self, msg_id, params: dict):
        uri = params["textDocument"]["uri"]
        pos = _position(params)
        with self._ws_lock:
            unit = self._unit(uri)
            lines = unit.text.split("\n")
            line = lines[pos.line] if pos.line < len(lines) else ""
            before = line[: pos.character]
            access = _ACCESS_TAIL.search(before)
            if access is not None:
                return self._field_items(uri, pos, access)
            match = re.search(r"[A-Za-z][A-Za-z0-9_]*$", before)
            prefix = match.group(0) if match else ""
            return self._general_items(prefix)

    def _field_items(self, uri: str, pos: SourcePos, access) -> list:
        base, partial = access.group(1), access.group(2) or ""
        base_col = access.start(1)
        binding = self._workspace.index.binding_at(
            uri, SourcePos(pos.line, base_col)
        )
        if binding is None or binding.type is None:
            return []
        tv = binding.type
        while isinstance(tv, SubtypeValue):
            tv = tv.base
        if not isinstance(tv, RecordValue):
            return []
        return [
            {
                "label": name,
                "kind": 5,
                "detail": _type_text(ftype),
            }
            for name, ftype in tv.fields
            if name.startswith(partial)
        ]

    def _general_items(self, prefix: str) -> list:
        lowered = prefix.lower()
        items: list[dict] = []
        for label, body in _SNIPPETS:
            if label.lower().startswith(lowered):
                items.append(
                    {
                        "label": label,
                        "kind": 15,
                        "insertText": body,
                        "insertTextFormat": 2,
                    }
                )
        for word in sorted(KEYWORDS):
            if word.lower().startswith(lowered):
                items.append({"label": word, "kind": 14})
        seen: set[str] = set()
        for entry in self._workspace.index.entries():
            if not entry.name.startswith(prefix) or entry.name in seen:
                continue
            seen.add(entry.name)
            items.append(
                {
                    "label": entry.name,
                    "kind": _COMPLETION_KINDS.get(entry.kind, 6),
                    "detail": entry.description,
                }
            )
        return items

    def _code_lens(self, msg_id, params: dict):
        uri = params["textDocument"]["uri"]
        with self._ws_lock:
            unit = self._unit(uri)
            lenses = []
            for theory in unit.theories:
                for decl in theory.decls:
                    if isinstance(decl, S.FormulaDecl):
                        lenses.append(
                            self._lens(uri, theory.name, decl.name, decl.name_range)
                        )
                result = self._workspace.result_for_theory(theory.name)
                if result is not None:
                    for tcc in result.tccs:
                        lenses.append(self._lens(uri, theory.name, tcc.id, tcc.origin))
        return lenses

    @staticmethod
    def _lens(uri: str, theory: str, formula: str, rng: Range) -> dict:
        return {
            "range": rng.to_wire(),
            "command": "prove",
            "target": {"uri": uri, "theory": theory, "formula": formula},
        }

    # -- rename ------------------------------------------------------------

    def _rename(self, msg_id, params: dict):
        uri = params["textDocument"]["uri"]
        pos = _position(params)
        new_name = params["newName"]
        with self._ws_lock:
            unit = self._unit(uri)
            if not self._is_checked(unit, pos):
                raise ServerError(
                    "not-typechecked", "rename needs a typechecked theory"
                )
            index = self._workspace.index
            binding = index.binding_at(uri, pos)
            if binding is None:
                raise ServerError("invalid-params", "no renameable symbol here")
            if self._workspace.document(binding.uri) is None:
                raise ServerError(
                    "read-only-symbol",
                    f"'{binding.name}' is built in and cannot be renamed",
                )
            if (
                not _IDENT.fullmatch(new_name)
                or new_name in KEYWORDS
                or new_name.upper() in KEYWORDS
            ):
                raise ServerError(
                    "invalid-identifier", f"'{new_name}' is not a valid identifier"
                )
            edits: dict[str, set[Range]] = {}
            for occ_uri, rng in index.occurrences_of(binding):
                edits.setdefault(occ_uri, set()).add(rng)
            edits.setdefault(binding.uri, set()).add(binding.def_range)
            self._check_capture(binding, new_name, edits)
            changes = {
                target: [
                    {"range": rng.to_wire(), "newText": new_name}
                    for rng in sorted(ranges, key=lambda r: (r.start, r.end))
                ]
                for target, ranges in sorted(edits.items())
            }
        return {"changes": changes}

    def _check_capture(self, binding, new_name: str, edits: dict) -> None:
        index = self._workspace.index
        visible = self._visible_theories(binding.theory)
        for entry in index.find(new_name):
            if self._workspace.document(entry.uri) is None:
                raise ServerError(
                    "capture", f"'{new_name}' is already a built-in name"
                )
            if entry.theory in visible:
                raise ServerError(
                    "capture",
                    f"'{new_name}' is already declared in theory {entry.theory}",
                )
        for target, ranges in edits.items():
            lo = min(r.start for r in ranges)
            hi = max(r.end for r in ranges)
            span = Range(lo, hi)
            for occ_range, occ_binding in index.occurrences_in(target):
                if occ_binding.name != new_name:
                    continue
                if span.contains(occ_range.start) or occ_range.contains(lo):
                    raise ServerError(
                        "capture",
                        f"'{new_name}' is already bound near the renamed symbol",
                    )

    def _visible_theories(self, name: str) -> set[str]:
        visible = {name, "prelude"}
        queue = [name]
        while queue:
            current = queue.pop()
            found = self._workspace.theory_named(current)
            if found is None:
                continue
            for importing in found[1].importings:
                if importing.name not in visible:
                    visible.add(importing.name)
                    queue.append(importing.name)
        return visible

    # -- custom pvs/* requests ---------------------------------------------

    def _pvs_typecheck(self, msg_id, params: dict):
        uri = params["uri"]
        with self._ws_lock:
            self._unit(uri)
            results = self._workspace.results_for(uri)
            diagnostics = [d.to_wire() for d in self._workspace.diagnostics_for(uri)]
            tccs = [
                {
                    "id": tcc.id,
                    "kind": tcc.kind,
                    "obligation": print_expr(tcc.obligation),
                    "origin": tcc.origin.to_wire(),
                    "status": tcc.status,
                    "theory": result.theory,
                }
                for result in results
                for tcc in result.tccs
            ]
        return {"diagnostics": diagnostics, "tccs": tccs}

    def _pvs_theories(self, msg_id, params: dict):
        with self._ws_lock:
            root = params.get("root")
            if root:
                self._workspace.scan(root)
            return self._workspace.theory_tree().to_wire()

    def _pvs_prove_formula(self, msg_id, params: dict):
        uri, theory, formula = params["uri"], params["theory"], params["formula"]
        with self._ws_lock:
            self._unit(uri)
            ctx = self._workspace.proof_context(theory)
            if not ctx.ok:
                raise ServerError(
                    "typecheck-failed",
                    f"theory {theory} has type errors",
                    data=[d.to_wire() for d in self._workspace.diagnostics_for(uri)],
                )
            session = self._pool.create_session(FormulaRef(uri, theory, formula), ctx)
        return {
            "sessionId": session.session_id,
            "sequent": session.tree.root.sequent.render(),
        }

    def _pvs_proof_command(self, msg_id, params: dict):
        future = self._pool.route_command(params["sessionId"], params["cmd"])
        with self._inflight_lock:
            self._inflight[msg_id] = future

        def finish(fut) -> None:
            with self._inflight_lock:
                self._inflight.pop(msg_id, None)
            if fut.cancelled():
                self._send(
                    rpc.error_response(
                        msg_id, rpc.REQUEST_CANCELLED, "request cancelled"
                    )
                )
                return
            err = fut.exception()
            if err is not None:
                self._send(rpc.error_response(msg_id, _error_code(err), str(err)))
            else:
                self._send(rpc.response(msg_id, fut.result().to_wire()))

        future.add_done_callback(finish)
        return _DEFERRED

    def _pvs_quit_proof(self, msg_id, params: dict):
        session_id = params["sessionId"]
        persist = bool(params.get("persist"))
        script = self._pool.close_session(session_id, persist=persist)
        result: dict = {}
        if persist and script is not None and self._pool.script_dir is not None:
            from .prover import script_filename

            result["scriptPath"] = str(
                self._pool.script_dir / script_filename(script.theory, script.formula)
            )
        return result

    def _pvs_evaluate(self, msg_id, params: dict):
        theory, expr = params["theory"], params["expr"]
        with self._ws_lock:
            ctx = self._workspace.proof_context(theory)
        value = evaluate(expr, ctx.scope, ctx.env, fuel=self._eval_fuel)
        return {"value": format_value(value)}

    def _cancel_request(self, params: dict) -> None:
        with self._inflight_lock:
            future = self._inflight.get(params.get("id"))
        if future is not None:
            future.cancel()

    # -- status fan-out ----------------------------------------------------

    def _on_proof_status(self, ref: FormulaRef, status: str) -> None:
        with self._ws_lock:
            try:
                self._workspace.set_formula_status(ref.theory, ref.formula, status)
                return  # the workspace subscriber sends the notification
            except WorkspaceError:
                pass
        self._send(
            rpc.notification(
                "pvs/proof-status",
                {
                    "uri": ref.uri,
                    "theory": ref.theory,
                    "formula": ref.formula,
                    "status": status,
                },
            )
        )

    def _on_workspace_status(self, delta: dict) -> None:
        self._send(rpc.notification("pvs/proof-status", delta))


# -- connection loops ------------------------------------------------------


def serve_connection(
    connection: rpc.Connection,
    root=None,
    scheduler=None,
    server: Union[LanguageServer, None] = None,
    defaults: Union[dict, None] = None,
) -> None:
    """Serve one client until it exits or the stream closes."""
    if server is None:
        server = LanguageServer(
            connection.send, root=root, scheduler=scheduler, defaults=defaults
        )
    try:
        while not server.exited:
            try:
                message = connection.read()
            except rpc.FramingError:
                break
            if message is None:
                break
            server.dispatch(message)
    finally:
        server.close()


def serve_stdio(root=None, defaults: Union[dict, None] = None) -> None:
    serve_connection(
        rpc.Connection(sys.stdin.buffer, sys.stdout.buffer),
        root=root,
        defaults=defaults,
    )


def serve_tcp(
    port: int, root=None, host: str = "127.0.0.1", defaults: Union[dict, None] = None
) -> int:
    """Listen, serve exactly one client connection, then return."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as listener:
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen(1)
        bound = listener.getsockname()[1]
        conn, _ = listener.accept()
        with conn:
            stream = conn.makefile("rwb")
            serve_connection(rpc.Connection(stream, stream), root=root, defaults=defaults)
    return bound
