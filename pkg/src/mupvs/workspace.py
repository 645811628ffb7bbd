"""Workspace state: open documents, declaration index, and theory statuses.

The workspace owns every mutable piece the editor surfaces are built from:
versioned document text, parse trees, typecheck results, a cross-file
declaration index for lookup and rename, and the proved/unfinished/failed
bookkeeping behind the theory explorer.  Mutations are expected to come from
a single owner (the server's dispatch loop); reads take consistent snapshots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Union

from . import syntax as S
from .parser import ParseResult, parse_theory_file
from .positions import Range, Severity, SourcePos
from .prelude import PRELUDE_URI, prelude_result, prelude_theory
from .printer import pretty_print, print_expr
from .typecheck import Binding, Tcc, TypecheckResult, typecheck

STATUSES = ("unchecked", "unfinished", "proved", "failed")
SIDECAR_NAME = ".pvsstatus.json"

_BUILTIN_TYPES = ("bool", "int", "nat", "real", "string")


class WorkspaceError(Exception):
    """A workspace operation that cannot be honored."""

    def __init__(self, message: str, kind: str = "workspace-error"):
        super().__init__(message)
        self.message = message
        self.kind = kind


def uri_from_path(path: Union[str, Path]) -> str:
    return Path(path).resolve().as_uri()


def path_from_uri(uri: str) -> Path:
    if not uri.startswith("file://"):
        raise WorkspaceError(f"not a file uri: {uri}", "io-error")
    from urllib.request import url2pathname

    return Path(url2pathname(uri[len("file://") :]))


# --------------------------------------------------------------------------
# Documents


@dataclass
class SourceUnit:
    uri: str
    text: str
    version: int
    parse: ParseResult

    @property
    def theories(self) -> tuple[S.Theory, ...]:
        return self.parse.ast.theories


# --------------------------------------------------------------------------
# Declaration index


@dataclass(frozen=True)
class DeclEntry:
    name: str
    kind: str  # type | const | function | formula | tcc
    theory: Union[str, None]
    uri: str
    range: Range
    preview: str
    description: str

    def to_wire(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "theory": self.theory,
            "location": {"uri": self.uri, "range": self.range.to_wire()},
            "preview": self.preview,
            "description": self.description,
        }


def _decl_kind(decl: S.Decl) -> str:
    if isinstance(decl, S.TypeDecl):
        return "type"
    if isinstance(decl, S.FunDef):
        return "function"
    if isinstance(decl, S.FormulaDecl):
        return "formula"
    return "const"


def _range_key(rng: Range) -> tuple[int, int, int, int]:
    return (
        rng.start.line,
        rng.start.character,
        rng.end.line,
        rng.end.character,
    )


class DeclarationIndex:
    """Name lookup across the workspace plus the prelude.

    Serves four queries: all entries for a name (peek lists, completion),
    the binding under a cursor position, the index entry for a binding
    (definition jump), and every occurrence of a binding (rename edits).
    """

    def __init__(self) -> None:
        self._entries: list[DeclEntry] = []
        self._by_name: dict[str, list[DeclEntry]] = {}
        self._entry_by_key: dict[tuple, DeclEntry] = {}
        self._occurrences: dict[str, list[tuple[Range, Binding]]] = {}

    def add_entry(self, entry: DeclEntry) -> None:
        self._entries.append(entry)
        self._by_name.setdefault(entry.name, []).append(entry)
        self._entry_by_key[(entry.uri, entry.name, _range_key(entry.range))] = entry

    def add_occurrences(self, uri: str, occs: list[tuple[Range, Binding]]) -> None:
        self._occurrences.setdefault(uri, []).extend(occs)

    def occurrences_in(self, uri: str) -> list[tuple[Range, Binding]]:
        return list(self._occurrences.get(uri, []))

    def entries(self) -> Iterator[DeclEntry]:
        return iter(self._entries)

    def names(self) -> list[str]:
        return sorted(self._by_name)

    def find(self, name: str) -> list[DeclEntry]:
        found = self._by_name.get(name, [])
        return sorted(found, key=lambda e: (e.uri, _range_key(e.range)))

    def binding_at(self, uri: str, position: SourcePos) -> Union[Binding, None]:
        best: tuple[tuple[int, int, int, int], Binding] | None = None
        for rng, binding in self._occurrences.get(uri, []):
            if rng.contains(position):
                key = _range_key(rng)
                if best is None or key > best[0]:
                    best = (key, binding)
        return best[1] if best else None

    def occurrence_range_at(self, uri: str, position: SourcePos) -> Union[Range, None]:
        for rng, _binding in self._occurrences.get(uri, []):
            if rng.contains(position):
                return rng
        return None

    def entry_for(self, binding: Binding) -> Union[DeclEntry, None]:
        key = (binding.uri, binding.name, _range_key(binding.def_range))
        return self._entry_by_key.get(key)

    def occurrences_of(self, binding: Binding) -> list[tuple[str, Range]]:
        hits: list[tuple[str, Range]] = []
        for uri, occs in self._occurrences.items():
            for rng, candidate in occs:
                if candidate == binding:
                    hits.append((uri, rng))
        hits.sort(key=lambda pair: (pair[0], _range_key(pair[1])))
        return hits


# --------------------------------------------------------------------------
# Theory tree


@dataclass(frozen=True)
class FormulaRow:
    name: str
    kind: str  # theorem | lemma | conjecture | tcc
    status: str

    def to_wire(self) -> dict:
        return {"name": self.name, "kind": self.kind, "status": self.status}


@dataclass(frozen=True)
class TheoryNode:
    uri: str
    name: str
    formulas: tuple[FormulaRow, ...]

    def to_wire(self) -> dict:
        return {
            "uri": self.uri,
            "name": self.name,
            "formulas": [row.to_wire() for row in self.formulas],
        }


@dataclass(frozen=True)
class TheoryTree:
    theories: tuple[TheoryNode, ...]

    def to_wire(self) -> dict:
        return {"theories": [node.to_wire() for node in self.theories]}


# --------------------------------------------------------------------------
# The workspace


class Workspace:
    def __init__(self, root: Union[str, Path, None] = None):
        self.root = Path(root) if root is not None else None
        self._documents: dict[str, SourceUnit] = {}
        self._results: dict[str, list[TypecheckResult]] | None = None
        self._index: DeclarationIndex | None = None
        self._statuses: dict[str, str] = {}
        self._status_subscribers: list[Callable[[dict], None]] = []
        if self.root is not None:
            self._load_sidecar()

    # -- documents ---------------------------------------------------------

    def upsert_document(
        self, uri: str, text: str, version: int, fresh: bool = False
    ) -> SourceUnit:
        """Replace a document's text.

        Versions are compared within one editing sequence; `fresh` starts a
        new sequence (a newly opened editor buffer supersedes whatever was
        loaded from disk, whatever its version counter said).
        """
        existing = self._documents.get(uri)
        if not fresh and existing is not None and version <= existing.version:
            raise WorkspaceError(
                f"stale version {version} for {uri}; have {existing.version}",
                "stale-version",
            )
        unit = SourceUnit(uri, text, version, parse_theory_file(uri, text))
        if existing is not None:
            self._invalidate_statuses(existing, unit)
        self._documents[uri] = unit
        self._results = None
        self._index = None
        return unit

    def drop_document(self, uri: str) -> None:
        if uri in self._documents:
            del self._documents[uri]
            self._results = None
            self._index = None

    def document(self, uri: str) -> Union[SourceUnit, None]:
        return self._documents.get(uri)

    def documents(self) -> list[SourceUnit]:
        return [self._documents[uri] for uri in sorted(self._documents)]

    def scan(self, root: Union[str, Path, None] = None) -> list[str]:
        """Load every .pvs file under the workspace root from disk."""
        base = Path(root) if root is not None else self.root
        if base is None:
            raise WorkspaceError("no workspace root to scan", "io-error")
        if not base.is_dir():
            raise WorkspaceError(f"workspace root {base} is not a directory", "io-error")
        loaded = []
        for path in sorted(base.rglob("*.pvs")):
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as err:
                raise WorkspaceError(f"cannot read {path}: {err}", "io-error") from None
            uri = uri_from_path(path)
            current = self._documents.get(uri)
            if current is not None and current.version > 0:
                continue  # an editor overlay outranks the disk copy
            # Version 0 marks disk provenance.
            self.upsert_document(uri, text, 0, fresh=True)
            loaded.append(uri)
        return loaded

    # -- typechecking ------------------------------------------------------

    def check_results(self) -> dict[str, list[TypecheckResult]]:
        """Typecheck every document, resolving imports across files."""
        if self._results is not None:
            return self._results
        theory_home: dict[str, str] = {}
        for unit in self.documents():
            for theory in unit.theories:
                theory_home.setdefault(theory.name, unit.uri)
        by_theory: dict[str, TypecheckResult] = {}
        in_progress: set[str] = set()
        checking_uris: set[str] = set()
        results: dict[str, list[TypecheckResult]] = {}

        def check_unit(unit: SourceUnit) -> list[TypecheckResult]:
            if unit.uri in results:
                return results[unit.uri]
            if unit.uri in checking_uris:  # import cycle; break it
                return []
            checking_uris.add(unit.uri)
            out: list[TypecheckResult] = []
            local: dict[str, TypecheckResult] = {}

            def resolver(name: str) -> Union[TypecheckResult, None]:
                if name in local:
                    return local[name]
                if name in by_theory:
                    return by_theory[name]
                home = theory_home.get(name)
                if home is None or home == unit.uri or name in in_progress:
                    return None
                in_progress.add(name)
                try:
                    check_unit(self._documents[home])
                finally:
                    in_progress.discard(name)
                return by_theory.get(name)

            for theory in unit.theories:
                res = typecheck(theory, resolver, unit.uri)
                local[theory.name] = res
                if theory_home.get(theory.name) == unit.uri:
                    by_theory[theory.name] = res
                out.append(res)
            results[unit.uri] = out
            checking_uris.discard(unit.uri)
            return out

        for unit in self.documents():
            check_unit(unit)
        self._results = results
        return results

    def results_for(self, uri: str) -> list[TypecheckResult]:
        return self.check_results().get(uri, [])

    def result_for_theory(self, name: str) -> Union[TypecheckResult, None]:
        for unit_results in self.check_results().values():
            for res in unit_results:
                if res.theory == name:
                    return res
        return None

    def theory_named(self, name: str) -> Union[tuple[SourceUnit, S.Theory], None]:
        for unit in self.documents():
            for theory in unit.theories:
                if theory.name == name:
                    return unit, theory
        return None

    def proof_context(self, theory: str):
        """Prover context for one theory: prelude, imports in dependency
        order, then the theory itself. Raises for unknown theories."""
        from .prelude import prelude_result, prelude_theory
        from .prover import make_context

        chain: list[S.Theory] = []
        results: list[TypecheckResult] = []
        seen: set[str] = set()

        def visit(name: str) -> None:
            if name in seen:
                return
            seen.add(name)
            found = self.theory_named(name)
            if found is None:
                if name == theory:
                    raise WorkspaceError(f"no theory named '{name}'", "theory-not-found")
                return  # unresolved import; typecheck already diagnosed it
            _, node = found
            for importing in node.importings:
                visit(importing.name)
            result = self.result_for_theory(name)
            if result is not None:
                chain.append(node)
                results.append(result)

        visit(theory)
        if not chain or chain[-1].name != theory:
            raise WorkspaceError(f"no theory named '{theory}'", "theory-not-found")
        return make_context([prelude_theory(), *chain], [prelude_result(), *results])

    # -- index -------------------------------------------------------------

    @property
    def index(self) -> DeclarationIndex:
        if self._index is None:
            self._index = self._build_index()
        return self._index

    def _build_index(self) -> DeclarationIndex:
        index = DeclarationIndex()
        for base in _BUILTIN_TYPES:
            index.add_entry(
                DeclEntry(
                    name=base,
                    kind="type",
                    theory=None,
                    uri=PRELUDE_URI,
                    range=Range(SourcePos(0, 0), SourcePos(0, 0)),
                    preview=f"{base}: TYPE",
                    description="built-in type",
                )
            )
        prelude = prelude_theory()
        for decl in prelude.decls:
            index.add_entry(self._entry_for_decl(decl, prelude.name, PRELUDE_URI))
        index.add_occurrences(PRELUDE_URI, list(prelude_result().occurrences))
        results = self.check_results()
        for unit in self.documents():
            for theory in unit.theories:
                for decl in theory.decls:
                    index.add_entry(self._entry_for_decl(decl, theory.name, unit.uri))
            for res in results.get(unit.uri, []):
                index.add_occurrences(unit.uri, list(res.occurrences))
                for tcc in res.tccs:
                    index.add_entry(self._entry_for_tcc(tcc, res.theory, unit.uri))
        return index

    @staticmethod
    def _entry_for_decl(decl: S.Decl, theory: str, uri: str) -> DeclEntry:
        kind = _decl_kind(decl)
        return DeclEntry(
            name=decl.name,
            kind=kind,
            theory=theory,
            uri=uri,
            range=decl.name_range,
            preview=pretty_print(decl),
            description=f"{kind} ({theory})",
        )

    @staticmethod
    def _entry_for_tcc(tcc: Tcc, theory: str, uri: str) -> DeclEntry:
        return DeclEntry(
            name=tcc.id,
            kind="tcc",
            theory=theory,
            uri=uri,
            range=tcc.origin,
            preview=f"{tcc.id}: OBLIGATION {print_expr(tcc.obligation)}",
            description=f"proof obligation ({theory})",
        )

    def find_declaration(self, name: str) -> list[DeclEntry]:
        return self.index.find(name)

    # -- theory tree and statuses -----------------------------------------

    def theory_tree(self) -> TheoryTree:
        results = self.check_results()
        nodes = []
        for unit in self.documents():
            per_theory_tccs: dict[str, list[Tcc]] = {}
            for res in results.get(unit.uri, []):
                per_theory_tccs[res.theory] = list(res.tccs)
            for theory in unit.theories:
                rows = []
                for decl in theory.decls:
                    if isinstance(decl, S.FormulaDecl):
                        rows.append(
                            FormulaRow(
                                decl.name,
                                decl.kind.value.lower(),
                                self.status(theory.name, decl.name),
                            )
                        )
                for tcc in per_theory_tccs.get(theory.name, []):
                    rows.append(
                        FormulaRow(tcc.id, "tcc", self.status(theory.name, tcc.id))
                    )
                nodes.append(TheoryNode(unit.uri, theory.name, tuple(rows)))
        return TheoryTree(tuple(nodes))

    def status(self, theory: str, formula: str) -> str:
        return self._statuses.get(f"{theory}.{formula}", "unchecked")

    def set_formula_status(self, theory: str, formula: str, status: str) -> dict:
        if status not in STATUSES:
            raise WorkspaceError(f"unknown status '{status}'", "unknown-status")
        if not self._formula_known(theory, formula):
            raise WorkspaceError(
                f"no formula '{formula}' in theory '{theory}'", "unknown-formula"
            )
        key = f"{theory}.{formula}"
        if status == "unchecked":
            self._statuses.pop(key, None)
        else:
            self._statuses[key] = status
        self._save_sidecar()
        delta = {"theory": theory, "formula": formula, "status": status}
        for subscriber in list(self._status_subscribers):
            subscriber(delta)
        return delta

    def subscribe_status(self, callback: Callable[[dict], None]) -> None:
        self._status_subscribers.append(callback)

    def _formula_known(self, theory: str, formula: str) -> bool:
        found = self.theory_named(theory)
        if found is None:
            return False
        unit, node = found
        for decl in node.decls:
            if isinstance(decl, S.FormulaDecl) and decl.name == formula:
                return True
        for res in self.results_for(unit.uri):
            if res.theory == theory and any(t.id == formula for t in res.tccs):
                return True
        return False

    def _invalidate_statuses(self, old: SourceUnit, new: SourceUnit) -> None:
        """An edit makes every status about that file's theories stale."""
        touched = {t.name for t in old.theories} | {t.name for t in new.theories}
        stale = [
            key for key in self._statuses if key.split(".", 1)[0] in touched
        ]
        if not stale:
            return
        for key in stale:
            del self._statuses[key]
        self._save_sidecar()

    # -- sidecar persistence ----------------------------------------------

    @property
    def sidecar_path(self) -> Union[Path, None]:
        if self.root is None:
            return None
        return self.root / SIDECAR_NAME

    def _load_sidecar(self) -> None:
        path = self.sidecar_path
        if path is None or not path.is_file():
            return
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return
        if not isinstance(data, dict):
            return
        self._statuses = {
            str(k): str(v)
            for k, v in data.items()
            if str(v) in STATUSES and str(v) != "unchecked"
        }

    def _save_sidecar(self) -> None:
        path = self.sidecar_path
        if path is None:
            return
        payload = dict(sorted(self._statuses.items()))
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    # -- diagnostics snapshot ---------------------------------------------

    def diagnostics_for(self, uri: str) -> list:
        """Parse and typecheck diagnostics for one document, merged."""
        unit = self._documents.get(uri)
        if unit is None:
            return []
        merged = list(unit.parse.diagnostics)
        for res in self.results_for(uri):
            merged.extend(res.diagnostics)
        merged.sort(
            key=lambda d: (
                d.range.start.line,
                d.range.start.character,
                d.severity,
                d.message,
            )
        )
        return merged

    def has_errors(self, uri: str) -> bool:
        return any(d.severity is Severity.ERROR for d in self.diagnostics_for(uri))
