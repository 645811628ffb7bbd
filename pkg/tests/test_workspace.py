"""Workspace tests: document versions, the index, statuses, and the sidecar."""

import json

import pytest

from mupvs import syntax as S
from mupvs.positions import SourcePos
from mupvs.printer import pretty_print
from mupvs.workspace import (
    Workspace,
    WorkspaceError,
    uri_from_path,
)

LOGIC = """logic: THEORY
BEGIN
  p: bool
  weaken: THEOREM (p AND p) IMPLIES p
  orcomm: LEMMA FORALL (a, b: bool): (a OR b) IMPLIES (b OR a)
END logic
"""

ARITH = """arith: THEORY
BEGIN
  IMPORTING logic
  half(x: int): int = x / 2
  refl: THEOREM half(4) = 2
END arith
"""


def make_root(tmp_path, files=None):
    files = files if files is not None else {"logic.pvs": LOGIC, "arith.pvs": ARITH}
    for name, text in files.items():
        target = tmp_path / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
    return tmp_path


class TestDocuments:
    def test_upsert_and_replace(self):
        ws = Workspace()
        unit = ws.upsert_document("file:///a.pvs", LOGIC, 1)
        assert unit.version == 1
        assert unit.theories[0].name == "logic"
        unit2 = ws.upsert_document("file:///a.pvs", ARITH, 3)
        assert unit2.version == 3
        assert ws.document("file:///a.pvs").theories[0].name == "arith"

    def test_stale_version_is_rejected(self):
        ws = Workspace()
        ws.upsert_document("file:///a.pvs", LOGIC, 3)
        for bad in (2, 3):
            with pytest.raises(WorkspaceError) as exc:
                ws.upsert_document("file:///a.pvs", LOGIC, bad)
            assert exc.value.kind == "stale-version"
        assert ws.document("file:///a.pvs").version == 3

    def test_drop_document(self):
        ws = Workspace()
        ws.upsert_document("file:///a.pvs", LOGIC, 1)
        ws.drop_document("file:///a.pvs")
        assert ws.document("file:///a.pvs") is None
        assert ws.theory_tree().theories == ()

    def test_documents_are_sorted_by_uri(self):
        ws = Workspace()
        ws.upsert_document("file:///b.pvs", LOGIC, 1)
        ws.upsert_document("file:///a.pvs", ARITH, 1)
        assert [u.uri for u in ws.documents()] == ["file:///a.pvs", "file:///b.pvs"]


class TestScan:
    def test_scan_finds_nested_files(self, tmp_path):
        make_root(tmp_path, {"logic.pvs": LOGIC, "sub/arith.pvs": ARITH})
        ws = Workspace(tmp_path)
        loaded = ws.scan()
        assert len(loaded) == 2
        names = {t.name for u in ws.documents() for t in u.theories}
        assert names == {"logic", "arith"}

    def test_missing_root_is_io_error(self, tmp_path):
        ws = Workspace(tmp_path / "nope")
        with pytest.raises(WorkspaceError) as exc:
            ws.scan()
        assert exc.value.kind == "io-error"

    def test_scanned_documents_carry_the_disk_version_marker(self, tmp_path):
        make_root(tmp_path)
        ws = Workspace(tmp_path)
        ws.scan()
        assert all(u.version == 0 for u in ws.documents())

    def test_rescan_refreshes_disk_copies(self, tmp_path):
        root = make_root(tmp_path)
        ws = Workspace(root)
        ws.scan()
        target = root / "logic.pvs"
        target.write_text(target.read_text().replace("weaken", "renamed_weaken"))
        ws.scan()
        names = {t.name for u in ws.documents() for t in u.theories}
        assert "logic" in names
        unit = ws.document(uri_from_path(target))
        assert "renamed_weaken" in unit.text

    def test_rescan_leaves_editor_overlays_alone(self, tmp_path):
        root = make_root(tmp_path)
        ws = Workspace(root)
        ws.scan()
        uri = uri_from_path(root / "logic.pvs")
        overlay = "logic: THEORY\nBEGIN\n  edited: bool\nEND logic\n"
        ws.upsert_document(uri, overlay, 1, fresh=True)
        ws.scan()
        assert ws.document(uri).text == overlay
        assert ws.document(uri).version == 1


class TestTheoryTree:
    def test_rows_in_source_order_with_kinds(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        tree = ws.theory_tree()
        by_name = {t.name: t for t in tree.theories}
        assert [r.name for r in by_name["logic"].formulas] == ["weaken", "orcomm"]
        assert [r.kind for r in by_name["logic"].formulas] == ["theorem", "lemma"]
        assert all(r.status == "unchecked" for r in by_name["logic"].formulas)

    def test_empty_workspace(self, tmp_path):
        ws = Workspace(tmp_path)
        ws.scan()
        assert ws.theory_tree().theories == ()

    def test_parse_error_keeps_recovered_prefix(self):
        broken = (
            "t: THEORY\nBEGIN\n  good: THEOREM TRUE\n  ): THEOREM\nEND t\n"
        )
        ws = Workspace()
        ws.upsert_document("file:///b.pvs", broken, 1)
        tree = ws.theory_tree()
        assert tree.theories[0].name == "t"
        assert [r.name for r in tree.theories[0].formulas] == ["good"]

    def test_tcc_rows_follow_the_declared_formulas(self):
        ws = Workspace()
        ws.upsert_document(
            "file:///t.pvs",
            "t: THEORY\nBEGIN\n  lucky: {n: int | n > 0} = 7\n"
            "  g: THEOREM lucky > 0\nEND t\n",
            1,
        )
        rows = ws.theory_tree().theories[0].formulas
        assert [(r.name, r.kind) for r in rows] == [
            ("g", "theorem"),
            ("lucky_TCC1", "tcc"),
        ]

    def test_wire_form(self, tmp_path):
        ws = Workspace(make_root(tmp_path, {"logic.pvs": LOGIC}))
        ws.scan()
        wire = ws.theory_tree().to_wire()
        assert wire["theories"][0]["name"] == "logic"
        assert wire["theories"][0]["formulas"][0] == {
            "name": "weaken",
            "kind": "theorem",
            "status": "unchecked",
        }


class TestFindDeclaration:
    def test_prelude_function(self):
        ws = Workspace()
        entries = ws.find_declaration("abs")
        assert len(entries) == 1
        assert entries[0].description == "function (prelude)"
        assert entries[0].preview.startswith("abs(x: real): real =")

    def test_builtin_type(self):
        ws = Workspace()
        entries = ws.find_declaration("int")
        assert len(entries) == 1
        assert entries[0].description == "built-in type"

    def test_unknown_name_is_empty(self):
        ws = Workspace()
        assert ws.find_declaration("nosuch") == []

    def test_same_name_across_theories_is_ordered(self):
        ws = Workspace()
        ws.upsert_document(
            "file:///b.pvs", "t1: THEORY\nBEGIN\n  k: int = 1\nEND t1\n", 1
        )
        ws.upsert_document(
            "file:///a.pvs", "t2: THEORY\nBEGIN\n  k: int = 2\nEND t2\n", 1
        )
        entries = ws.find_declaration("k")
        assert [e.uri for e in entries] == ["file:///a.pvs", "file:///b.pvs"]
        assert [e.theory for e in entries] == ["t2", "t1"]

    def test_previews_match_the_printer(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        for unit in ws.documents():
            for theory in unit.theories:
                for decl in theory.decls:
                    entries = [
                        e
                        for e in ws.find_declaration(decl.name)
                        if e.uri == unit.uri and e.kind != "tcc"
                    ]
                    assert len(entries) == 1
                    assert entries[0].preview == pretty_print(decl)

    def test_every_declaration_is_indexed_exactly_once(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        expected = 0
        for unit in ws.documents():
            for theory in unit.theories:
                expected += len(theory.decls)
        workspace_entries = [
            e
            for e in ws.index.entries()
            if e.uri not in ("prelude:/prelude.pvs",) and e.kind != "tcc"
        ]
        assert len(workspace_entries) == expected


class TestIndexPositions:
    @pytest.fixture()
    def ws(self, tmp_path):
        workspace = Workspace(make_root(tmp_path))
        workspace.scan()
        workspace.check_results()
        return workspace

    def test_parameter_use_resolves(self, ws, tmp_path):
        uri = uri_from_path(tmp_path / "arith.pvs")
        binding = ws.index.binding_at(uri, SourcePos(3, 22))
        assert binding is not None
        assert (binding.name, binding.kind) == ("x", "param")

    def test_param_occurrences_cover_binding_and_use(self, ws, tmp_path):
        uri = uri_from_path(tmp_path / "arith.pvs")
        binding = ws.index.binding_at(uri, SourcePos(3, 22))
        occs = ws.index.occurrences_of(binding)
        assert [(u == uri, r.start.line) for u, r in occs] == [(True, 3), (True, 3)]

    def test_function_call_jumps_to_definition(self, ws, tmp_path):
        uri = uri_from_path(tmp_path / "arith.pvs")
        binding = ws.index.binding_at(uri, SourcePos(4, 17))
        assert binding.kind == "function"
        entry = ws.index.entry_for(binding)
        assert entry is not None
        assert entry.range.start.line == 3
        assert entry.preview == "half(x: int): int = x / 2"

    def test_whitespace_has_no_binding(self, ws, tmp_path):
        uri = uri_from_path(tmp_path / "arith.pvs")
        assert ws.index.binding_at(uri, SourcePos(1, 0)) is None

    def test_local_bindings_have_no_index_entry(self, ws, tmp_path):
        uri = uri_from_path(tmp_path / "arith.pvs")
        param = ws.index.binding_at(uri, SourcePos(3, 7))
        assert param.kind == "param"
        assert ws.index.entry_for(param) is None


class TestCrossFileResolution:
    def test_import_is_resolved_regardless_of_scan_order(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        results = ws.results_for(uri_from_path(tmp_path / "arith.pvs"))
        assert len(results) == 1
        assert results[0].ok

    def test_import_cycle_degrades_to_a_diagnostic(self):
        ws = Workspace()
        ws.upsert_document(
            "file:///x.pvs",
            "x1: THEORY\nBEGIN\n  IMPORTING y1\n  a: int = 1\nEND x1\n",
            1,
        )
        ws.upsert_document(
            "file:///y.pvs",
            "y1: THEORY\nBEGIN\n  IMPORTING x1\n  b: int = 2\nEND y1\n",
            1,
        )
        all_results = ws.check_results()
        messages = [
            d.message for rs in all_results.values() for r in rs for d in r.diagnostics
        ]
        assert any("IMPORTING" in m or "import" in m.lower() for m in messages)

    def test_diagnostics_are_merged_and_sorted(self):
        ws = Workspace()
        ws.upsert_document(
            "file:///bad.pvs",
            "t: THEORY\nBEGIN\n  y: int = TRUE\n  z: bool = nothere\nEND t\n",
            1,
        )
        diags = ws.diagnostics_for("file:///bad.pvs")
        assert len(diags) == 2
        lines = [d.range.start.line for d in diags]
        assert lines == sorted(lines)
        assert ws.has_errors("file:///bad.pvs")

    def test_clean_file_has_no_errors(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        assert not ws.has_errors(uri_from_path(tmp_path / "logic.pvs"))


class TestStatuses:
    def test_set_status_persists_to_sidecar(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        delta = ws.set_formula_status("logic", "weaken", "proved")
        assert delta == {"theory": "logic", "formula": "weaken", "status": "proved"}
        sidecar = json.loads((tmp_path / ".pvsstatus.json").read_text())
        assert sidecar == {"logic.weaken": "proved"}

    def test_restart_reproduces_statuses(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        ws.set_formula_status("logic", "weaken", "proved")
        ws.set_formula_status("logic", "orcomm", "unfinished")
        reloaded = Workspace(tmp_path)
        reloaded.scan()
        assert reloaded.status("logic", "weaken") == "proved"
        assert reloaded.status("logic", "orcomm") == "unfinished"
        tree = reloaded.theory_tree()
        logic = next(t for t in tree.theories if t.name == "logic")
        assert [r.status for r in logic.formulas] == ["proved", "unfinished"]

    def test_unknown_formula_is_rejected(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        with pytest.raises(WorkspaceError) as exc:
            ws.set_formula_status("logic", "ghost", "proved")
        assert exc.value.kind == "unknown-formula"

    def test_unknown_status_is_rejected(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        with pytest.raises(WorkspaceError) as exc:
            ws.set_formula_status("logic", "weaken", "shiny")
        assert exc.value.kind == "unknown-status"

    def test_edit_invalidates_to_unchecked(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        ws.set_formula_status("logic", "weaken", "proved")
        uri = uri_from_path(tmp_path / "logic.pvs")
        ws.upsert_document(uri, LOGIC + "\n", 2)
        assert ws.status("logic", "weaken") == "unchecked"
        assert json.loads((tmp_path / ".pvsstatus.json").read_text()) == {}

    def test_edit_of_one_file_keeps_other_statuses(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        ws.set_formula_status("logic", "weaken", "proved")
        ws.set_formula_status("arith", "refl", "failed")
        ws.upsert_document(uri_from_path(tmp_path / "logic.pvs"), LOGIC + "\n", 2)
        assert ws.status("arith", "refl") == "failed"

    def test_setting_unchecked_clears_the_entry(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        ws.set_formula_status("logic", "weaken", "proved")
        ws.set_formula_status("logic", "weaken", "unchecked")
        assert json.loads((tmp_path / ".pvsstatus.json").read_text()) == {}

    def test_subscribers_see_each_delta(self, tmp_path):
        ws = Workspace(make_root(tmp_path))
        ws.scan()
        seen = []
        ws.subscribe_status(seen.append)
        ws.set_formula_status("logic", "weaken", "unfinished")
        ws.set_formula_status("logic", "weaken", "proved")
        assert [d["status"] for d in seen] == ["unfinished", "proved"]

    def test_tcc_statuses_are_tracked(self):
        ws = Workspace()
        ws.upsert_document(
            "file:///t.pvs",
            "t: THEORY\nBEGIN\n  lucky: {n: int | n > 0} = 7\nEND t\n",
            1,
        )
        delta = ws.set_formula_status("t", "lucky_TCC1", "proved")
        assert delta["status"] == "proved"
        rows = ws.theory_tree().theories[0].formulas
        assert rows[0].status == "proved"

    def test_corrupt_sidecar_is_ignored(self, tmp_path):
        (tmp_path / ".pvsstatus.json").write_text("{not json")
        make_root(tmp_path, {"logic.pvs": LOGIC})
        ws = Workspace(tmp_path)
        ws.scan()
        assert ws.status("logic", "weaken") == "unchecked"

    def test_statuses_without_a_root_stay_in_memory(self):
        ws = Workspace()
        ws.upsert_document("file:///a.pvs", LOGIC, 1)
        ws.set_formula_status("logic", "weaken", "proved")
        assert ws.status("logic", "weaken") == "proved"
        assert ws.sidecar_path is None
