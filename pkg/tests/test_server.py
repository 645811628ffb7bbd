"""Language server tests: one transcript harness, providers, custom requests.

The harness feeds messages straight into the dispatcher and collects every
outgoing payload, with a virtual clock standing in for the debounce timer.
Responses produced on prover worker threads are awaited by polling.
"""

import itertools
import time

import pytest

from mupvs.scheduler import VirtualScheduler
from mupvs.server import LanguageServer
from mupvs import rpc

LOGIC_URI = "file:///ws/logic.pvs"
LOGIC_SRC = """logic: THEORY
BEGIN
  p: bool
  q: bool
  taut: THEOREM p OR NOT p
  conj: LEMMA p IMPLIES (p AND p)
  r: [# x: int, y: int #] = (# x := 1, y := 2 #)
  use: THEOREM r`x + 1 = 2
END logic
"""

ARITH_URI = "file:///ws/arith.pvs"
ARITH_SRC = """arith: THEORY
BEGIN
  quot(d: int): int = 10 / d
  sqr(x: int): int = x * x
  refl: THEOREM FORALL (y: int): sqr(y) >= 0
END arith
"""

BROKEN_URI = "file:///ws/broken.pvs"
BROKEN_SRC = """broken: THEORY
BEGIN
  b: int = TRUE
  g: THEOREM b = 0
END broken
"""


def loc(src: str, needle: str, occurrence: int = 0) -> dict:
    """Wire position of the nth occurrence of needle, by source scanning."""
    seen = 0
    for line_no, line in enumerate(src.split("\n")):
        col = -1
        while (col := line.find(needle, col + 1)) != -1:
            if seen == occurrence:
                return {"line": line_no, "character": col}
            seen += 1
    raise AssertionError(f"{needle!r} occurrence {occurrence} not in source")


class Transcript:
    def __init__(self, root=None, options=None, auto_init=True):
        self.out = []
        self.clock = VirtualScheduler()
        self.server = LanguageServer(self.out.append, root=root, scheduler=self.clock)
        self._ids = itertools.count(1)
        if auto_init:
            result = self.request(
                "initialize",
                {"capabilities": {}, "initializationOptions": options or {}},
            )
            self.capabilities = result["capabilities"]
            self.notify("initialized", {})

    def send(self, method: str, params=None) -> int:
        msg_id = next(self._ids)
        self.server.dispatch(rpc.request(msg_id, method, params or {}))
        return msg_id

    def notify(self, method: str, params=None) -> None:
        self.server.dispatch(rpc.notification(method, params or {}))

    def response(self, msg_id: int, timeout: float = 10.0) -> dict:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            for msg in list(self.out):
                if msg.get("id") == msg_id and "method" not in msg:
                    return msg
            time.sleep(0.005)
        raise AssertionError(f"no response for request {msg_id}")

    def request(self, method: str, params=None):
        msg = self.response(self.send(method, params))
        assert "error" not in msg, f"{method} failed: {msg.get('error')}"
        return msg["result"]

    def request_error(self, method: str, params=None) -> dict:
        msg = self.response(self.send(method, params))
        assert "error" in msg, f"expected an error from {method}, got {msg}"
        return msg["error"]

    def open(self, uri: str, text: str, version: int = 1) -> None:
        self.notify(
            "textDocument/didOpen",
            {"textDocument": {"uri": uri, "version": version, "text": text}},
        )

    def change(self, uri: str, text: str, version: int) -> None:
        self.notify(
            "textDocument/didChange",
            {
                "textDocument": {"uri": uri, "version": version},
                "contentChanges": [{"text": text}],
            },
        )

    def publishes(self, uri=None) -> list:
        found = [
            m["params"]
            for m in self.out
            if m.get("method") == "textDocument/publishDiagnostics"
        ]
        if uri is not None:
            found = [p for p in found if p["uri"] == uri]
        return found

    def statuses(self) -> list:
        return [m["params"] for m in self.out if m.get("method") == "pvs/proof-status"]

    def settle(self, seconds: float = 0.25) -> None:
        self.clock.advance(seconds)

    def close(self) -> None:
        self.server.close()


@pytest.fixture
def client():
    t = Transcript()
    t.open(LOGIC_URI, LOGIC_SRC)
    t.open(ARITH_URI, ARITH_SRC)
    t.settle()
    yield t
    t.close()


class TestLifecycle:
    def test_initialize_advertises_the_six_features(self):
        t = Transcript()
        caps = t.capabilities
        assert caps["hoverProvider"] is True
        assert caps["definitionProvider"] is True
        assert caps["completionProvider"]["triggerCharacters"] == ["`", "."]
        assert caps["codeLensProvider"] == {"resolveProvider": False}
        assert caps["renameProvider"] is True
        assert caps["textDocumentSync"]["openClose"] is True
        assert "pvs/prove-formula" in caps["experimental"]["pvsMethods"]
        t.close()

    def test_double_initialize_is_an_error(self):
        t = Transcript()
        err = t.request_error("initialize", {"capabilities": {}})
        assert err["code"] == 2001
        t.close()

    def test_requests_before_initialize_are_rejected(self):
        t = Transcript(auto_init=False)
        err = t.request_error("textDocument/hover", {})
        assert err["code"] == -32002
        t.close()

    def test_unknown_method_is_method_not_found(self):
        t = Transcript()
        err = t.request_error("pvs/launch-missiles", {})
        assert err["code"] == -32601
        t.close()

    def test_shutdown_then_exit_closes_cleanly(self):
        t = Transcript()
        assert t.request("shutdown") is None
        err = t.request_error("textDocument/hover", {})
        assert err["code"] == -32600
        t.notify("exit")
        assert t.server.exited is True

    def test_every_request_gets_exactly_one_response(self, client):
        sent = [
            client.send("textDocument/codeLens", {"textDocument": {"uri": LOGIC_URI}}),
            client.send("pvs/theories", {}),
            client.send("nonexistent/method", {}),
        ]
        for msg_id in sent:
            client.response(msg_id)
        responses = [m for m in client.out if "method" not in m and "id" in m]
        by_id = [m["id"] for m in responses]
        assert sorted(by_id) == sorted(set(by_id)), "duplicate response ids"
        assert set(sent) <= set(by_id)


class TestDiagnostics:
    def test_open_publishes_after_the_debounce_window(self):
        t = Transcript()
        t.open(LOGIC_URI, LOGIC_SRC)
        assert t.publishes() == []
        t.settle(0.24)
        assert t.publishes() == []
        t.settle(0.01)
        pubs = t.publishes(LOGIC_URI)
        assert len(pubs) == 1
        assert pubs[0]["diagnostics"] == []
        assert pubs[0]["version"] == 1
        t.close()

    def test_typo_produces_one_parser_diagnostic(self, client):
        client.change(LOGIC_URI, LOGIC_SRC + "x : END\n", 2)
        client.settle()
        pubs = client.publishes(LOGIC_URI)
        diags = pubs[-1]["diagnostics"]
        assert len(diags) == 1
        assert diags[0]["source"] == "parser"
        assert pubs[-1]["version"] == 2

    def test_fixing_the_typo_clears_the_squiggle(self, client):
        client.change(LOGIC_URI, LOGIC_SRC + "x : END\n", 2)
        client.settle()
        client.change(LOGIC_URI, LOGIC_SRC, 3)
        client.settle()
        pubs = client.publishes(LOGIC_URI)
        assert pubs[-1]["diagnostics"] == []
        assert pubs[-1]["version"] == 3

    def test_two_edits_inside_the_window_publish_once(self):
        t = Transcript()
        t.open(LOGIC_URI, LOGIC_SRC)
        t.settle()
        before = len(t.publishes(LOGIC_URI))
        t.change(LOGIC_URI, LOGIC_SRC + "% a\n", 2)
        t.settle(0.05)
        t.change(LOGIC_URI, LOGIC_SRC + "% ab\n", 3)
        t.settle(0.30)
        pubs = t.publishes(LOGIC_URI)
        assert len(pubs) - before == 1, "debounce must collapse the burst"
        assert pubs[-1]["version"] == 3
        t.close()

    def test_stale_versions_are_ignored_silently(self, client):
        client.change(LOGIC_URI, "garbage", 1)  # same version as the open
        client.settle()
        assert client.publishes(LOGIC_URI)[-1]["diagnostics"] == []
        assert client.server.exited is False

    def test_publishes_never_carry_a_superseded_version(self, client):
        for version in range(2, 12):
            client.change(LOGIC_URI, LOGIC_SRC + f"% v{version}\n", version)
            client.settle(0.02)
        client.settle(1.0)
        pubs = client.publishes(LOGIC_URI)
        acknowledged = 1
        for pub in pubs:
            assert pub["version"] >= acknowledged
            acknowledged = max(acknowledged, pub["version"])
        assert pubs[-1]["version"] == 11

    def test_type_errors_come_with_typechecker_source(self, client):
        client.open(BROKEN_URI, BROKEN_SRC)
        client.settle()
        diags = client.publishes(BROKEN_URI)[-1]["diagnostics"]
        assert any(d["source"] == "typechecker" for d in diags)

    def test_custom_debounce_window_is_respected(self):
        t = Transcript(options={"debounceMs": 500})
        t.open(LOGIC_URI, LOGIC_SRC)
        t.settle(0.45)
        assert t.publishes() == []
        t.settle(0.05)
        assert len(t.publishes(LOGIC_URI)) == 1
        t.close()


class TestHover:
    def test_hover_has_description_link_and_preview(self, client):
        result = client.request(
            "textDocument/hover",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": loc(ARITH_SRC, "sqr", 1),
            },
        )
        value = result["contents"]["value"]
        assert result["contents"]["kind"] == "markdown"
        assert "function (arith)" in value
        assert "[arith.pvs:4](file:///ws/arith.pvs#L4)" in value
        assert "```pvs\nsqr(x: int): int = x * x\n```" in value

    def test_hover_over_prelude_symbol(self, client):
        src = ARITH_SRC.replace("sqr(x: int): int = x * x", "sqr(x: int): real = abs(x)")
        client.change(ARITH_URI, src, 2)
        client.settle()
        result = client.request(
            "textDocument/hover",
            {"textDocument": {"uri": ARITH_URI}, "position": loc(src, "abs")},
        )
        assert "prelude" in result["contents"]["value"]

    def test_hover_over_whitespace_is_null(self, client):
        result = client.request(
            "textDocument/hover",
            {"textDocument": {"uri": LOGIC_URI}, "position": {"line": 1, "character": 4}},
        )
        assert result is None

    def test_hover_over_keyword_is_null(self, client):
        result = client.request(
            "textDocument/hover",
            {"textDocument": {"uri": LOGIC_URI}, "position": loc(LOGIC_SRC, "THEOREM")},
        )
        assert result is None

    def test_hover_on_unchecked_overload_counts_candidates(self, client):
        double_src = (
            "one: THEORY\nBEGIN\n  f(x: int): int = x\nEND one\n"
            "two: THEORY\nBEGIN\n  f(x: bool): bool = x\nEND two\n"
        )
        use_src = "use: THEORY\nBEGIN\n  u: int = TRUE\n  g: THEOREM f(1) = 1\nEND use\n"
        client.open("file:///ws/defs.pvs", double_src)
        client.open("file:///ws/use.pvs", use_src)
        client.settle()
        result = client.request(
            "textDocument/hover",
            {
                "textDocument": {"uri": "file:///ws/use.pvs"},
                "position": loc(use_src, "f(1)"),
            },
        )
        assert "2 candidates" in result["contents"]["value"]

    def test_hover_on_closed_document_is_an_error(self, client):
        err = client.request_error(
            "textDocument/hover",
            {
                "textDocument": {"uri": "file:///nowhere.pvs"},
                "position": {"line": 0, "character": 0},
            },
        )
        assert err["code"] == 2003


class TestDefinition:
    def test_checked_use_jumps_to_exactly_one_location(self, client):
        result = client.request(
            "textDocument/definition",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": loc(ARITH_SRC, "sqr", 1),
            },
        )
        assert result["uri"] == ARITH_URI
        assert result["range"]["start"] == loc(ARITH_SRC, "sqr")

    def test_unchecked_overload_returns_candidate_list(self, client):
        double_src = (
            "one: THEORY\nBEGIN\n  f(x: int): int = x\nEND one\n"
            "two: THEORY\nBEGIN\n  f(x: bool): bool = x\nEND two\n"
        )
        use_src = "use: THEORY\nBEGIN\n  u: int = TRUE\n  g: THEOREM f(1) = 1\nEND use\n"
        client.open("file:///ws/defs.pvs", double_src)
        client.open("file:///ws/use.pvs", use_src)
        client.settle()
        result = client.request(
            "textDocument/definition",
            {
                "textDocument": {"uri": "file:///ws/use.pvs"},
                "position": loc(use_src, "f(1)"),
            },
        )
        assert isinstance(result, list) and len(result) == 2

    def test_unknown_symbol_gives_empty_list(self, client):
        result = client.request(
            "textDocument/definition",
            {
                "textDocument": {"uri": LOGIC_URI},
                "position": loc(LOGIC_SRC, "THEORY"),
            },
        )
        assert result == []


class TestCompletion:
    def test_record_access_offers_exactly_the_fields(self, client):
        pos = loc(LOGIC_SRC, "r`x")
        pos = {"line": pos["line"], "character": pos["character"] + 2}
        items = client.request(
            "textDocument/completion",
            {"textDocument": {"uri": LOGIC_URI}, "position": pos},
        )
        assert [i["label"] for i in items] == ["x", "y"]
        assert all(i["kind"] == 5 for i in items)

    def test_keyword_prefix_matches_keywords(self, client):
        client.change(LOGIC_URI, LOGIC_SRC + "TH", 2)
        line = len((LOGIC_SRC + "TH").split("\n")) - 1
        items = client.request(
            "textDocument/completion",
            {
                "textDocument": {"uri": LOGIC_URI},
                "position": {"line": line, "character": 2},
            },
        )
        labels = {i["label"] for i in items}
        assert {"THEORY", "THEOREM"} <= labels

    def test_if_prefix_expands_to_a_snippet(self, client):
        src = LOGIC_SRC.replace("r`x + 1", "if")
        client.change(LOGIC_URI, src, 2)
        pos = loc(src, "if")
        pos = {"line": pos["line"], "character": pos["character"] + 2}
        items = client.request(
            "textDocument/completion",
            {"textDocument": {"uri": LOGIC_URI}, "position": pos},
        )
        snippet = next(i for i in items if i.get("kind") == 15)
        assert snippet["insertText"] == "IF ${1:cond} THEN ${2:expr} ELSE ${3:expr} ENDIF"
        assert snippet["insertTextFormat"] == 2

    def test_identifier_prefix_filters_declarations(self, client):
        client.change(ARITH_URI, ARITH_SRC + "sq", 2)
        line = len((ARITH_SRC + "sq").split("\n")) - 1
        items = client.request(
            "textDocument/completion",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": {"line": line, "character": 2},
            },
        )
        labels = [i["label"] for i in items]
        assert "sqr" in labels
        assert "quot" not in labels

    def test_providers_do_not_mutate_the_workspace(self, client):
        unit_before = client.server._workspace.document(LOGIC_URI)
        for _ in range(3):
            client.request(
                "textDocument/completion",
                {"textDocument": {"uri": LOGIC_URI}, "position": {"line": 2, "character": 3}},
            )
            client.request(
                "textDocument/hover",
                {"textDocument": {"uri": LOGIC_URI}, "position": loc(LOGIC_SRC, "p: bool")},
            )
            client.request("textDocument/codeLens", {"textDocument": {"uri": LOGIC_URI}})
        unit_after = client.server._workspace.document(LOGIC_URI)
        assert unit_after is unit_before
        assert unit_after.version == 1


class TestCodeLens:
    def test_one_lens_per_formula_in_source_order(self, client):
        lenses = client.request(
            "textDocument/codeLens", {"textDocument": {"uri": LOGIC_URI}}
        )
        formulas = [l["target"]["formula"] for l in lenses]
        assert formulas == ["taut", "conj", "use"]
        assert all(l["command"] == "prove" for l in lenses)
        assert lenses[0]["range"]["start"] == loc(LOGIC_SRC, "taut")

    def test_tcc_lenses_follow_the_typechecker(self, client):
        lenses = client.request(
            "textDocument/codeLens", {"textDocument": {"uri": ARITH_URI}}
        )
        checked = client.request("pvs/typecheck", {"uri": ARITH_URI})
        tcc_ids = [t["id"] for t in checked["tccs"]]
        assert tcc_ids == ["quot_TCC1"]
        assert [l["target"]["formula"] for l in lenses] == ["refl", *tcc_ids]

    def test_no_formulas_no_lenses(self, client):
        bare = "bare: THEORY\nBEGIN\n  c: int = 1\nEND bare\n"
        client.open("file:///ws/bare.pvs", bare)
        assert (
            client.request("textDocument/codeLens", {"textDocument": {"uri": "file:///ws/bare.pvs"}})
            == []
        )


class TestRename:
    def test_binder_rename_edits_exactly_its_occurrences(self, client):
        result = client.request(
            "textDocument/rename",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": loc(ARITH_SRC, "x * x"),
                "newName": "z",
            },
        )
        edits = result["changes"][ARITH_URI]
        # The declaration and both uses on the sqr line, nothing else.
        starts = [e["range"]["start"] for e in edits]
        assert len(edits) == 3
        assert starts[0] == loc(ARITH_SRC, "x: int")
        assert starts[1] == loc(ARITH_SRC, "x * x")
        assert all(e["newText"] == "z" for e in edits)
        assert starts == sorted(starts, key=lambda p: (p["line"], p["character"]))
        sqr_line = loc(ARITH_SRC, "sqr")["line"]
        assert all(s["line"] == sqr_line for s in starts)

    def test_rename_to_clashing_name_is_capture(self, client):
        err = client.request_error(
            "textDocument/rename",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": loc(ARITH_SRC, "x * x"),
                "newName": "quot",
            },
        )
        assert err["code"] == 2017

    def test_rename_prelude_symbol_is_read_only(self, client):
        src = ARITH_SRC.replace("sqr(x: int): int = x * x", "sqr(x: int): real = abs(x)")
        client.change(ARITH_URI, src, 2)
        client.settle()
        err = client.request_error(
            "textDocument/rename",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": loc(src, "abs"),
                "newName": "magnitude",
            },
        )
        assert err["code"] == 2016

    @pytest.mark.parametrize("bad_name", ["THEN", "bool", "9lives", "a-b", ""])
    def test_rename_to_invalid_identifier_is_rejected(self, client, bad_name):
        err = client.request_error(
            "textDocument/rename",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": loc(ARITH_SRC, "x * x"),
                "newName": bad_name,
            },
        )
        assert err["code"] == 2018

    def test_rename_in_broken_theory_needs_typechecking(self, client):
        client.open(BROKEN_URI, BROKEN_SRC)
        client.settle()
        err = client.request_error(
            "textDocument/rename",
            {
                "textDocument": {"uri": BROKEN_URI},
                "position": loc(BROKEN_SRC, "b = 0"),
                "newName": "c",
            },
        )
        assert err["code"] == 2007

    def test_theory_level_rename_spans_files(self, client):
        importer = "client: THEORY\nBEGIN\n  IMPORTING arith\n  t: THEOREM sqr(2) = 4\nEND client\n"
        client.open("file:///ws/client.pvs", importer)
        client.settle()
        result = client.request(
            "textDocument/rename",
            {
                "textDocument": {"uri": ARITH_URI},
                "position": loc(ARITH_SRC, "sqr"),
                "newName": "square",
            },
        )
        assert set(result["changes"]) == {ARITH_URI, "file:///ws/client.pvs"}


class TestCustomRequests:
    def test_typecheck_reports_diagnostics_and_tccs(self, client):
        client.open(BROKEN_URI, BROKEN_SRC)
        result = client.request("pvs/typecheck", {"uri": BROKEN_URI})
        assert any(d["severity"] == 1 for d in result["diagnostics"])
        checked = client.request("pvs/typecheck", {"uri": ARITH_URI})
        (tcc,) = checked["tccs"]
        assert tcc["kind"] == "nonzero-divisor"
        assert tcc["obligation"] == "FORALL (d: int): d /= 0"
        assert tcc["theory"] == "arith"
        assert tcc["status"] == "unproved"

    def test_theories_returns_the_tree(self, client):
        tree = client.request("pvs/theories", {})
        names = [t["name"] for t in tree["theories"]]
        assert "logic" in names and "arith" in names
        logic = next(t for t in tree["theories"] if t["name"] == "logic")
        assert [f["name"] for f in logic["formulas"]] == ["taut", "conj", "use"]

    def test_theories_can_scan_a_directory(self, tmp_path):
        (tmp_path / "disk.pvs").write_text(
            "disk: THEORY\nBEGIN\n  d: THEOREM TRUE\nEND disk\n"
        )
        t = Transcript()
        tree = t.request("pvs/theories", {"root": str(tmp_path)})
        assert [th["name"] for th in tree["theories"]] == ["disk"]
        t.close()

    def test_prove_formula_returns_session_and_sequent(self, client):
        result = client.request(
            "pvs/prove-formula",
            {"uri": LOGIC_URI, "theory": "logic", "formula": "taut"},
        )
        assert result["sessionId"].startswith("proof-")
        assert result["sequent"] == "|-------\n[1] p OR NOT p"

    def test_prove_formula_on_broken_theory_carries_diagnostics(self, client):
        client.open(BROKEN_URI, BROKEN_SRC)
        err = client.request_error(
            "pvs/prove-formula",
            {"uri": BROKEN_URI, "theory": "broken", "formula": "g"},
        )
        assert err["code"] == 2008
        assert err["data"], "diagnostics belong in the error payload"

    def test_prove_formula_unknown_theory(self, client):
        err = client.request_error(
            "pvs/prove-formula",
            {"uri": LOGIC_URI, "theory": "ghost", "formula": "x"},
        )
        assert err["code"] == 2005

    def test_duplicate_prove_formula_is_rejected(self, client):
        params = {"uri": LOGIC_URI, "theory": "logic", "formula": "conj"}
        client.request("pvs/prove-formula", params)
        err = client.request_error("pvs/prove-formula", params)
        assert err["code"] == 2009

    def test_proof_command_runs_and_reports_done(self, client):
        opened = client.request(
            "pvs/prove-formula",
            {"uri": LOGIC_URI, "theory": "logic", "formula": "taut"},
        )
        result = client.request(
            "pvs/proof-command", {"sessionId": opened["sessionId"], "cmd": "grind"}
        )
        assert result["result"]["outcome"] == "closed"
        assert result["state"] == "done"
        assert result["tree"]["proved"] is True
        assert result["goal"] is None
        assert {
            "theory": "logic",
            "formula": "taut",
            "status": "proved",
        } in client.statuses()

    def test_proof_command_unknown_session(self, client):
        err = client.request_error(
            "pvs/proof-command", {"sessionId": "proof-404", "cmd": "assert"}
        )
        assert err["code"] == 2010

    def test_proof_command_after_done_is_rejected(self, client):
        opened = client.request(
            "pvs/prove-formula",
            {"uri": LOGIC_URI, "theory": "logic", "formula": "taut"},
        )
        client.request(
            "pvs/proof-command", {"sessionId": opened["sessionId"], "cmd": "grind"}
        )
        err = client.request_error(
            "pvs/proof-command", {"sessionId": opened["sessionId"], "cmd": "assert"}
        )
        assert err["code"] == 2011

    def test_quit_proof_persists_a_script(self, tmp_path):
        t = Transcript(root=tmp_path)
        t.open(LOGIC_URI, LOGIC_SRC)
        opened = t.request(
            "pvs/prove-formula",
            {"uri": LOGIC_URI, "theory": "logic", "formula": "conj"},
        )
        t.request("pvs/proof-command", {"sessionId": opened["sessionId"], "cmd": "flatten"})
        result = t.request(
            "pvs/quit-proof", {"sessionId": opened["sessionId"], "persist": True}
        )
        path = tmp_path / "logic.conj.proof.json"
        assert result["scriptPath"] == str(path)
        assert path.exists()
        t.close()

    def test_evaluate_computes_ground_terms(self, client):
        result = client.request(
            "pvs/evaluate", {"uri": LOGIC_URI, "theory": "logic", "expr": "1 + 2 * 3"}
        )
        assert result == {"value": "7"}

    def test_evaluate_reports_parse_errors(self, client):
        err = client.request_error(
            "pvs/evaluate", {"uri": LOGIC_URI, "theory": "logic", "expr": "1 +"}
        )
        assert err["code"] == 2012

    def test_evaluate_honours_the_configured_fuel(self):
        t = Transcript(options={"evalFuel": 5})
        t.open(ARITH_URI, ARITH_SRC)
        err = t.request_error(
            "pvs/evaluate",
            {"uri": ARITH_URI, "theory": "arith", "expr": "sqr(sqr(sqr(2)))"},
        )
        assert err["code"] == 2015
        t.close()


def _wide_source(n: int = 14) -> str:
    decls = "\n".join(f"  a{i}: bool\n  b{i}: bool" for i in range(1, n + 1))
    conj = " AND ".join(f"(a{i} OR b{i})" for i in range(1, n + 1))
    return (
        "wide: THEORY\nBEGIN\n"
        + decls
        + f"\n  slow: THEOREM ({conj}) IMPLIES (a1 OR b1)\nEND wide\n"
    )


class TestCancellation:
    def test_queued_proof_command_can_be_cancelled(self, client):
        client.open("file:///ws/wide.pvs", _wide_source())
        opened = client.request(
            "pvs/prove-formula",
            {"uri": "file:///ws/wide.pvs", "theory": "wide", "formula": "slow"},
        )
        slow_id = client.send(
            "pvs/proof-command", {"sessionId": opened["sessionId"], "cmd": "prop"}
        )
        queued_id = client.send(
            "pvs/proof-command", {"sessionId": opened["sessionId"], "cmd": "assert"}
        )
        client.notify("$/cancelRequest", {"id": queued_id})
        cancelled = client.response(queued_id, timeout=60)
        assert cancelled["error"]["code"] == rpc.REQUEST_CANCELLED
        finished = client.response(slow_id, timeout=120)
        assert finished["result"]["state"] == "done"

    def test_cancelling_an_unknown_request_is_harmless(self, client):
        client.notify("$/cancelRequest", {"id": 987654})
        assert client.server.exited is False


class TestConnectionLoop:
    def test_stream_disconnect_abandons_sessions(self):
        import io
        import threading

        from mupvs.server import serve_connection

        frames = io.BytesIO()
        rpc.write_message(frames, rpc.request(1, "initialize", {"capabilities": {}}))
        rpc.write_message(
            frames,
            rpc.notification(
                "textDocument/didOpen",
                {"textDocument": {"uri": LOGIC_URI, "version": 1, "text": LOGIC_SRC}},
            ),
        )
        rpc.write_message(
            frames,
            rpc.request(
                2,
                "pvs/prove-formula",
                {"uri": LOGIC_URI, "theory": "logic", "formula": "taut"},
            ),
        )
        frames.seek(0)
        out = io.BytesIO()
        server = LanguageServer(lambda payload: rpc.write_message(out, payload),
                                scheduler=VirtualScheduler())
        serve_connection(rpc.Connection(frames, out), server=server)
        out.seek(0)
        replies = []
        while (msg := rpc.read_message(out)) is not None:
            replies.append(msg)
        assert any(m.get("id") == 2 and "result" in m for m in replies)
        assert server._pool.sessions() == []

    def test_tcp_round_trip(self):
        import socket
        import threading

        from mupvs.server import serve_tcp

        ready: list[int] = []
        thread = threading.Thread(target=lambda: serve_tcp(0) and None, daemon=True)
        # serve_tcp binds an ephemeral port; rebind deterministically instead.
        listener = socket.socket()
        listener.bind(("127.0.0.1", 0))
        port = listener.getsockname()[1]
        listener.close()
        thread = threading.Thread(target=serve_tcp, args=(port,), daemon=True)
        thread.start()
        time.sleep(0.1)
        with socket.create_connection(("127.0.0.1", port), timeout=5) as sock:
            stream = sock.makefile("rwb")
            rpc.write_message(stream, rpc.request(1, "initialize", {"capabilities": {}}))
            reply = rpc.read_message(stream)
            assert reply["id"] == 1
            assert reply["result"]["serverInfo"]["name"] == "mupvs-server"
            rpc.write_message(stream, rpc.request(2, "shutdown"))
            assert rpc.read_message(stream)["id"] == 2
            rpc.write_message(stream, rpc.notification("exit"))
        thread.join(timeout=5)
        assert not thread.is_alive()
