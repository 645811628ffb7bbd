#!/usr/bin/env python3
"""Drive a live server over stdio and print the annotated transcript.

Runs against the bundled fixture workspace by default:

    python3 scripts/demo_transcript.py [path/to/workspace]

Useful for eyeballing the wire behaviour end to end: diagnostics after
an edit, hover content, record-field completion, a full proof session,
and ground evaluation, all through a real subprocess pipe.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
import sys
import tempfile
from itertools import count
from pathlib import Path


class Pipe:
    def __init__(self, root: Path):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "mupvs.cli", "serve", "--root", str(root)],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        self.ids = count(1)

    def send(self, method: str, params: dict, notify: bool = False) -> int | None:
        msg = {"jsonrpc": "2.0", "method": method, "params": params}
        if not notify:
            msg["id"] = next(self.ids)
        body = json.dumps(msg).encode()
        self.proc.stdin.write(b"Content-Length: %d\r\n\r\n" % len(body) + body)
        self.proc.stdin.flush()
        return msg.get("id")

    def read(self) -> dict:
        header = b""
        while not header.endswith(b"\r\n\r\n"):
            byte = self.proc.stdout.read(1)
            if not byte:
                raise SystemExit("server closed the stream")
            header += byte
        length = int(re.search(rb"Content-Length: (\d+)", header).group(1))
        return json.loads(self.proc.stdout.read(length))

    def call(self, method: str, params: dict) -> dict:
        msg_id = self.send(method, params)
        while True:
            msg = self.read()
            if msg.get("id") == msg_id:
                if "error" in msg:
                    raise SystemExit(f"{method} failed: {msg['error']}")
                return msg["result"]
            self.show_notification(msg)

    @staticmethod
    def show_notification(msg: dict) -> None:
        method = msg.get("method", "?")
        params = msg.get("params", {})
        if method == "textDocument/publishDiagnostics":
            uri = params["uri"].rsplit("/", 1)[-1]
            print(f"  <- diagnostics v{params['version']} for {uri}: "
                  f"{len(params['diagnostics'])} item(s)")
        elif method == "pvs/proof-status":
            print(f"  <- status {params['theory']}.{params['formula']} "
                  f"= {params['status']}")
        else:
            print(f"  <- {method}")


def main() -> int:
    source = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "ws"
    )
    if not source.is_dir():
        print(f"no workspace at {source}", file=sys.stderr)
        return 2

    with tempfile.TemporaryDirectory() as scratch:
        root = Path(scratch) / "ws"
        shutil.copytree(source, root)
        pipe = Pipe(root)

        print("== initialize ==")
        caps = pipe.call("initialize", {"rootUri": root.as_uri()})["capabilities"]
        print(f"  capabilities: {', '.join(k for k in sorted(caps) if caps[k])}")
        pipe.send("initialized", {}, notify=True)

        arith = root / "arith.pvs"
        uri = arith.as_uri()
        text = arith.read_text()
        print("== open arith.pvs ==")
        pipe.send("textDocument/didOpen", {
            "textDocument": {"uri": uri, "version": 1, "text": text},
        }, notify=True)
        pipe.show_notification(pipe.read())

        print("== break it, then fix it ==")
        pipe.send("textDocument/didChange", {
            "textDocument": {"uri": uri, "version": 2},
            "contentChanges": [{"text": text.replace("int = 4", "int = TRUE")}],
        }, notify=True)
        pipe.show_notification(pipe.read())
        pipe.send("textDocument/didChange", {
            "textDocument": {"uri": uri, "version": 3},
            "contentChanges": [{"text": text}],
        }, notify=True)
        pipe.show_notification(pipe.read())

        print("== hover over sqr ==")
        line = next(i for i, l in enumerate(text.splitlines()) if "sqr(x" in l)
        hover = pipe.call("textDocument/hover", {
            "textDocument": {"uri": uri},
            "position": {"line": line, "character": text.splitlines()[line].index("sqr")},
        })
        print("  " + hover["contents"]["value"].splitlines()[0])

        print("== prove sqr_expand ==")
        opened = pipe.call("pvs/prove-formula",
                           {"uri": uri, "theory": "arith", "formula": "sqr_expand"})
        print("  goal:")
        for goal_line in opened["sequent"].splitlines():
            print(f"    {goal_line}")
        step = pipe.call("pvs/proof-command",
                         {"sessionId": opened["sessionId"], "cmd": "grind"})
        print(f"  grind -> {step['result']['outcome']}; proved={step['tree']['proved']}")

        print("== evaluate ==")
        value = pipe.call("pvs/evaluate",
                          {"uri": uri, "theory": "arith", "expr": "sqr(6) + ratio"})
        print(f"  sqr(6) + ratio = {value['value']}")

        print("== shutdown ==")
        pipe.call("shutdown", {})
        pipe.send("exit", {}, notify=True)
        pipe.proc.wait(timeout=10)
        print("clean exit")
    return 0


if __name__ == "__main__":
    sys.exit(main())
