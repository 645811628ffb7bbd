"""JSON-RPC 2.0 message framing over byte streams.

Messages travel as a MIME-ish header block terminated by a blank line, then
exactly Content-Length bytes of UTF-8 JSON:

    Content-Length: 123\r\n
    \r\n
    {"jsonrpc": "2.0", ...}

Reading and writing are symmetric, so the same helpers serve both the server
loop and test clients.
"""

from __future__ import annotations

import json
import threading
from typing import BinaryIO, Union

# JSON-RPC 2.0 protocol-level codes.
PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603
SERVER_NOT_INITIALIZED = -32002
REQUEST_CANCELLED = -32800


class FramingError(Exception):
    """The byte stream does not follow the header framing."""


def read_message(stream: BinaryIO) -> Union[dict, None]:
    """Read one framed message; None on a clean end of stream."""
    length: Union[int, None] = None
    while True:
        line = stream.readline()
        if not line:
            if length is None:
                return None
            raise FramingError("stream ended inside a message header")
        if line in (b"\r\n", b"\n"):
            break
        name, sep, value = line.decode("ascii", "replace").partition(":")
        if not sep:
            raise FramingError(f"malformed header line {line!r}")
        if name.strip().lower() == "content-length":
            try:
                length = int(value.strip())
            except ValueError:
                raise FramingError(f"bad Content-Length {value.strip()!r}") from None
    if length is None:
        raise FramingError("message frame is missing Content-Length")
    body = stream.read(length)
    if len(body) != length:
        raise FramingError(f"expected {length} body bytes, got {len(body)}")
    try:
        return json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FramingError(f"body is not valid JSON: {err}") from None


def write_message(stream: BinaryIO, payload: dict) -> None:
    """Frame and write one message, flushing so the peer sees it now."""
    body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
    stream.write(b"Content-Length: %d\r\n\r\n" % len(body))
    stream.write(body)
    stream.flush()


def request(msg_id: Union[int, str], method: str, params: Union[dict, None] = None) -> dict:
    message: dict = {"jsonrpc": "2.0", "id": msg_id, "method": method}
    if params is not None:
        message["params"] = params
    return message


def notification(method: str, params: Union[dict, None] = None) -> dict:
    message: dict = {"jsonrpc": "2.0", "method": method}
    if params is not None:
        message["params"] = params
    return message


def response(msg_id: Union[int, str, None], result) -> dict:
    return {"jsonrpc": "2.0", "id": msg_id, "result": result}


def error_response(
    msg_id: Union[int, str, None], code: int, message: str, data=None
) -> dict:
    err: dict = {"code": code, "message": message}
    if data is not None:
        err["data"] = data
    return {"jsonrpc": "2.0", "id": msg_id, "error": err}


def is_request(message: dict) -> bool:
    return "method" in message and "id" in message


def is_notification(message: dict) -> bool:
    return "method" in message and "id" not in message


def is_response(message: dict) -> bool:
    return "method" not in message and "id" in message


class Connection:
    """A read/write pair with serialized writes.

    Responses may be produced on prover worker threads while the dispatcher
    keeps reading, so every write goes through one lock to keep frames whole.
    """

    def __init__(self, reader: BinaryIO, writer: BinaryIO):
        self._reader = reader
        self._writer = writer
        self._write_lock = threading.Lock()

    def read(self) -> Union[dict, None]:
        return read_message(self._reader)

    def send(self, payload: dict) -> None:
        with self._write_lock:
            write_message(self._writer, payload)
