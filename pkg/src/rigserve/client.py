"""Minimal synchronous line client for the TCP protocol.

Used by the CLI subcommands and the test suite; one request at a time,
skipping interleaved frames while waiting for the matching response.
"""

from __future__ import annotations

import json
import socket
from typing import Any

from rigserve.protocol import Response, parse_response


class ClientError(Exception):
    pass


class LineClient:
    def __init__(self, host: str, port: int, timeout: float = 5.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise ClientError(f"cannot connect to {host}:{port}: {e}") from None
        self._file = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._next_id = 0

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "LineClient":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def send_line(self, line: str) -> None:
        self._sock.sendall(line.encode("utf-8") + b"\n")

    def recv_line(self) -> str:
        line = self._file.readline()
        if not line:
            raise ClientError("server closed the connection")
        return line.rstrip("\n")

    def recv_obj(self) -> dict[str, Any]:
        return json.loads(self.recv_line())

    def request(self, obj: dict[str, Any]) -> Response:
        """Send one command object (id auto-assigned) and await its response."""
        if "id" not in obj:
            self._next_id += 1
            obj = {"id": self._next_id, **obj}
        self.send_line(json.dumps(obj, separators=(",", ":")))
        while True:
            received = self.recv_obj()
            if received.get("id") == obj["id"] and "status" in received:
                return parse_response(json.dumps(received))

    def request_ok(self, obj: dict[str, Any]) -> Response:
        resp = self.request(obj)
        if resp.status != "ok":
            raise ClientError(f"server rejected {obj.get('cmd')}: {resp.code}: {resp.message}")
        return resp
