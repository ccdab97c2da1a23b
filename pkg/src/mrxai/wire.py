"""Client side of the classifier wire protocol.

Newline-delimited JSON over a TCP socket or a child process's stdio.
One request per line; the server may answer out of order, so replies
are matched back to requests by id.

  -> {"op":"hello","proto":1}
  <- {"proto":1,"labels":["..."]}
  -> {"channels":C,"height":H,"id":N,"op":"classify","pixels":"<b64 f32le>","width":W}
  <- {"id":N,"label":"...","confidence":0.9,"scores":{...}}   (scores optional)
  <- {"id":N,"error":"..."}

Requests are serialized with sorted keys and no whitespace so a session
can be replayed byte-for-byte against a transcript fixture.
"""

from __future__ import annotations

import base64
import json
import shlex
import socket
import subprocess
import threading
import time

from .errors import InvalidParams, OracleUnavailable, ProtocolError
from .imaging import Image
from .oracle import Oracle, Prediction

PROTO_VERSION = 1


def encode_line(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def classify_request(image: Image, request_id: int) -> dict:
    """Request frame: pixels are little-endian float32, row-major, channel-last."""
    return {
        "id": request_id,
        "op": "classify",
        "height": image.height,
        "width": image.width,
        "channels": image.channels,
        "pixels": base64.b64encode(image.data.astype("<f4").tobytes()).decode(),
    }


class _StdioTransport:
    def __init__(self, argv: list[str]):
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise OracleUnavailable(f"cannot start {argv[0]!r}: {exc}") from exc

    def send(self, line: bytes) -> None:
        try:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as exc:
            raise OracleUnavailable(f"oracle process closed its input: {exc}") from exc

    def recv(self) -> bytes:
        line = self._proc.stdout.readline()
        if not line:
            raise OracleUnavailable("oracle process closed its output")
        return line

    def close(self) -> None:
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        self._proc.wait(timeout=10)


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout: float | None):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise OracleUnavailable(f"cannot connect to {host}:{port}: {exc}") from exc
        self._rfile = self._sock.makefile("rb")

    def send(self, line: bytes) -> None:
        try:
            self._sock.sendall(line)
        except OSError as exc:
            raise OracleUnavailable(f"connection lost: {exc}") from exc

    def recv(self) -> bytes:
        try:
            line = self._rfile.readline()
        except OSError as exc:
            raise OracleUnavailable(f"connection lost: {exc}") from exc
        if not line:
            raise OracleUnavailable("server closed the connection")
        return line

    def close(self) -> None:
        try:
            self._rfile.close()
            self._sock.close()
        except OSError:
            pass


class WireOracle(Oracle):
    """Oracle backed by an external model server speaking the wire protocol.

    Determinism is the server's contract; the client adds none of its
    own randomness.  Failed requests are not retried unless a retry
    count is configured, since silent retries would mask flaky servers
    during determinism audits.
    """

    def __init__(self, transport, retries: int = 0):
        super().__init__()
        self._transport = transport
        self._io_lock = threading.Lock()
        self._next_id = 1
        self._pending: dict[int, dict] = {}
        self._retries = retries
        self.labels = self._handshake()

    @classmethod
    def connect_tcp(cls, host: str, port: int, retries: int = 0,
                    timeout: float | None = 30.0) -> "WireOracle":
        return cls(_TcpTransport(host, port, timeout), retries=retries)

    @classmethod
    def spawn(cls, command: str | list[str], retries: int = 0) -> "WireOracle":
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise InvalidParams("empty oracle command")
        return cls(_StdioTransport(argv), retries=retries)

    def close(self) -> None:
        self._transport.close()

    def _handshake(self) -> list[str]:
        self._transport.send(encode_line({"op": "hello", "proto": PROTO_VERSION}))
        reply = self._read_frame()
        if reply.get("proto") != PROTO_VERSION or "labels" not in reply:
            raise ProtocolError(f"bad handshake reply: {reply!r}")
        return list(reply["labels"])

    def _read_frame(self) -> dict:
        raw = self._transport.recv()
        try:
            frame = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable reply {raw!r}") from exc
        if not isinstance(frame, dict):
            raise ProtocolError(f"reply is not an object: {raw!r}")
        return frame

    def _await_reply(self, request_id: int) -> dict:
        while True:
            if request_id in self._pending:
                return self._pending.pop(request_id)
            frame = self._read_frame()
            frame_id = frame.get("id")
            if frame_id == request_id:
                return frame
            if isinstance(frame_id, int):
                self._pending[frame_id] = frame
            else:
                raise ProtocolError(f"reply without usable id: {frame!r}")

    def _classify(self, image: Image) -> Prediction:
        last_err = None
        for attempt in range(self._retries + 1):
            try:
                return self._round_trip(image)
            except OracleUnavailable as exc:
                last_err = exc
                if attempt < self._retries:
                    time.sleep(0.1)
        raise last_err

    def _round_trip(self, image: Image) -> Prediction:
        with self._io_lock:
            request_id = self._next_id
            self._next_id += 1
            self._transport.send(encode_line(classify_request(image, request_id)))
            frame = self._await_reply(request_id)
        if "error" in frame:
            raise ProtocolError(f"server error for request {request_id}: {frame['error']}")
        try:
            label = frame["label"]
            confidence = float(frame["confidence"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed classify reply: {frame!r}") from exc
        scores = frame.get("scores")
        if scores is not None:
            scores = {str(lbl): float(v) for lbl, v in scores.items()}
        try:
            return Prediction(label=str(label), confidence=confidence, scores=scores)
        except InvalidParams as exc:
            raise ProtocolError(f"reply violates prediction invariants: {exc}") from exc
