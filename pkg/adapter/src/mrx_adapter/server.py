"""Wire-protocol server: newline-delimited JSON over stdio or TCP.

  <- {"op":"hello","proto":1}
  -> {"labels":[...],"proto":1}
  <- {"channels":C,"height":H,"id":N,"op":"classify","pixels":"<b64 f32le>","width":W}
  -> {"confidence":...,"id":N,"label":"...","scores":{...}}
  -> {"error":"...","id":N}            on any per-request failure

One request per line, one reply per request, frames serialized with
sorted keys and no whitespace so sessions replay byte-for-byte.
Malformed input is answered with an error frame, never a crash.
"""

from __future__ import annotations

import argparse
import base64
import json
import socket
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import ModelError, load_model

PROTO_VERSION = 1


def dump_frame(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode() + b"\n"


@dataclass(frozen=True)
class AdapterConfig:
    model_path: Path
    labels: tuple[str, ...] = ()
    device: str = "cpu"
    mode: str = "stdio"  # "stdio" or "tcp:<port>"

    def __post_init__(self):
        if not Path(self.model_path).exists():
            raise ModelError(f"model file {self.model_path} does not exist")
        if self.mode != "stdio" and not self.mode.startswith("tcp:"):
            raise ModelError(f"mode must be stdio or tcp:<port>, got {self.mode!r}")


class RequestHandler:
    """Stateless per-frame dispatch; shared by the stdio and TCP loops."""

    def __init__(self, model):
        self.model = model
        if len(model.labels) < 2:
            raise ModelError("adapter needs at least 2 labels")

    def handle_line(self, line: bytes) -> bytes | None:
        if not line.strip():
            return None
        try:
            frame = json.loads(line)
            if not isinstance(frame, dict):
                raise ValueError("not an object")
        except ValueError:
            return dump_frame({"id": None, "error": "unparseable request"})
        request_id = frame.get("id") if isinstance(frame.get("id"), int) else None
        try:
            return self._dispatch(frame, request_id)
        except Exception as exc:  # a bad request must never take the server down
            return dump_frame({"id": request_id, "error": str(exc)})

    def _dispatch(self, frame: dict, request_id: int | None) -> bytes:
        op = frame.get("op")
        if op == "hello":
            if frame.get("proto") != PROTO_VERSION:
                return dump_frame({"id": request_id,
                                   "error": f"unsupported proto {frame.get('proto')!r}"})
            return dump_frame({"proto": PROTO_VERSION, "labels": list(self.model.labels)})
        if op != "classify":
            return dump_frame({"id": request_id, "error": f"unknown op {op!r}"})
        for field in ("id", "height", "width", "channels", "pixels"):
            if field not in frame:
                return dump_frame({"id": request_id, "error": f"missing field {field!r}"})
        h, w, c = int(frame["height"]), int(frame["width"]), int(frame["channels"])
        raw = base64.b64decode(frame["pixels"])
        floats = np.frombuffer(raw, dtype="<f4")
        if len(floats) != h * w * c:
            return dump_frame({"id": request_id,
                               "error": f"pixel payload has {len(floats)} floats, "
                                        f"expected {h * w * c}"})
        pixels = floats.reshape(h, w, c).astype(np.float64)
        scores = self.model.predict(pixels)
        best = max(scores.values())
        label = min(lbl for lbl, v in scores.items() if v == best)
        return dump_frame({"id": frame["id"], "label": label,
                           "confidence": scores[label], "scores": scores})


def serve_stream(handler: RequestHandler, reader, writer) -> None:
    for line in iter(reader.readline, b""):
        reply = handler.handle_line(line)
        if reply is not None:
            writer.write(reply)
            writer.flush()


def serve(config: AdapterConfig) -> None:
    model = load_model(config.model_path, labels=list(config.labels) or None,
                       device=config.device)
    handler = RequestHandler(model)
    if config.mode == "stdio":
        serve_stream(handler, sys.stdin.buffer, sys.stdout.buffer)
        return
    port = int(config.mode.split(":", 1)[1])
    with socket.socket() as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind(("127.0.0.1", port))
        server.listen(1)
        sys.stderr.write(f"mrx-adapter listening on 127.0.0.1:{server.getsockname()[1]}\n")
        sys.stderr.flush()
        while True:
            conn, _ = server.accept()
            with conn:
                fh = conn.makefile("rwb")
                serve_stream(handler, fh, fh)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mrx-adapter",
        description="Serve a saved classifier over the oracle wire protocol.")
    parser.add_argument("--model", required=True, help=".json stub or torch checkpoint")
    parser.add_argument("--labels", default="",
                        help="comma-separated label names (required for torch models)")
    parser.add_argument("--device", default="cpu")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--stdio", action="store_true", help="serve on stdin/stdout (default)")
    mode.add_argument("--tcp", type=int, metavar="PORT", help="listen on 127.0.0.1:PORT")
    args = parser.parse_args(argv)
    labels = tuple(l.strip() for l in args.labels.split(",") if l.strip())
    try:
        config = AdapterConfig(model_path=Path(args.model), labels=labels,
                               device=args.device,
                               mode=f"tcp:{args.tcp}" if args.tcp is not None else "stdio")
        serve(config)
    except ModelError as exc:
        sys.stderr.write(f"mrx-adapter: {exc}\n")
        return 1
    except (KeyboardInterrupt, BrokenPipeError):
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
