"""Server half of the newline-delimited JSON detector protocol.

Implemented independently of the attack package: the wire format is the only
shared contract. One JSON object per line over stdio or TCP; a hello
handshake announces the wrapped model, detect requests carry base64 8-bit
grayscale pixels, and every malformed line gets an error reply while the
connection stays open.
"""

from __future__ import annotations

import base64
import json
import socketserver
import sys
from dataclasses import dataclass
from typing import Callable, IO, Iterable

import numpy as np

PROTO_VERSION = 1


@dataclass(frozen=True)
class WireDetection:
    x1: float
    y1: float
    x2: float
    y2: float
    conf: float
    cls: str = "person"

    def to_doc(self) -> dict:
        return {
            "x1": self.x1,
            "y1": self.y1,
            "x2": self.x2,
            "y2": self.y2,
            "conf": self.conf,
            "cls": self.cls,
        }


DetectorFn = Callable[[np.ndarray], list[WireDetection]]


def decode_image(msg: dict) -> np.ndarray:
    width, height = int(msg["width"]), int(msg["height"])
    raw = base64.b64decode(str(msg["pixels"]).encode("ascii"), validate=True)
    if len(raw) != width * height:
        raise ValueError(f"pixel payload holds {len(raw)} bytes, expected {width}x{height}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width) / 255.0


def _reply_for(line: str, detector: DetectorFn, name: str, classes: list[str],
               startup_error: str | None) -> dict:
    try:
        msg = json.loads(line)
        if not isinstance(msg, dict) or "type" not in msg:
            raise ValueError("message must be a JSON object with a 'type' field")
    except ValueError as exc:
        return {"type": "error", "id": None, "message": f"bad message: {exc}"}
    rid = msg.get("id")
    if startup_error is not None:
        return {"type": "error", "id": rid, "message": startup_error}
    kind = msg.get("type")
    if kind == "hello":
        return {"type": "hello", "proto": PROTO_VERSION, "name": name, "classes": classes}
    if kind == "detect":
        try:
            image = decode_image(msg)
            detections = detector(image)
            return {
                "type": "detections",
                "id": int(rid),
                "detections": [d.to_doc() for d in detections],
            }
        except Exception as exc:  # noqa: BLE001 - becomes a protocol error reply
            return {"type": "error", "id": rid, "message": f"detect failed: {exc}"}
    return {"type": "error", "id": rid, "message": f"unknown message type {kind!r}"}


def serve_stream(
    reader: IO[str],
    writer: IO[str],
    detector: DetectorFn,
    name: str,
    classes: Iterable[str] = ("person",),
    startup_error: str | None = None,
) -> None:
    """Serve one connection until EOF.

    With startup_error set (weights failed to load) every message, including
    the handshake, is answered with that error; the caller then exits
    nonzero.
    """
    classes = list(classes)
    for line in reader:
        if not line.strip():
            continue
        reply = _reply_for(line, detector, name, classes, startup_error)
        writer.write(json.dumps(reply, separators=(",", ":")) + "\n")
        writer.flush()
        if startup_error is not None:
            return


def serve_stdio(detector: DetectorFn, name: str, classes: Iterable[str] = ("person",),
                startup_error: str | None = None) -> None:
    serve_stream(sys.stdin, sys.stdout, detector, name, classes, startup_error)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def make_tcp_server(
    host: str,
    port: int,
    detector: DetectorFn,
    name: str,
    classes: Iterable[str] = ("person",),
    startup_error: str | None = None,
) -> socketserver.TCPServer:
    classes = list(classes)

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            for raw in self.rfile:
                line = raw.decode("utf-8")
                if not line.strip():
                    continue
                reply = _reply_for(line, detector, name, classes, startup_error)
                self.wfile.write((json.dumps(reply, separators=(",", ":")) + "\n").encode("utf-8"))
                self.wfile.flush()
                if startup_error is not None:
                    return

    return _Server((host, port), Handler)
