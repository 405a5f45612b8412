"""Scoring server speaking the benchmark's newline-delimited JSON protocol.

Frames (one JSON object per line):
  client -> {"type": "hello", "version": 1}
  server -> {"type": "ready", "n_classes": K, "m": M, "t": T}
  client -> {"type": "score", "id": n, "batch": B, "x": [B*M*T floats]}
  server -> {"type": "logits", "id": n, "y": [B*K floats]}
  server -> {"type": "error", "id": n, "msg": "..."}
"""

from __future__ import annotations

import json
import socket
import sys

import numpy as np
from torch import nn

from .models import score

PROTOCOL_VERSION = 1


def serve_stream(model: nn.Module, rfile, wfile, batch_size: int = 256) -> None:
    """Answer frames on a byte stream until the peer closes it.

    Requests are handled one at a time (single-flight); malformed input
    produces an error frame and the loop keeps serving.
    """
    m, t = model.input_shape

    def reply(obj: dict) -> None:
        wfile.write((json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8"))
        wfile.flush()

    for raw in rfile:
        try:
            msg = json.loads(raw.decode("utf-8"))
            kind = msg.get("type")
        except (UnicodeDecodeError, json.JSONDecodeError):
            reply({"type": "error", "id": -1, "msg": "malformed frame"})
            continue
        if kind == "hello":
            reply({"type": "ready", "n_classes": model.n_classes, "m": m, "t": t})
        elif kind == "score":
            req_id = msg.get("id", -1)
            try:
                b = int(msg["batch"])
                x = np.asarray(msg["x"], dtype=np.float32).reshape(b, m, t)
                logits = score(model, x, batch_size=batch_size)
                reply({"type": "logits", "id": req_id,
                       "y": [float(v) for v in logits.reshape(-1)]})
            except Exception as err:  # report, keep serving
                reply({"type": "error", "id": req_id, "msg": str(err)})
        else:
            reply({"type": "error", "id": msg.get("id", -1),
                   "msg": f"unknown frame type {kind!r}"})


def serve_stdio(model: nn.Module, batch_size: int = 256) -> None:
    serve_stream(model, sys.stdin.buffer, sys.stdout.buffer, batch_size=batch_size)


def serve_tcp(model: nn.Module, host: str, port: int, batch_size: int = 256,
              max_connections: int | None = None) -> None:
    """Accept connections one at a time and serve each until it closes."""
    server = socket.create_server((host, port))
    served = 0
    try:
        while max_connections is None or served < max_connections:
            conn, _ = server.accept()
            with conn, conn.makefile("rb") as rf, conn.makefile("wb") as wf:
                serve_stream(model, rf, wf, batch_size=batch_size)
            served += 1
    finally:
        server.close()
