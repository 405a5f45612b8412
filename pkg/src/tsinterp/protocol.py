"""Newline-delimited JSON scoring protocol (child process stdin/stdout or TCP).

Frames, one JSON object per line:
  client -> {"type": "hello", "version": 1}
  server -> {"type": "ready", "n_classes": K, "m": M, "t": T}
  client -> {"type": "score", "id": n, "batch": B, "x": [B*M*T floats]}
  server -> {"type": "logits", "id": n, "y": [B*K floats]}
  server -> {"type": "error", "id": n, "msg": "..."}
Request ids are strictly increasing per connection.
"""

from __future__ import annotations

import json
import select
import socket
import subprocess

import numpy as np

from .errors import (
    ExternalScorerFailure,
    HandshakeFailed,
    ProtocolViolation,
    ScorerTimeout,
)
from .models import Scorer

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 60.0


class ExternalScorer(Scorer):
    """Scorer backed by a scoring server reached over the wire protocol.

    endpoint: either "tcp:HOST:PORT" or a command line to launch as a child
    process (given as a list of argv strings).
    """

    max_concurrency = 1

    def __init__(self, endpoint: list[str] | str, timeout: float = DEFAULT_TIMEOUT,
                 expected_shape: tuple[int, int] | None = None,
                 expected_classes: int | None = None):
        self.timeout = timeout
        self._next_id = 0
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._buffer = b""
        if isinstance(endpoint, str) and endpoint.startswith("tcp:"):
            _, host, port = endpoint.split(":")
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
            self.scorer_id = f"external:{endpoint}"
        else:
            argv = endpoint.split() if isinstance(endpoint, str) else list(endpoint)
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=False
            )
            self.scorer_id = f"external:{' '.join(argv)}"
        try:
            self._send({"type": "hello", "version": PROTOCOL_VERSION})
            ready = self._recv()
        except ExternalScorerFailure as err:
            self.close()
            raise HandshakeFailed(str(err)) from err
        if ready.get("type") != "ready":
            self.close()
            raise HandshakeFailed(f"expected ready frame, got {ready.get('type')!r}")
        for key in ("n_classes", "m", "t"):
            if not isinstance(ready.get(key), int) or ready[key] <= 0:
                self.close()
                raise HandshakeFailed(f"ready frame missing valid {key!r}")
        self.n_classes = ready["n_classes"]
        self.input_shape = (ready["m"], ready["t"])
        if expected_shape is not None and self.input_shape != tuple(expected_shape):
            self.close()
            raise HandshakeFailed(
                f"scorer advertises shape {self.input_shape}, dataset has {tuple(expected_shape)}")
        if expected_classes is not None and self.n_classes != expected_classes:
            self.close()
            raise HandshakeFailed(
                f"scorer advertises {self.n_classes} classes, dataset has {expected_classes}")

    # -- framing --

    def _send(self, obj: dict) -> None:
        data = (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")
        try:
            if self._sock is not None:
                self._sock.sendall(data)
            else:
                assert self._proc is not None and self._proc.stdin is not None
                self._proc.stdin.write(data)
                self._proc.stdin.flush()
        except (OSError, BrokenPipeError, ValueError) as err:
            raise ExternalScorerFailure(f"failed to send frame: {err}") from err

    def _read_chunk(self) -> bytes:
        if self._sock is not None:
            self._sock.settimeout(self.timeout)
            try:
                return self._sock.recv(65536)
            except socket.timeout as err:
                raise ScorerTimeout("no response within timeout") from err
        assert self._proc is not None and self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        ready, _, _ = select.select([fd], [], [], self.timeout)
        if not ready:
            raise ScorerTimeout("no response within timeout")
        import os
        return os.read(fd, 65536)

    def _recv(self) -> dict:
        while b"\n" not in self._buffer:
            chunk = self._read_chunk()
            if not chunk:
                raise ExternalScorerFailure("scorer closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        try:
            obj = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise ProtocolViolation(f"malformed frame: {line[:80]!r}") from err
        if not isinstance(obj, dict):
            raise ProtocolViolation("frame is not a JSON object")
        return obj

    # -- scoring --

    def score_batch(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        b = x.shape[0]
        if b == 0:
            return np.empty((0, self.n_classes))
        req_id = self._next_id
        self._next_id += 1
        self._send({"type": "score", "id": req_id, "batch": b,
                    "x": [float(v) for v in x.reshape(-1)]})
        resp = self._recv()
        if resp.get("type") == "error":
            raise ExternalScorerFailure(f"scorer error: {resp.get('msg')}")
        if resp.get("type") != "logits" or resp.get("id") != req_id:
            raise ProtocolViolation(f"unexpected frame {resp.get('type')!r} (id {resp.get('id')})")
        y = np.asarray(resp.get("y"), dtype=np.float64)
        if y.shape != (b * self.n_classes,):
            raise ProtocolViolation(f"logits length {y.size}, expected {b * self.n_classes}")
        return y.reshape(b, self.n_classes)

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None
        if self._proc is not None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5)
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve_connection(scorer: Scorer, rfile, wfile) -> None:
    """Answer protocol frames for one connection (used by servers and tests).

    Malformed requests produce error frames; the loop survives them and exits
    when the peer closes the stream.
    """
    m, t = scorer.input_shape

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
            reply({"type": "ready", "n_classes": scorer.n_classes, "m": m, "t": t})
        elif kind == "score":
            req_id = msg.get("id", -1)
            try:
                b = int(msg["batch"])
                x = np.asarray(msg["x"], dtype=np.float64).reshape(b, m, t)
                logits = scorer.score_batch(x)
                reply({"type": "logits", "id": req_id, "y": [float(v) for v in logits.reshape(-1)]})
            except Exception as err:  # report, keep serving
                reply({"type": "error", "id": req_id, "msg": str(err)})
        else:
            reply({"type": "error", "id": msg.get("id", -1), "msg": f"unknown frame type {kind!r}"})
