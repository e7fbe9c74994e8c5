"""Client for remote encoders speaking newline-delimited JSON.

The sidecar (spawned subprocess or TCP peer) answers one response per request,
correlated by id. First exchange is a hello handshake that reports the model's
embedding dimension:

    -> {"op": "hello", "id": 0}
    <- {"id": 0, "dim": 512, "model": "..."}

Then any number of:

    -> {"op": "encode_text",  "id": n, "items": ["...", ...]}
    -> {"op": "encode_image", "id": n, "items": ["<path>", ...]}
    -> {"op": "vocab",        "id": n}
    <- {"id": n, "dim": D, "vectors": [[...], ...]}
    <- {"id": n, "tokens": ["...", ...]}
    <- {"id": n, "error": "<message>"}

Vectors arrive row-major as finite floats (typically float32 on the wire) and
are widened to float64 here. The client keeps exactly one request in flight
per connection; callers wanting parallelism open several connections.
"""

from __future__ import annotations

import json
import os
import selectors
import socket
import subprocess
from typing import Sequence

import numpy as np

from .encoders import Vocabulary
from .errors import ProtocolError, RemoteError, RemoteTimeoutError

DEFAULT_MAX_BATCH = 256
DEFAULT_TIMEOUT = 60.0


class _StdioTransport:
    """Line transport over a spawned sidecar's stdin/stdout."""

    def __init__(self, command: Sequence[str]) -> None:
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=None,
        )
        self._buffer = b""
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)

    def send_line(self, line: str) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(line.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError(f"sidecar closed its stdin: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        while b"\n" not in self._buffer:
            if not self._selector.select(timeout):
                raise RemoteTimeoutError(f"no response within {timeout}s")
            chunk = os.read(self._proc.stdout.fileno(), 65536)
            if not chunk:
                raise ProtocolError("sidecar closed the connection mid-exchange")
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line.decode("utf-8")

    def close(self) -> None:
        self._selector.close()
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class _SocketTransport:
    """Line transport over an established TCP stream."""

    def __init__(self, host: str, port: int, connect_timeout: float = 10.0) -> None:
        self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        self._buffer = b""

    def send_line(self, line: str) -> None:
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            raise ProtocolError(f"socket send failed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        self._sock.settimeout(timeout)
        while b"\n" not in self._buffer:
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout:
                raise RemoteTimeoutError(f"no response within {timeout}s") from None
            if not chunk:
                raise ProtocolError("peer closed the connection mid-exchange")
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line.decode("utf-8")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class RemoteEncoder:
    """Encoder handle backed by a sidecar over the wire protocol."""

    kind = "remote"

    def __init__(self, transport, max_batch: int = DEFAULT_MAX_BATCH, timeout: float = DEFAULT_TIMEOUT) -> None:
        if max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {max_batch}")
        self._transport = transport
        self._max_batch = int(max_batch)
        self._timeout = float(timeout)
        self._next_id = 1
        self._vocab: Vocabulary | None = None
        reply = self._exchange({"op": "hello", "id": 0}, expected_id=0)
        dim = reply.get("dim")
        if not isinstance(dim, int) or dim < 1:
            raise ProtocolError(f"handshake reported invalid dim {dim!r}")
        self._dim = dim
        self.model = str(reply.get("model", "unknown"))

    @classmethod
    def spawn(cls, command: Sequence[str], **kwargs) -> "RemoteEncoder":
        """Launch ``command`` as a sidecar subprocess and handshake."""
        return cls(_StdioTransport(command), **kwargs)

    @classmethod
    def connect_tcp(cls, host: str, port: int, **kwargs) -> "RemoteEncoder":
        return cls(_SocketTransport(host, port), **kwargs)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def vocab(self) -> Vocabulary:
        return self.vocabulary()

    def _exchange(self, request: dict, expected_id: int) -> dict:
        self._transport.send_line(json.dumps(request))
        line = self._transport.recv_line(self._timeout)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed response: {line[:200]!r}") from exc
        if not isinstance(reply, dict):
            raise ProtocolError(f"response is not an object: {line[:200]!r}")
        if reply.get("id") != expected_id:
            raise ProtocolError(f"response id {reply.get('id')!r} does not match request id {expected_id}")
        if "error" in reply:
            raise RemoteError(str(reply["error"]))
        return reply

    def _request_vectors(self, op: str, items: Sequence[str]) -> np.ndarray:
        request_id = self._next_id
        self._next_id += 1
        reply = self._exchange({"op": op, "id": request_id, "items": list(items)}, expected_id=request_id)
        vectors = reply.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(items):
            raise ProtocolError(f"expected {len(items)} vectors, got {type(vectors).__name__}")
        if "dim" in reply and reply["dim"] != self._dim:
            raise ProtocolError(f"response dim {reply['dim']} does not match handshake dim {self._dim}")
        try:
            matrix = np.asarray(vectors, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"vectors are not numeric: {exc}") from exc
        if matrix.ndim != 2 or matrix.shape[1] != self._dim:
            raise ProtocolError(f"vector shape {matrix.shape} does not match dim {self._dim}")
        if not np.all(np.isfinite(matrix)):
            raise ProtocolError("response contains non-finite values")
        return matrix

    def _encode_batched(self, op: str, items: Sequence[str]) -> np.ndarray:
        if not items:
            raise ValueError("batch must be non-empty")
        chunks = [
            self._request_vectors(op, items[start : start + self._max_batch])
            for start in range(0, len(items), self._max_batch)
        ]
        return chunks[0] if len(chunks) == 1 else np.vstack(chunks)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        return self._encode_batched("encode_text", texts)

    def encode_text(self, text: str) -> np.ndarray:
        return self.encode_texts([text])[0]

    def encode_images(self, paths: Sequence[str]) -> np.ndarray:
        return self._encode_batched("encode_image", paths)

    def encode_sequence(self, seq: Sequence[int]) -> np.ndarray:
        """Encode a token-id sequence by rendering it through the remote vocabulary."""
        return self.encode_text(self.vocabulary().decode(seq))

    def vocabulary(self) -> Vocabulary:
        """Fetch (and cache) the sidecar's token inventory."""
        if self._vocab is None:
            request_id = self._next_id
            self._next_id += 1
            reply = self._exchange({"op": "vocab", "id": request_id}, expected_id=request_id)
            tokens = reply.get("tokens")
            if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
                raise ProtocolError("vocab response carries no token list")
            self._vocab = Vocabulary(tuple(tokens))
        return self._vocab

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self._dim, "model": self.model, "max_batch": self._max_batch}

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "RemoteEncoder":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
