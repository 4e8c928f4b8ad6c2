"""Client side of the external-predictor wire protocol.

Newline-delimited JSON, UTF-8, one object per line, one in-flight request per
connection (replies match requests strictly in order; there are no request
ids). NaN/Infinity tokens are rejected in both directions; senders must fail
instead of emitting them.

    -> {"op":"handshake"}              <- {"ok":true,"name":...,"n_features":...,"version":1}
    -> {"op":"predict","X":[[...]...]} <- {"ok":true,"y":[...]}
    -> anything                        <- {"ok":false,"error":"..."} on failure
"""

import json
import os
import selectors
import socket
import subprocess
import sys
import time
from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix
from .errors import (
    ArityMismatch,
    BridgeTimeout,
    MalformedReply,
    RemoteModelError,
    TransportError,
    VersionMismatch,
)
from .predictor import Predictor

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class BridgeConfig:
    transport: str = "stdio"        # "stdio" | "tcp"
    command: tuple = None           # argv for stdio mode
    host: str = "127.0.0.1"
    port: int = 0
    timeout: float = 10.0
    max_batch: int = 1024
    check_arity: bool = True

    def __post_init__(self):
        if self.transport not in ("stdio", "tcp"):
            raise ValueError(f"transport must be stdio or tcp, got {self.transport!r}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.transport == "stdio" and not self.command:
            raise ValueError("stdio transport needs a launch command")
        if self.command is not None:
            object.__setattr__(self, "command", tuple(self.command))


@dataclass(frozen=True)
class RemoteDescriptor:
    name: str
    n_features: int
    version: int


def _reject_constant(token):
    raise ValueError(f"forbidden JSON token {token!r}")


class _LineChannel:
    """Deadline-aware line framing shared by both transports."""

    def __init__(self):
        self._buffer = b""

    def _read_some(self, deadline):  # pragma: no cover - abstract
        raise NotImplementedError

    def recv_line(self, timeout):
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buffer:
            chunk = self._read_some(deadline)
            if chunk is None:
                raise BridgeTimeout(f"no reply within {timeout:g}s")
            if chunk == b"":
                raise TransportError("connection closed while awaiting reply")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line


class _StdioChannel(_LineChannel):
    def __init__(self, command):
        super().__init__()
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=sys.stderr.fileno() if hasattr(sys.stderr, "fileno") else None,
            )
        except OSError as exc:
            raise TransportError(f"cannot launch {command!r}: {exc}") from exc
        self.selector = selectors.DefaultSelector()
        self.selector.register(self.proc.stdout, selectors.EVENT_READ)

    def send_line(self, data):
        if self.proc.poll() is not None:
            raise TransportError(
                f"server process exited with code {self.proc.returncode}"
            )
        try:
            self.proc.stdin.write(data + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"server pipe closed: {exc}") from exc

    def _read_some(self, deadline):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return None
        if not self.selector.select(timeout=remaining):
            return None
        return os.read(self.proc.stdout.fileno(), 1 << 16)

    def close(self):
        self.selector.close()
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class _TcpChannel(_LineChannel):
    def __init__(self, host, port, timeout):
        super().__init__()
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc

    def send_line(self, data):
        try:
            self.sock.sendall(data + b"\n")
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _read_some(self, deadline):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return None
        self.sock.settimeout(remaining)
        try:
            return self.sock.recv(1 << 16)
        except socket.timeout:
            return None
        except OSError as exc:
            raise TransportError(f"recv failed: {exc}") from exc

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class BridgeClient:
    """Serial protocol client; one in-flight request per connection."""

    def __init__(self, config):
        self.config = config
        self.descriptor = None
        if config.transport == "stdio":
            self.channel = _StdioChannel(config.command)
        else:
            self.channel = _TcpChannel(config.host, config.port, config.timeout)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def close(self):
        self.channel.close()

    def _roundtrip(self, payload, context):
        try:
            data = json.dumps(payload, allow_nan=False).encode("utf-8")
        except ValueError as exc:
            raise TransportError(f"refusing to send non-finite numbers: {exc}") from exc
        self.channel.send_line(data)
        line = self.channel.recv_line(self.config.timeout)
        try:
            reply = json.loads(line.decode("utf-8"), parse_constant=_reject_constant)
        except (UnicodeDecodeError, ValueError) as exc:
            raise MalformedReply(f"unparseable reply to {context}: {exc}") from exc
        if not isinstance(reply, dict) or "ok" not in reply:
            raise MalformedReply(f"reply to {context} lacks an 'ok' field")
        if reply["ok"] is not True:
            raise RemoteModelError(
                f"server error replying to {context}: {reply.get('error', 'unknown')}"
            )
        return reply

    def handshake(self):
        reply = self._roundtrip({"op": "handshake"}, "handshake")
        try:
            descriptor = RemoteDescriptor(
                name=str(reply["name"]),
                n_features=int(reply["n_features"]),
                version=int(reply["version"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedReply(f"bad handshake reply: {exc}") from None
        if descriptor.version != PROTOCOL_VERSION:
            raise VersionMismatch(
                f"server speaks protocol {descriptor.version}, "
                f"client needs {PROTOCOL_VERSION}"
            )
        self.descriptor = descriptor
        return descriptor

    def predict_batch(self, X):
        """Predict with order-preserving splitting at max_batch rows."""
        if self.descriptor is None:
            self.handshake()
        X = check_matrix(X, name="X")
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.float64)
        if self.config.check_arity and X.shape[1] != self.descriptor.n_features:
            raise ArityMismatch(
                f"server expects {self.descriptor.n_features} columns, "
                f"got {X.shape[1]}"
            )
        out = np.empty(X.shape[0], dtype=np.float64)
        step = self.config.max_batch
        for index, start in enumerate(range(0, X.shape[0], step)):
            chunk = X[start : start + step]
            try:
                reply = self._roundtrip(
                    {"op": "predict", "X": chunk.tolist()}, f"predict batch {index}"
                )
            except BridgeTimeout as exc:
                raise BridgeTimeout(f"batch {index}: {exc}") from None
            y = reply.get("y")
            if not isinstance(y, list) or len(y) != chunk.shape[0]:
                raise MalformedReply(
                    f"batch {index}: expected {chunk.shape[0]} predictions, "
                    f"got {len(y) if isinstance(y, list) else type(y).__name__}"
                )
            try:
                out[start : start + chunk.shape[0]] = np.asarray(y, dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise MalformedReply(f"batch {index}: non-numeric y: {exc}") from None
        if not np.isfinite(out).all():
            raise MalformedReply("server returned non-finite predictions")
        return out

    def as_predictor(self):
        """Predictor facade; declares itself serial so the engine funnels
        all coalition evaluations through this one connection."""
        if self.descriptor is None:
            self.handshake()
        return Predictor(
            self.predict_batch,
            self.descriptor.n_features,
            name=f"bridge:{self.descriptor.name}",
            serial=True,
        )
