"""Minimal client for the ``msdash serve-bridge`` endpoint.

Frames are a 4-byte big-endian length followed by a UTF-8 JSON object.
"""

import json
import socket
import struct

MAX_FRAME_BYTES = 16 * 1024 * 1024


class BridgeError(RuntimeError):
    def __init__(self, reply):
        super().__init__(f"{reply.get('code')}: {reply.get('message')}")
        self.code = reply.get("code")
        self.reply = reply


def encode_frame(message):
    payload = json.dumps(message).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise ValueError("frame too large")
    return struct.pack(">I", len(payload)) + payload


def _recv_exact(sock, n):
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock):
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (n,) = struct.unpack(">I", header)
    if n > MAX_FRAME_BYTES:
        raise ConnectionError(f"frame of {n} bytes exceeds the limit")
    payload = _recv_exact(sock, n)
    if payload is None:
        raise ConnectionError("truncated frame payload")
    return json.loads(payload)


class BridgeClient:
    def __init__(self, host="127.0.0.1", port=5555, timeout=30.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._next_id = 1

    def call(self, kind, **fields):
        message = {"id": self._next_id, "kind": kind, **fields}
        self._next_id += 1
        self._sock.sendall(encode_frame(message))
        reply = read_frame(self._sock)
        if reply is None:
            raise ConnectionError("server closed the connection")
        return reply

    def reset(self, seed=0):
        return self._checked(self.call("reset", seed=seed))

    def step(self, action):
        return self._checked(self.call("step", action=int(action)))

    def close(self):
        try:
            return self.call("close")
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self._sock.fileno() >= 0:
            self.close()

    @staticmethod
    def _checked(reply):
        if reply.get("kind") == "error":
            raise BridgeError(reply)
        return reply
