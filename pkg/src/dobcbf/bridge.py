"""Line-oriented JSON bridge to an external action source.

One exchange per control step.  Request and reply are single UTF-8 lines:

    request  {"t": 0.01, "x": [..], "last_reward": -0.5, "done": false}
    reply    {"u": [..]}

The peer is either a child process attached on its standard streams or a
local TCP socket.  Replies are awaited with a deadline; a missing, late, or
malformed reply raises a distinct error so the harness can count each kind.
"""

from __future__ import annotations

import json
import queue
import socket
import subprocess
import threading

import numpy as np

from .errors import BridgeProtocolError, BridgeTimeoutError


class PolicyBridge:
    """Synchronous request/response channel; no pipelining."""

    def __init__(self, command: list[str] | None = None,
                 address: tuple[str, int] | None = None,
                 timeout: float = 0.1):
        if (command is None) == (address is None):
            raise ValueError("exactly one of command or address is required")
        self.timeout = timeout
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._proc = None
        self._sock = None
        if command is not None:
            self._proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
            reader = threading.Thread(
                target=self._pump, args=(self._proc.stdout,), daemon=True)
        else:
            self._sock = socket.create_connection(address, timeout=timeout)
            reader = threading.Thread(
                target=self._pump, args=(self._sock.makefile("r", encoding="utf-8"),),
                daemon=True)
        reader.start()

    def _pump(self, stream):
        try:
            for line in stream:
                self._lines.put(line)
        except Exception:
            pass
        self._lines.put(None)

    def _send(self, payload: dict):
        line = json.dumps(payload, separators=(",", ":")) + "\n"
        if self._proc is not None:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()
        else:
            self._sock.sendall(line.encode("utf-8"))

    def request(self, t: float, x: np.ndarray, last_reward: float | None,
                done: bool) -> np.ndarray:
        self._send({"t": float(t), "x": [float(v) for v in np.asarray(x).ravel()],
                    "last_reward": None if last_reward is None else float(last_reward),
                    "done": bool(done)})
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise BridgeTimeoutError(
                f"no reply within {self.timeout * 1000:.0f} ms") from None
        if line is None:
            raise BridgeProtocolError("peer closed the stream")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeProtocolError(f"unparseable reply: {line!r}") from exc
        if not isinstance(reply, dict) or "u" not in reply:
            raise BridgeProtocolError(f"reply missing 'u' field: {line!r}")
        u = np.asarray(reply["u"], dtype=float).ravel()
        if not np.all(np.isfinite(u)):
            raise BridgeProtocolError("reply action contains non-finite values")
        return u

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except Exception:
                pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        if self._sock is not None:
            try:
                self._sock.close()
            except Exception:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
