"""Client side of the external-scorer wire protocol (version 1).

Transport is line-delimited JSON over a child process's stdin/stdout. The
backend speaks first with a hello record; after that the client sends one
request at a time and reads one response:

    hello     {"proto": 1, "vocab_fingerprint": "...", "max_context": N,
               "supports_topk": true}
    request   {"id": n, "op": "score", "tokens": [...]}
              {"id": n, "op": "topk", "tokens": [...], "k": k}
    response  {"id": n, "logprobs": [null, -1.2, ...]}
              {"id": n, "topk": [[token_id, prob], ...]}
              {"id": n, "error": "..."}

Logprobs are natural log. Backends must serialize floats so that they
round-trip to the same double (17 significant digits suffice). A malformed
or invalid response line kills the session; a structured error record only
fails the request. One request is in flight per process; scale by running
several backend processes.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import BackendRequestError, ProtocolError

PROTO_VERSION = 1
DEFAULT_TIMEOUT = 120.0


@dataclass(frozen=True)
class BackendCapabilities:
    proto: int
    vocab_fingerprint: str
    max_context: int
    supports_topk: bool
    logprob_base: str = "e"


class BackendClient:
    """Handle to one backend process; not shareable across concurrent callers."""

    def __init__(
        self,
        cmd: Sequence[str],
        *,
        expected_fingerprint: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.cmd = list(cmd)
        self.timeout = timeout
        self._next_id = 0
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot launch backend {self.cmd}: {exc}") from exc
        self._lines: "queue.Queue[str | None]" = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.capabilities = self._handshake(expected_fingerprint)

    @property
    def vocab_fingerprint(self) -> str:
        return self.capabilities.vocab_fingerprint

    def _pump(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def _read_record(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._fail("backend timed out")
        if line is None:
            self._fail("backend closed its output (process exit?)")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            self._fail(f"malformed protocol line: {exc}")
        if not isinstance(record, dict):
            self._fail("protocol record is not an object")
        return record

    def _fail(self, message: str) -> None:
        self.close()
        raise ProtocolError(message)

    def _handshake(self, expected_fingerprint: str | None) -> BackendCapabilities:
        record = self._read_record()
        if record.get("proto") != PROTO_VERSION:
            self._fail(
                f"backend speaks protocol {record.get('proto')!r}, "
                f"expected {PROTO_VERSION}"
            )
        try:
            caps = BackendCapabilities(
                proto=int(record["proto"]),
                vocab_fingerprint=str(record["vocab_fingerprint"]),
                max_context=int(record["max_context"]),
                supports_topk=bool(record["supports_topk"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            self._fail(f"malformed hello record: {exc}")
        if caps.max_context < 2:
            self._fail(f"backend max_context {caps.max_context} < 2")
        if (
            expected_fingerprint is not None
            and caps.vocab_fingerprint != expected_fingerprint
        ):
            self._fail(
                f"vocabulary fingerprint mismatch: backend serves "
                f"{caps.vocab_fingerprint[:12]}..., this run uses "
                f"{expected_fingerprint[:12]}...; refusing to score"
            )
        return caps

    def _request(self, payload: dict) -> dict:
        if self._closed:
            raise ProtocolError("backend session is closed")
        self._next_id += 1
        rid = self._next_id
        payload = {"id": rid, **payload}
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._fail("backend closed its input (process exit?)")
        record = self._read_record()
        if record.get("id") != rid:
            self._fail(
                f"response id {record.get('id')!r} does not match request {rid}"
            )
        if "error" in record:
            raise BackendRequestError(str(record["error"]))
        return record

    def score_window(self, tokens: Sequence[int]) -> list[Optional[float]]:
        """Per-position natural-log probabilities; position 0 is None."""
        if len(tokens) > self.capabilities.max_context:
            raise ProtocolError(
                f"request of {len(tokens)} tokens exceeds backend "
                f"max_context {self.capabilities.max_context}"
            )
        record = self._request({"op": "score", "tokens": list(tokens)})
        lps = record.get("logprobs")
        if not isinstance(lps, list) or len(lps) != len(tokens):
            self._fail("score response length does not match request")
        if not lps:
            return []
        if lps[0] is not None:
            self._fail("score response must carry null at position 0")
        out: list[Optional[float]] = [None]
        for x in lps[1:]:
            if not isinstance(x, (int, float)) or isinstance(x, bool):
                self._fail(f"non-numeric logprob {x!r}")
            x = float(x)
            if math.isnan(x) or math.isinf(x) or x > 0.0:
                self._fail(f"invalid logprob {x!r} (must be finite and <= 0)")
            out.append(x)
        return out

    # Alias matching the operation named in the module contract.
    score_remote = score_window

    def topk_remote(self, tokens: Sequence[int], k: int) -> list[tuple[int, float]]:
        """Ranked (token id, probability) continuations after ``tokens``."""
        if not self.capabilities.supports_topk:
            raise ProtocolError("backend does not support the topk operation")
        if k < 1:
            raise ProtocolError(f"k must be >= 1, got {k}")
        record = self._request({"op": "topk", "tokens": list(tokens), "k": k})
        rows = record.get("topk")
        if not isinstance(rows, list):
            self._fail("topk response missing ranked list")
        out: list[tuple[int, float]] = []
        for row in rows:
            if not isinstance(row, (list, tuple)) or len(row) != 2:
                self._fail(f"malformed topk row {row!r}")
            tid, p = row
            if not isinstance(tid, int) or isinstance(tid, bool) or tid < 0:
                self._fail(f"bad token id in topk row {row!r}")
            p = float(p)
            if math.isnan(p) or not 0.0 <= p <= 1.0:
                self._fail(f"bad probability in topk row {row!r}")
            out.append((tid, p))
        for (i1, p1), (i2, p2) in zip(out, out[1:]):
            if p2 > p1 or (p2 == p1 and i2 <= i1):
                self._fail("topk rows not in (descending prob, ascending id) order")
        return out

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=0.5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "BackendClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve_lines(instream, outstream, hello: dict, handler) -> None:
    """Generic server loop for protocol v1 implementations.

    ``handler(record) -> dict`` produces the response body (without id) or
    raises ValueError for a per-request error record. Used by the built-in
    reference backend; external backends mirror the wire format directly.
    """
    outstream.write(json.dumps(hello) + "\n")
    outstream.flush()
    for line in instream:
        if not line.strip():
            continue
        rid = None
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("request is not an object")
            rid = record.get("id")
            body = handler(record)
            response = {"id": rid, **body}
        except json.JSONDecodeError as exc:
            response = {"id": None, "error": f"malformed request line: {exc}"}
        except ValueError as exc:
            response = {"id": rid, "error": str(exc)}
        outstream.write(json.dumps(response) + "\n")
        outstream.flush()
