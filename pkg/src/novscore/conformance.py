"""Protocol conformance checks runnable against any backend command.

Library use: ``run_conformance(cmd)`` returns a list of (name, ok, detail)
results. Command-line use prints one line per check and exits nonzero on
any failure:

    python -m novscore.conformance [--fingerprint HEX] -- CMD [ARGS...]
"""

from __future__ import annotations

import argparse
import sys
from typing import Callable, Sequence

from .errors import BackendRequestError, ProtocolError
from .protocol import PROTO_VERSION, BackendClient


class Check:
    def __init__(self, name: str):
        self.name = name
        self.ok = True
        self.detail = ""

    def fail(self, detail: str) -> None:
        self.ok = False
        self.detail = detail


def run_conformance(
    cmd: Sequence[str], expected_fingerprint: str | None = None
) -> list[tuple[str, bool, str]]:
    """Exercise a backend command against the protocol contract."""
    results: list[tuple[str, bool, str]] = []

    def check(name: str) -> Check:
        c = Check(name)
        results.append(c)  # type: ignore[arg-type]
        return c

    c = check("handshake")
    try:
        client = BackendClient(cmd, expected_fingerprint=expected_fingerprint)
    except ProtocolError as exc:
        c.fail(str(exc))
        return [(r.name, r.ok, r.detail) for r in results]
    caps = client.capabilities
    if caps.proto != PROTO_VERSION:
        c.fail(f"proto {caps.proto}")
    if caps.max_context < 2:
        c.fail(f"max_context {caps.max_context}")
    if not caps.vocab_fingerprint:
        c.fail("empty vocab_fingerprint")

    with client:
        probe = [0, 0, 0]

        c = check("score_shape")
        try:
            lps = client.score_window(probe)
            if len(lps) != len(probe):
                c.fail(f"length {len(lps)} != {len(probe)}")
            elif lps[0] is not None:
                c.fail("position 0 not null")
        except ProtocolError as exc:
            c.fail(str(exc))
            return [(r.name, r.ok, r.detail) for r in results]

        c = check("score_deterministic")
        try:
            again = client.score_window(probe)
            if again != lps:
                c.fail(f"{again} != {lps}")
        except ProtocolError as exc:
            c.fail(str(exc))

        c = check("oversize_request_rejected_session_survives")
        try:
            client._request(
                {"op": "score", "tokens": [0] * (caps.max_context + 1)}
            )
            c.fail("oversize request was not rejected")
        except BackendRequestError:
            try:
                client.score_window(probe)
            except ProtocolError as exc:
                c.fail(f"session died after error record: {exc}")
        except ProtocolError as exc:
            c.fail(f"fatal instead of error record: {exc}")

        c = check("unknown_op_rejected")
        try:
            client._request({"op": "frobnicate", "tokens": probe})
            c.fail("unknown op accepted")
        except BackendRequestError:
            pass
        except ProtocolError as exc:
            c.fail(f"fatal instead of error record: {exc}")

        if caps.supports_topk:
            c = check("topk_contract")
            try:
                rows = client.topk_remote(probe, 5)
                if not rows:
                    c.fail("empty topk")
                elif len({tid for tid, _ in rows}) != len(rows):
                    c.fail("duplicate token ids")
                else:
                    one = client.topk_remote(probe, 1)
                    if one[0] != rows[0]:
                        c.fail(f"k=1 head {one[0]} != k=5 head {rows[0]}")
            except ProtocolError as exc:
                c.fail(str(exc))

            c = check("topk_bad_k_rejected")
            try:
                client._request({"op": "topk", "tokens": probe, "k": 0})
                c.fail("k=0 accepted")
            except BackendRequestError:
                pass
            except ProtocolError as exc:
                c.fail(f"fatal instead of error record: {exc}")

    return [(r.name, r.ok, r.detail) for r in results]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="novscore.conformance",
        description="Run protocol conformance checks against a backend command.",
    )
    parser.add_argument("--fingerprint", default=None, help="expected vocab fingerprint")
    parser.add_argument("cmd", nargs=argparse.REMAINDER, help="-- CMD [ARGS...]")
    args = parser.parse_args(argv)
    cmd = args.cmd
    if cmd and cmd[0] == "--":
        cmd = cmd[1:]
    if not cmd:
        parser.error("no backend command given")
    results = run_conformance(cmd, expected_fingerprint=args.fingerprint)
    failed = 0
    for name, ok, detail in results:
        line = f"{'PASS' if ok else 'FAIL'} {name}"
        if detail:
            line += f": {detail}"
        print(line)
        failed += 0 if ok else 1
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
