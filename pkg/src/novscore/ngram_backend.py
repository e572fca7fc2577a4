"""Reference protocol-v1 backend serving a saved n-gram model over stdio.

Run as ``python -m novscore.ngram_backend MODEL_FILE``. Remote scores match
the in-process model bit-exactly: floats are serialized with shortest
round-trip decimal representation, which JSON parses back to the same
double.
"""

from __future__ import annotations

import argparse
import sys

from .ngram import NGramModel
from .protocol import PROTO_VERSION, serve_lines

MAX_CONTEXT = 1 << 20


def _validate_tokens(record: dict, vocab_size: int) -> list[int]:
    tokens = record.get("tokens")
    if not isinstance(tokens, list) or not all(
        isinstance(t, int) and not isinstance(t, bool) for t in tokens
    ):
        raise ValueError("tokens must be a list of integers")
    if any(t < 0 or t >= vocab_size for t in tokens):
        raise ValueError(f"token id out of range [0, {vocab_size})")
    if len(tokens) > MAX_CONTEXT:
        raise ValueError(f"request exceeds max_context {MAX_CONTEXT}")
    return tokens


def make_handler(model: NGramModel):
    def handle(record: dict) -> dict:
        op = record.get("op")
        if op == "score":
            tokens = _validate_tokens(record, model.vocab_size)
            lps = model.window_logprobs(tokens)
            for x in lps[1:]:
                if x is None or x != x or x == float("-inf"):
                    raise ValueError("model produced a non-finite logprob")
            return {"logprobs": lps}
        if op == "topk":
            tokens = _validate_tokens(record, model.vocab_size)
            k = record.get("k")
            if not isinstance(k, int) or isinstance(k, bool):
                raise ValueError("k must be an integer")
            if not 1 <= k <= model.vocab_size:
                raise ValueError(f"k must be in [1, {model.vocab_size}]")
            rows = model.topk(tokens, k)
            return {"topk": [[tid, p] for tid, p in rows]}
        raise ValueError(f"unknown op {op!r}")

    return handle


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="novscore.ngram_backend",
        description="Serve a saved n-gram model over the stdio protocol.",
    )
    parser.add_argument("model", help="path to a saved model file")
    args = parser.parse_args(argv)
    model = NGramModel.load(args.model)
    hello = {
        "proto": PROTO_VERSION,
        "vocab_fingerprint": model.vocab_fingerprint,
        "max_context": MAX_CONTEXT,
        "supports_topk": True,
    }
    serve_lines(sys.stdin, sys.stdout, hello, make_handler(model))
    return 0


if __name__ == "__main__":
    sys.exit(main())
