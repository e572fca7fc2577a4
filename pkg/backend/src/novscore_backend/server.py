"""Protocol v1 scoring server around a pretrained causal transformer.

Wire format (line-delimited JSON over stdin/stdout, natural-log
probabilities, floats serialized with round-trip precision):

    hello     {"proto": 1, "vocab_fingerprint": "...", "max_context": N,
               "supports_topk": true}
    request   {"id": n, "op": "score"|"topk", "tokens": [...], "k"?: k}
    response  {"id": n, "logprobs": [...]}, {"id": n, "topk": [[id, p], ...]}
              or {"id": n, "error": "..."}

A request error (oversize, bad ids, unknown op) answers with an error
record and the session continues; the model loads before the hello line, so
a load failure exits nonzero without speaking.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass

PROTO_VERSION = 1


@dataclass
class UniformConfig:
    """Test double: uniform distribution over ``vocab_size`` tokens."""

    vocab_size: int
    fingerprint: str = "uniform-test-double"
    max_context: int = 4096


@dataclass
class ModelConfig:
    model_dir: str
    device: str = "cpu"
    max_context: int | None = None


class UniformScorer:
    def __init__(self, cfg: UniformConfig):
        self.vocab_size = cfg.vocab_size
        self.fingerprint = cfg.fingerprint
        self.max_context = cfg.max_context
        self._lp = math.log(1.0 / cfg.vocab_size)

    def logprobs(self, tokens: list[int]) -> list[float | None]:
        return [None] + [self._lp] * (len(tokens) - 1) if tokens else []

    def topk(self, tokens: list[int], k: int) -> list[tuple[int, float]]:
        p = 1.0 / self.vocab_size
        return [(i, p) for i in range(k)]


class TransformerScorer:
    """Single forward pass per request; deterministic eval mode on CPU."""

    def __init__(self, cfg: ModelConfig):
        import numpy as np
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        from .vocab_export import export_vocabulary, vocab_fingerprint

        self._np = np
        self._torch = torch
        torch.set_num_threads(1)
        self.tokenizer = AutoTokenizer.from_pretrained(
            cfg.model_dir, local_files_only=True
        )
        self.model = AutoModelForCausalLM.from_pretrained(
            cfg.model_dir, local_files_only=True
        )
        self.model.to(cfg.device)
        self.model.eval()
        self.device = cfg.device

        exported = export_vocabulary(self.tokenizer)
        self.fingerprint = vocab_fingerprint(exported)
        # Ids the engine can produce; model embeddings may be padded wider.
        self.vocab_size = exported["vocab_size"]
        self.model_vocab = int(self.model.get_input_embeddings().weight.shape[0])
        if self.model_vocab < self.vocab_size:
            raise RuntimeError(
                f"model embedding table ({self.model_vocab}) smaller than "
                f"tokenizer vocabulary ({self.vocab_size})"
            )
        limit = getattr(self.model.config, "n_positions", None) or getattr(
            self.model.config, "max_position_embeddings", None
        )
        if limit is None:
            raise RuntimeError("model config does not state a positional limit")
        self.max_context = min(cfg.max_context or limit, limit)

    def _log_dist(self, tokens: list[int]):
        torch = self._torch
        ids = torch.tensor([tokens], dtype=torch.long, device=self.device)
        with torch.no_grad():
            logits = self.model(ids).logits[0]
        return torch.log_softmax(logits.double(), dim=-1)

    def logprobs(self, tokens: list[int]) -> list[float | None]:
        if len(tokens) < 2:
            return [None] * len(tokens)
        lp = self._log_dist(tokens)
        out: list[float | None] = [None]
        for i in range(1, len(tokens)):
            out.append(float(lp[i - 1, tokens[i]]))
        return out

    def topk(self, tokens: list[int], k: int) -> list[tuple[int, float]]:
        np = self._np
        lp = self._log_dist(tokens)[-1].cpu().numpy()
        probs = np.exp(lp[: self.vocab_size])
        order = np.argsort(-probs, kind="stable")[:k]
        return [(int(i), float(probs[i])) for i in order]


def _validated_tokens(record: dict, vocab_size: int, max_context: int) -> list[int]:
    tokens = record.get("tokens")
    if not isinstance(tokens, list) or not all(
        isinstance(t, int) and not isinstance(t, bool) for t in tokens
    ):
        raise ValueError("tokens must be a list of integers")
    if any(t < 0 or t >= vocab_size for t in tokens):
        raise ValueError(f"token id out of range [0, {vocab_size})")
    if len(tokens) > max_context:
        raise ValueError(f"request exceeds max_context {max_context}")
    return tokens


def serve(scorer, instream=None, outstream=None) -> None:
    instream = instream or sys.stdin
    outstream = outstream or sys.stdout
    hello = {
        "proto": PROTO_VERSION,
        "vocab_fingerprint": scorer.fingerprint,
        "max_context": scorer.max_context,
        "supports_topk": True,
    }
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
            op = record.get("op")
            if op == "score":
                tokens = _validated_tokens(
                    record, scorer.vocab_size, scorer.max_context
                )
                lps = scorer.logprobs(tokens)
                for x in lps[1:]:
                    if x is None or x != x or x > 0.0 or math.isinf(x):
                        raise ValueError("model produced an invalid logprob")
                response = {"id": rid, "logprobs": lps}
            elif op == "topk":
                tokens = _validated_tokens(
                    record, scorer.vocab_size, scorer.max_context
                )
                k = record.get("k")
                if not isinstance(k, int) or isinstance(k, bool):
                    raise ValueError("k must be an integer")
                if not 1 <= k <= scorer.vocab_size:
                    raise ValueError(f"k must be in [1, {scorer.vocab_size}]")
                rows = scorer.topk(tokens, k)
                response = {"id": rid, "topk": [[t, p] for t, p in rows]}
            else:
                raise ValueError(f"unknown op {op!r}")
        except json.JSONDecodeError as exc:
            response = {"id": None, "error": f"malformed request line: {exc}"}
        except ValueError as exc:
            response = {"id": rid, "error": str(exc)}
        outstream.write(json.dumps(response) + "\n")
        outstream.flush()
