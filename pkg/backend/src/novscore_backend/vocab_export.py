"""Convert a byte-level BPE fast tokenizer into the engine's vocabulary file.

The scoring engine identifies vocabularies by the sha256 of a canonical
single-file serialization (format "novscore-vocab", version 1: vocab_size,
special_tokens, merges as id pairs in learned order, per-id byte tables in
hex). Writing that file for the model's own tokenizer lets the engine
tokenize compatibly and lets the handshake fingerprint check pass.
"""

from __future__ import annotations

import hashlib
import json

from .byte_codec import token_to_bytes

VOCAB_FORMAT = "novscore-vocab"
VOCAB_FORMAT_VERSION = 1


class ExportError(ValueError):
    pass


def export_vocabulary(tokenizer) -> dict:
    """Build the canonical vocabulary dict from a HF fast tokenizer."""
    backend = getattr(tokenizer, "backend_tokenizer", None)
    if backend is None:
        raise ExportError(
            "tokenizer has no fast backend; only byte-level BPE fast "
            "tokenizers can be exported"
        )
    spec = json.loads(backend.to_str())
    model = spec.get("model", {})
    if model.get("type") != "BPE":
        raise ExportError(f"unsupported tokenizer model {model.get('type')!r}")

    vocab: dict[str, int] = dict(model["vocab"])
    specials: dict[str, int] = {}
    for added in spec.get("added_tokens", []):
        if added.get("special"):
            specials[added["content"]] = added["id"]
            vocab.setdefault(added["content"], added["id"])

    size = max(vocab.values()) + 1
    id_to_bytes: list[bytes | None] = [None] * size
    for token, tid in vocab.items():
        if not 0 <= tid < size or id_to_bytes[tid] is not None:
            raise ExportError(f"token id {tid} duplicated or out of range")
        id_to_bytes[tid] = token_to_bytes(token)
    holes = [i for i, b in enumerate(id_to_bytes) if b is None]
    if holes:
        raise ExportError(f"vocabulary has {len(holes)} unassigned ids")

    present = {b for b in id_to_bytes if len(b) == 1}
    if len(present) < 256:
        raise ExportError(
            f"not a byte-level vocabulary: only {len(present)} of 256 "
            f"single-byte tokens present"
        )

    merges: list[list[int]] = []
    for pair in model["merges"]:
        left, right = pair if isinstance(pair, (list, tuple)) else pair.split(" ", 1)
        try:
            merges.append([vocab[left], vocab[right]])
        except KeyError as exc:
            raise ExportError(f"merge references unknown token {exc}") from exc

    return {
        "format": VOCAB_FORMAT,
        "version": VOCAB_FORMAT_VERSION,
        "vocab_size": size,
        "special_tokens": {k: specials[k] for k in sorted(specials)},
        "merges": merges,
        "id_to_bytes": [b.hex() for b in id_to_bytes],
    }


def canonical_bytes(exported: dict) -> bytes:
    return json.dumps(exported, sort_keys=True, separators=(",", ":")).encode("utf-8")


def vocab_fingerprint(exported: dict) -> str:
    return hashlib.sha256(canonical_bytes(exported)).hexdigest()


def write_vocabulary(exported: dict, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(canonical_bytes(exported))
        fh.write(b"\n")
