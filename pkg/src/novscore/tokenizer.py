"""Trainable byte-level byte-pair-encoding tokenizer.

Text is handled as raw bytes: the 256 single-byte tokens are always in the
vocabulary, so any input can be encoded and decoded back byte-exactly, with
no normalization of any kind. Merges are learned greedily by descending pair
frequency; equal-frequency pairs are broken by lexicographic order of the
pair's byte sequences, so training is deterministic.

Pair statistics are collected within chunks produced by a byte-class
pre-splitter (see ``split_chunks``), and encoding applies merges within the
same chunks, so a merge never spans a chunk boundary. Chunk boundaries only
shape which merges are learnable; round-tripping is unaffected.
"""

from __future__ import annotations

import heapq
import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import TokenizerError

VOCAB_FORMAT = "novscore-vocab"
VOCAB_FORMAT_VERSION = 1

DEFAULT_VOCAB_SIZE = 50304
END_OF_DOC = "<|endoftext|>"

_SPACE = 0x20

def _class_of(b: int) -> int:
    if 0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A:
        return 0  # ASCII letter
    if 0x30 <= b <= 0x39:
        return 1  # ASCII digit
    if b in b" \t\n\r\x0b\x0c":
        return 2  # whitespace
    return 3  # everything else, including all non-ASCII bytes


# Per-byte class lookup; indexing a bytes object is the hot path.
_CLASS = bytes(_class_of(b) for b in range(256))


def _byte_class(b: int) -> int:
    return _CLASS[b]


_RUNS = re.compile(rb"\x00+|\x01+|\x02+|\x03+")


def split_chunks(data: bytes) -> Iterator[bytes]:
    """Split bytes into merge-scoped chunks; concatenation reproduces input.

    A chunk is a maximal run of one byte class (letters, digits, other),
    optionally preceded by a single ASCII space, or a run of whitespace.
    A whitespace run followed by a non-space chunk donates its final byte
    to that chunk when it is an ASCII space.
    """
    n = len(data)
    classes = data.translate(_CLASS)
    attach = -1
    for m in _RUNS.finditer(classes):
        i, j = m.span()
        if classes[i] == 2:
            # Whitespace run: when followed by more text and ending in a
            # plain space, that space attaches to the next chunk.
            if j < n and data[j - 1] == _SPACE:
                if j - 1 > i:
                    yield data[i : j - 1]
                attach = j - 1
            else:
                yield data[i:j]
        elif attach >= 0:
            yield data[attach:j]
            attach = -1
        else:
            yield data[i:j]


@dataclass(frozen=True)
class TokenSequence:
    """An encoded document: token ids plus an opaque document identifier."""

    ids: tuple[int, ...]
    doc_id: str = ""

    def __len__(self) -> int:
        return len(self.ids)


class Vocabulary:
    """Immutable byte-level BPE vocabulary.

    Training produces the layout ids 0..255 = single bytes, then merge
    products in learned order, then special tokens. Loaded vocabularies may
    use any id layout as long as all 256 single-byte tokens are present, so
    externally built byte-level BPE vocabularies can be imported. Special
    tokens are never produced by encoding plain text; their ids only enter
    streams when inserted explicitly (e.g. the end-of-document marker).
    """

    def __init__(
        self,
        merges: list[tuple[int, int]],
        special_tokens: dict[str, int],
        id_to_bytes: list[bytes] | None = None,
    ):
        self.merges = list(merges)
        self.special_tokens = dict(special_tokens)
        if id_to_bytes is None:
            table = [bytes([i]) for i in range(256)]
            for left, right in self.merges:
                if left >= len(table) or right >= len(table):
                    raise TokenizerError(
                        f"merge ({left},{right}) references unknown token id"
                    )
                table.append(table[left] + table[right])
            for name, tid in sorted(self.special_tokens.items(), key=lambda kv: kv[1]):
                if tid != len(table):
                    raise TokenizerError(
                        f"special token {name!r} id {tid} is not contiguous"
                    )
                table.append(name.encode("utf-8"))
            self.id_to_bytes = table
        else:
            self.id_to_bytes = list(id_to_bytes)
        self.vocab_size = len(self.id_to_bytes)
        self._bytes_to_id: dict[bytes, int] = {
            b: i for i, b in enumerate(self.id_to_bytes)
        }
        self._validate()
        self._byte_id = [self._bytes_to_id[bytes([b])] for b in range(256)]
        # Lower rank merges first during encoding; each product resolves to
        # its token id through the byte table (ids need not be 256+rank).
        self._merge_rank: dict[tuple[int, int], tuple[int, int]] = {}
        for rank, (left, right) in enumerate(self.merges):
            product = self.id_to_bytes[left] + self.id_to_bytes[right]
            merged_id = self._bytes_to_id.get(product)
            if merged_id is None:
                raise TokenizerError(
                    f"merge {rank} product {product!r} has no token id"
                )
            self._merge_rank[(left, right)] = (rank, merged_id)
        self._encode_cache: dict[bytes, tuple[int, ...]] = {}

    def _validate(self) -> None:
        if len(self._bytes_to_id) != self.vocab_size:
            raise TokenizerError("id_to_bytes is not injective")
        missing = [b for b in range(256) if bytes([b]) not in self._bytes_to_id]
        if missing:
            raise TokenizerError(
                f"vocabulary must contain all 256 single-byte tokens "
                f"(missing {len(missing)}, first {missing[0]:#04x})"
            )
        for name, tid in self.special_tokens.items():
            if not 0 <= tid < self.vocab_size:
                raise TokenizerError(f"special token {name!r} id out of range")

    # ------------------------------------------------------------------
    # Training
    # ------------------------------------------------------------------

    @classmethod
    def train_bpe(
        cls,
        corpus: Iterable[bytes | str],
        vocab_size: int = DEFAULT_VOCAB_SIZE,
        special_tokens: Iterable[str] = (END_OF_DOC,),
    ) -> "Vocabulary":
        """Learn a vocabulary of exactly ``vocab_size`` entries from a corpus.

        ``corpus`` is a stream of documents (bytes or str). Raises
        TokenizerError if the corpus is empty, the vocab budget is below
        256 + number of specials, or the corpus cannot support the requested
        number of merges.
        """
        specials = list(dict.fromkeys(special_tokens))
        n_merges = vocab_size - 256 - len(specials)
        if n_merges < 0:
            raise TokenizerError(
                f"vocab_size {vocab_size} below minimum {256 + len(specials)}"
            )

        chunk_counts: Counter[bytes] = Counter()
        n_docs = 0
        for doc in corpus:
            data = doc.encode("utf-8") if isinstance(doc, str) else doc
            if data:
                n_docs += 1
                chunk_counts.update(split_chunks(data))
        if n_docs == 0:
            raise TokenizerError("empty corpus")

        merges = cls._learn_merges(chunk_counts, n_merges)
        special_ids = {name: 256 + n_merges + i for i, name in enumerate(specials)}
        return cls(merges, special_ids)

    @staticmethod
    def _learn_merges(
        chunk_counts: Counter[bytes], n_merges: int
    ) -> list[tuple[int, int]]:
        # Work over unique chunk types with multiplicities; each word is a
        # mutable id list. pair -> total count and pair -> set of word indexes
        # are kept incrementally; a lazy max-heap picks the next merge.
        words: list[list[int]] = []
        wcount: list[int] = []
        for chunk, c in chunk_counts.items():
            words.append(list(chunk))
            wcount.append(c)

        table: list[bytes] = [bytes([i]) for i in range(256)]
        pair_counts: Counter[tuple[int, int]] = Counter()
        occ: dict[tuple[int, int], set[int]] = {}
        for wi, w in enumerate(words):
            c = wcount[wi]
            for pair in zip(w, w[1:]):
                pair_counts[pair] += c
                occ.setdefault(pair, set()).add(wi)

        # Heap entries carry (-count, left bytes, right bytes, pair); byte
        # sequences implement the lexicographic tie-break.
        heap: list[tuple[int, bytes, bytes, tuple[int, int]]] = [
            (-c, table[p[0]], table[p[1]], p) for p, c in pair_counts.items()
        ]
        heapq.heapify(heap)

        merges: list[tuple[int, int]] = []
        while len(merges) < n_merges:
            pair = None
            while heap:
                negc, _, _, cand = heapq.heappop(heap)
                if pair_counts.get(cand, 0) == -negc and negc < 0:
                    pair = cand
                    break
            if pair is None:
                raise TokenizerError(
                    f"corpus exhausted after {len(merges)} merges; "
                    f"cannot reach {n_merges}"
                )
            new_id = len(table)
            table.append(table[pair[0]] + table[pair[1]])
            merges.append(pair)

            touched: set[tuple[int, int]] = set()
            for wi in occ.pop(pair, ()):
                w = words[wi]
                c = wcount[wi]
                for p in zip(w, w[1:]):
                    pair_counts[p] -= c
                    touched.add(p)
                new_w: list[int] = []
                i = 0
                while i < len(w):
                    if i + 1 < len(w) and w[i] == pair[0] and w[i + 1] == pair[1]:
                        new_w.append(new_id)
                        i += 2
                    else:
                        new_w.append(w[i])
                        i += 1
                words[wi] = new_w
                for p in zip(new_w, new_w[1:]):
                    pair_counts[p] += c
                    touched.add(p)
                    occ.setdefault(p, set()).add(wi)
            pair_counts.pop(pair, None)
            touched.discard(pair)
            for p in touched:
                c = pair_counts.get(p, 0)
                if c > 0:
                    heapq.heappush(heap, (-c, table[p[0]], table[p[1]], p))
                else:
                    pair_counts.pop(p, None)
                    occ.pop(p, None)
        return merges

    # ------------------------------------------------------------------
    # Encode / decode
    # ------------------------------------------------------------------

    def _encode_chunk(self, chunk: bytes) -> tuple[int, ...]:
        cached = self._encode_cache.get(chunk)
        if cached is not None:
            return cached
        byte_id = self._byte_id
        ids = [byte_id[b] for b in chunk]
        ranks = self._merge_rank
        while len(ids) >= 2:
            best_rank = None
            best_pair = None
            new_id = -1
            for p in zip(ids, ids[1:]):
                rm = ranks.get(p)
                if rm is not None and (best_rank is None or rm[0] < best_rank):
                    best_rank, new_id = rm
                    best_pair = p
            if best_pair is None:
                break
            out: list[int] = []
            i = 0
            while i < len(ids):
                if (
                    i + 1 < len(ids)
                    and ids[i] == best_pair[0]
                    and ids[i + 1] == best_pair[1]
                ):
                    out.append(new_id)
                    i += 2
                else:
                    out.append(ids[i])
                    i += 1
            ids = out
        result = tuple(ids)
        if len(self._encode_cache) < (1 << 20):
            self._encode_cache[chunk] = result
        return result

    def encode(self, text: bytes | str, doc_id: str = "") -> TokenSequence:
        """Encode text into token ids; deterministic, never emits specials."""
        data = text.encode("utf-8") if isinstance(text, str) else text
        ids: list[int] = []
        for chunk in split_chunks(data):
            ids.extend(self._encode_chunk(chunk))
        return TokenSequence(ids=tuple(ids), doc_id=doc_id)

    def decode(self, tokens: TokenSequence | Iterable[int]) -> bytes:
        """Concatenate each id's byte sequence; unknown id raises."""
        ids = tokens.ids if isinstance(tokens, TokenSequence) else tokens
        out = bytearray()
        for tid in ids:
            if not 0 <= tid < self.vocab_size:
                raise TokenizerError(f"token id {tid} out of range")
            out += self.id_to_bytes[tid]
        return bytes(out)

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def _canonical_dict(self) -> dict:
        return {
            "format": VOCAB_FORMAT,
            "version": VOCAB_FORMAT_VERSION,
            "vocab_size": self.vocab_size,
            "special_tokens": {k: self.special_tokens[k] for k in sorted(self.special_tokens)},
            "merges": [[a, b] for a, b in self.merges],
            "id_to_bytes": [t.hex() for t in self.id_to_bytes],
        }

    def to_bytes(self) -> bytes:
        return json.dumps(
            self._canonical_dict(), sort_keys=True, separators=(",", ":")
        ).encode("utf-8")

    @property
    def fingerprint(self) -> str:
        """sha256 of the canonical serialization; identifies the vocabulary."""
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())
            fh.write(b"\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, "rb") as fh:
            raw = fh.read()
        try:
            obj = json.loads(raw)
        except ValueError as exc:
            raise TokenizerError(f"unreadable vocabulary file {path}: {exc}") from exc
        if not isinstance(obj, dict) or obj.get("format") != VOCAB_FORMAT:
            raise TokenizerError(f"{path} is not a vocabulary file")
        if obj.get("version") != VOCAB_FORMAT_VERSION:
            raise TokenizerError(
                f"vocabulary format version {obj.get('version')} unsupported "
                f"(expected {VOCAB_FORMAT_VERSION})"
            )
        vocab = cls(
            merges=[(a, b) for a, b in obj["merges"]],
            special_tokens=dict(obj["special_tokens"]),
            id_to_bytes=[bytes.fromhex(h) for h in obj["id_to_bytes"]],
        )
        if vocab.vocab_size != obj["vocab_size"]:
            raise TokenizerError(f"{path}: vocab_size field disagrees with tables")
        return vocab

    @property
    def end_of_doc_id(self) -> int | None:
        """Id of the end-of-document marker when that special is present."""
        return self.special_tokens.get(END_OF_DOC)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.to_bytes() == other.to_bytes()

    def __repr__(self) -> str:
        return (
            f"Vocabulary(size={self.vocab_size}, merges={len(self.merges)}, "
            f"specials={sorted(self.special_tokens)})"
        )
