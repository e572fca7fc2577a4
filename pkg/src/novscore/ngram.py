"""Count-based causal language model with modified Kneser-Ney smoothing.

The model assigns a strictly positive conditional probability to every
vocabulary token given any history, looking only at the last ``order - 1``
history tokens. Distributions are exactly normalized by construction: at
each backoff level the discounted probability mass equals the interpolation
weight handed to the level below, and the lowest level interpolates with the
uniform distribution over the vocabulary.

An ``mle`` smoothing mode (plain count ratios, no backoff, zeros allowed)
exists so tests can compare against brute-force counting oracles.

N-grams and histories are keyed by exact integer packing in base
``vocab_size``, which requires ``vocab_size ** order < 2**63`` (order 4
supports vocabularies beyond 50k tokens; order 5 up to 6208).
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, ModelError
from .tokenizer import TokenSequence

MODEL_FORMAT = "novscore-ngram"
MODEL_FORMAT_VERSION = 1

KNESER_NEY = "kneser-ney"
MLE = "mle"

# Per-distribution probability floor, scaled by vocabulary size.
PROB_FLOOR_SCALE = 1e-10

_MIN_DISCOUNT = 0.01
_LN2 = math.log(2.0)


def _estimate_discounts(counts: np.ndarray) -> tuple[float, float, float]:
    """Modified Kneser-Ney discounts from count-of-counts, with guards.

    Degenerate statistics (missing count buckets on tiny corpora) fall back
    to neighboring estimates; results are clamped so that the discount for
    bucket i never exceeds i, which keeps normalization exact.
    """
    cc = np.bincount(np.minimum(counts, 5), minlength=6)
    n1, n2, n3, n4 = int(cc[1]), int(cc[2]), int(cc[3]), int(cc[4])
    y = n1 / (n1 + 2.0 * n2) if (n1 + 2 * n2) > 0 else 0.75
    d1 = 1.0 - 2.0 * y * n2 / n1 if n1 > 0 else 0.5
    d2 = 2.0 - 3.0 * y * n3 / n2 if n2 > 0 else d1
    d3 = 3.0 - 4.0 * y * n4 / n3 if n3 > 0 else d2
    d1 = min(max(d1, _MIN_DISCOUNT), 1.0)
    d2 = min(max(d2, _MIN_DISCOUNT), 2.0)
    d3 = min(max(d3, _MIN_DISCOUNT), 3.0)
    return d1, d2, d3


@dataclass
class _Level:
    """Tables for one backoff level (history length ``m``).

    ``keys`` holds packed (m+1)-grams sorted ascending, ``cnt`` their counts
    (raw at the highest level and in mle mode, continuation counts below).
    ``hkeys``/``htot``/``hgamma`` hold per-history aggregates; ``hgamma`` is
    empty in mle mode.
    """

    keys: np.ndarray
    cnt: np.ndarray
    hkeys: np.ndarray
    htot: np.ndarray
    hgamma: np.ndarray
    discounts: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def find_history(self, packed: int) -> int:
        i = int(np.searchsorted(self.hkeys, packed))
        if i < len(self.hkeys) and int(self.hkeys[i]) == packed:
            return i
        return -1

    def gram_count(self, packed_gram: int) -> int:
        i = int(np.searchsorted(self.keys, packed_gram))
        if i < len(self.keys) and int(self.keys[i]) == packed_gram:
            return int(self.cnt[i])
        return 0


class NGramModel:
    """Immutable after training; safe for concurrent readers."""

    def __init__(
        self,
        order: int,
        smoothing: str,
        vocab_size: int,
        marker_id: int,
        levels: list[_Level],
        vocab_fingerprint: str = "",
        metadata: dict | None = None,
    ):
        self.order = order
        self.smoothing = smoothing
        self.vocab_size = vocab_size
        self.marker_id = marker_id
        self.levels = levels
        self.vocab_fingerprint = vocab_fingerprint
        self.metadata = metadata or {}
        self._floor = PROB_FLOOR_SCALE / vocab_size
        self._floored_cache: dict[tuple[int, ...], np.ndarray] = {}

    # ------------------------------------------------------------------
    # Training
    # ------------------------------------------------------------------

    @classmethod
    def train(
        cls,
        corpus: Iterable[TokenSequence | Sequence[int]],
        order: int,
        vocab_size: int,
        marker_id: int,
        smoothing: str = KNESER_NEY,
        vocab_fingerprint: str = "",
    ) -> "NGramModel":
        """Count n-grams over the concatenated document stream and estimate.

        Every document must begin with the end-of-document marker token.
        """
        if order < 1:
            raise ModelError(f"order must be >= 1, got {order}")
        if smoothing not in (KNESER_NEY, MLE):
            raise ModelError(f"unknown smoothing {smoothing!r}")
        if vocab_size < 1:
            raise ModelError("vocab_size must be positive")
        if vocab_size ** order >= 2 ** 63:
            raise ModelError(
                f"vocab_size {vocab_size} with order {order} exceeds exact "
                f"integer packing range (need vocab_size**order < 2**63)"
            )

        parts: list[np.ndarray] = []
        n_docs = 0
        digest = hashlib.sha256()
        for doc in corpus:
            ids = doc.ids if isinstance(doc, TokenSequence) else tuple(doc)
            if len(ids) == 0:
                continue
            if ids[0] != marker_id:
                raise DataError(
                    "training document does not begin with the "
                    f"end-of-document marker (id {marker_id})"
                )
            arr = np.asarray(ids, dtype=np.int64)
            if arr.min() < 0 or arr.max() >= vocab_size:
                raise DataError("token id out of vocabulary range")
            parts.append(arr)
            digest.update(arr.tobytes())
            n_docs += 1
        if n_docs == 0:
            raise DataError("empty training corpus")
        stream = np.concatenate(parts)

        raw: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for n in range(1, order + 1):
            packed = cls._pack_windows(stream, n, vocab_size)
            if len(packed) == 0:
                raw[n] = (np.empty(0, np.int64), np.empty(0, np.int64))
            else:
                keys, cnt = np.unique(packed, return_counts=True)
                raw[n] = (keys, cnt.astype(np.int64))

        levels: list[_Level] = []
        for m in range(order):
            if smoothing == MLE or m == order - 1:
                keys, cnt = raw[m + 1]
            else:
                # Continuation counts: distinct left extensions of each
                # (m+1)-gram, read off the raw (m+2)-grams.
                upkeys, _ = raw[m + 2]
                suffix = upkeys % (vocab_size ** (m + 1))
                keys, cnt = np.unique(suffix, return_counts=True)
                cnt = cnt.astype(np.int64)
            levels.append(cls._build_level(keys, cnt, vocab_size, smoothing))

        meta = {
            "n_docs": n_docs,
            "n_tokens": int(stream.size),
            "corpus_sha256": digest.hexdigest(),
        }
        return cls(
            order=order,
            smoothing=smoothing,
            vocab_size=vocab_size,
            marker_id=marker_id,
            levels=levels,
            vocab_fingerprint=vocab_fingerprint,
            metadata=meta,
        )

    @staticmethod
    def _pack_windows(stream: np.ndarray, n: int, vocab_size: int) -> np.ndarray:
        m = stream.size - n + 1
        if m <= 0:
            return np.empty(0, np.int64)
        key = np.zeros(m, dtype=np.int64)
        for j in range(n):
            key *= vocab_size
            key += stream[j : j + m]
        return key

    @staticmethod
    def _build_level(
        keys: np.ndarray, cnt: np.ndarray, vocab_size: int, smoothing: str
    ) -> _Level:
        if keys.size == 0:
            empty_i = np.empty(0, np.int64)
            empty_f = np.empty(0, np.float64)
            return _Level(empty_i, empty_i, empty_i, empty_i, empty_f)
        hist = keys // vocab_size
        hkeys, starts = np.unique(hist, return_index=True)
        htot = np.add.reduceat(cnt, starts)
        if smoothing == MLE:
            return _Level(keys, cnt, hkeys, htot, np.empty(0, np.float64))
        d1, d2, d3 = _estimate_discounts(cnt)
        n1 = np.add.reduceat((cnt == 1).astype(np.int64), starts)
        n2 = np.add.reduceat((cnt == 2).astype(np.int64), starts)
        n3p = np.add.reduceat((cnt >= 3).astype(np.int64), starts)
        hgamma = (d1 * n1 + d2 * n2 + d3 * n3p) / htot
        return _Level(keys, cnt, hkeys, htot, hgamma, (d1, d2, d3))

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    def _suffix(self, history: Sequence[int]) -> tuple[int, ...]:
        ids = history.ids if isinstance(history, TokenSequence) else history
        h = tuple(ids[-(self.order - 1) :]) if self.order > 1 else ()
        for t in h:
            if not 0 <= t < self.vocab_size:
                raise ModelError(f"history token id {t} out of range")
        return h

    def _pack(self, ids: tuple[int, ...]) -> int:
        key = 0
        for t in ids:
            key = key * self.vocab_size + t
        return key

    def _discount_for(self, level: _Level, count: int) -> float:
        d1, d2, d3 = level.discounts
        if count == 1:
            return d1
        if count == 2:
            return d2
        return d3

    def prob(self, history: Sequence[int] | TokenSequence, token: int) -> float:
        """Conditional probability of ``token`` after ``history``.

        Depends only on the last ``order - 1`` history tokens. Strictly
        positive under Kneser-Ney; may be zero in mle mode.
        """
        if not 0 <= token < self.vocab_size:
            raise ModelError(f"token id {token} out of range")
        h = self._suffix(history)
        if self.smoothing == MLE:
            return self._prob_mle(h, token)
        walk = self._walk(h)
        bound = 1.0 / self.vocab_size
        for _, gamma in walk:
            bound *= gamma
        if bound < self._floor:
            return float(self._floored_dist(h)[token])
        return self._fold(h, token, walk)

    def _walk(self, h: tuple[int, ...]) -> list[tuple[int, float]]:
        """Backoff levels that exist for this history, deepest first.

        Returns (history length m, gamma) pairs including the unigram level.
        """
        out: list[tuple[int, float]] = []
        for m in range(min(len(h), self.order - 1), -1, -1):
            level = self.levels[m]
            hk = self._pack(h[len(h) - m :])
            row = level.find_history(hk)
            if row < 0:
                continue
            out.append((m, float(level.hgamma[row])))
        return out

    def _fold(
        self, h: tuple[int, ...], token: int, walk: list[tuple[int, float]]
    ) -> float:
        p = 1.0 / self.vocab_size
        for m, gamma in reversed(walk):
            level = self.levels[m]
            hk = self._pack(h[len(h) - m :])
            c = level.gram_count(hk * self.vocab_size + token)
            if c > 0:
                row = level.find_history(hk)
                f = (c - self._discount_for(level, c)) / float(level.htot[row])
            else:
                f = 0.0
            p = f + gamma * p
        return p

    def _prob_mle(self, h: tuple[int, ...], token: int) -> float:
        m = len(h)
        level = self.levels[m]
        hk = self._pack(h)
        row = level.find_history(hk)
        if row < 0:
            return 0.0
        c = level.gram_count(hk * self.vocab_size + token)
        return c / float(level.htot[row])

    def dist(self, history: Sequence[int] | TokenSequence) -> np.ndarray:
        """Dense conditional distribution over the whole vocabulary.

        Agrees bit-exactly with ``prob`` for every token.
        """
        h = self._suffix(history)
        v = self.vocab_size
        if self.smoothing == MLE:
            p = np.zeros(v, dtype=np.float64)
            m = len(h)
            level = self.levels[m]
            hk = self._pack(h)
            row = level.find_history(hk)
            if row >= 0:
                lo = int(np.searchsorted(level.keys, hk * v))
                hi = int(np.searchsorted(level.keys, hk * v + v))
                ids = (level.keys[lo:hi] - hk * v).astype(np.int64)
                p[ids] = level.cnt[lo:hi] / float(level.htot[row])
            return p
        walk = self._walk(h)
        p = self._dense_fold(h, walk)
        bound = 1.0 / v
        for _, gamma in walk:
            bound *= gamma
        if bound < self._floor:
            return self._apply_floor(p)
        return p

    def _dense_fold(
        self, h: tuple[int, ...], walk: list[tuple[int, float]]
    ) -> np.ndarray:
        v = self.vocab_size
        p = np.full(v, 1.0 / v, dtype=np.float64)
        for m, gamma in reversed(walk):
            level = self.levels[m]
            hk = self._pack(h[len(h) - m :])
            lo = int(np.searchsorted(level.keys, hk * v))
            hi = int(np.searchsorted(level.keys, hk * v + v))
            f = np.zeros(v, dtype=np.float64)
            if hi > lo:
                ids = (level.keys[lo:hi] - hk * v).astype(np.int64)
                cnt = level.cnt[lo:hi].astype(np.float64)
                d1, d2, d3 = level.discounts
                disc = np.where(cnt == 1.0, d1, np.where(cnt == 2.0, d2, d3))
                row = level.find_history(hk)
                f[ids] = (cnt - disc) / float(level.htot[row])
            p = f + gamma * p
        return p

    def _apply_floor(self, p: np.ndarray) -> np.ndarray:
        q = np.maximum(p, self._floor)
        return q / q.sum()

    def _floored_dist(self, h: tuple[int, ...]) -> np.ndarray:
        cached = self._floored_cache.get(h)
        if cached is None:
            cached = self._apply_floor(self._dense_fold(h, self._walk(h)))
            if len(self._floored_cache) < 256:
                self._floored_cache[h] = cached
        return cached

    def topk(
        self, history: Sequence[int] | TokenSequence, k: int
    ) -> list[tuple[int, float]]:
        """Top-k next tokens, descending probability, ties by ascending id."""
        if not 1 <= k <= self.vocab_size:
            raise ModelError(f"k must be in [1, {self.vocab_size}], got {k}")
        p = self.dist(history)
        order = np.argsort(-p, kind="stable")[:k]
        return [(int(i), float(p[i])) for i in order]

    def rank_of(self, history: Sequence[int] | TokenSequence, token: int) -> int:
        """1-based position of ``token`` in the full topk ordering."""
        if not 0 <= token < self.vocab_size:
            raise ModelError(f"token id {token} out of range")
        p = self.dist(history)
        pt = p[token]
        return int((p > pt).sum()) + int((p[:token] == pt).sum()) + 1

    def window_logprobs(self, tokens: Sequence[int]) -> list[Optional[float]]:
        """Natural-log conditional probability per position; entry 0 is None.

        Entry i conditions on tokens[0:i] (truncated to the model order).
        No marker requirement: used for scoring windows that start anywhere.
        """
        ids = list(tokens.ids if isinstance(tokens, TokenSequence) else tokens)
        out: list[Optional[float]] = [None]
        for i in range(1, len(ids)):
            p = self.prob(ids[:i], ids[i])
            out.append(math.log(p) if p > 0.0 else float("-inf"))
        return out

    # Uniform scoring interface shared with backend clients.
    score_window = window_logprobs

    def logprob_sequence(self, tokens: Sequence[int] | TokenSequence) -> list[Optional[float]]:
        """Per-position natural-log probabilities for a marker-led document."""
        ids = list(tokens.ids if isinstance(tokens, TokenSequence) else tokens)
        if not ids:
            raise DataError("empty sequence")
        if ids[0] != self.marker_id:
            raise DataError(
                f"sequence must start with the end-of-document marker "
                f"(id {self.marker_id})"
            )
        return self.window_logprobs(ids)

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def save(self, path: str) -> None:
        arrays: list[tuple[str, np.ndarray]] = []
        for m, lvl in enumerate(self.levels):
            arrays.append((f"lvl{m}.keys", lvl.keys))
            arrays.append((f"lvl{m}.cnt", lvl.cnt))
            arrays.append((f"lvl{m}.hkeys", lvl.hkeys))
            arrays.append((f"lvl{m}.htot", lvl.htot))
            arrays.append((f"lvl{m}.hgamma", lvl.hgamma))
        payload = io.BytesIO()
        manifest = []
        for name, arr in arrays:
            data = np.ascontiguousarray(arr).tobytes()
            manifest.append(
                {
                    "name": name,
                    "dtype": str(arr.dtype),
                    "shape": list(arr.shape),
                    "offset": payload.tell(),
                    "nbytes": len(data),
                }
            )
            payload.write(data)
        body = payload.getvalue()
        header = {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "order": self.order,
            "smoothing": self.smoothing,
            "vocab_size": self.vocab_size,
            "marker_id": self.marker_id,
            "vocab_fingerprint": self.vocab_fingerprint,
            "metadata": self.metadata,
            "discounts": [list(lvl.discounts) for lvl in self.levels],
            "arrays": manifest,
            "payload_sha256": hashlib.sha256(body).hexdigest(),
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        with open(path, "wb") as fh:
            fh.write(b"%s %d\n" % (MODEL_FORMAT.encode(), MODEL_FORMAT_VERSION))
            fh.write(len(head).to_bytes(8, "big"))
            fh.write(head)
            fh.write(body)

    @classmethod
    def load(cls, path: str) -> "NGramModel":
        with open(path, "rb") as fh:
            magic = fh.readline()
            if magic.strip() != b"%s %d" % (MODEL_FORMAT.encode(), MODEL_FORMAT_VERSION):
                raise ModelError(f"{path}: not a model file of a supported version")
            try:
                head_len = int.from_bytes(fh.read(8), "big")
                header = json.loads(fh.read(head_len))
                body = fh.read()
            except (ValueError, json.JSONDecodeError) as exc:
                raise ModelError(f"{path}: corrupt model header: {exc}") from exc
        if header.get("version") != MODEL_FORMAT_VERSION:
            raise ModelError(f"{path}: unsupported model version")
        if hashlib.sha256(body).hexdigest() != header["payload_sha256"]:
            raise ModelError(f"{path}: payload checksum mismatch (corrupt file)")
        by_name = {}
        for spec in header["arrays"]:
            raw = body[spec["offset"] : spec["offset"] + spec["nbytes"]]
            by_name[spec["name"]] = np.frombuffer(raw, dtype=spec["dtype"]).reshape(
                spec["shape"]
            )
        levels = []
        for m in range(header["order"]):
            levels.append(
                _Level(
                    keys=by_name[f"lvl{m}.keys"],
                    cnt=by_name[f"lvl{m}.cnt"],
                    hkeys=by_name[f"lvl{m}.hkeys"],
                    htot=by_name[f"lvl{m}.htot"],
                    hgamma=by_name[f"lvl{m}.hgamma"],
                    discounts=tuple(header["discounts"][m]),
                )
            )
        return cls(
            order=header["order"],
            smoothing=header["smoothing"],
            vocab_size=header["vocab_size"],
            marker_id=header["marker_id"],
            levels=levels,
            vocab_fingerprint=header["vocab_fingerprint"],
            metadata=header["metadata"],
        )

    def __repr__(self) -> str:
        return (
            f"NGramModel(order={self.order}, smoothing={self.smoothing!r}, "
            f"vocab_size={self.vocab_size})"
        )
