"""Per-token surprisal scoring with fixed-window, minimum-context planning.

A document is scored as a marker-led token stream: the end-of-document
marker is prepended (never itself scored) so the first real token has a
defined conditioning context. Tokens are scored left to right in windows of
at most ``window`` tokens; past the first window, every scored token sees at
least ``min_context`` conditioning tokens. Probabilities arrive as natural
logs (local model or remote backend) and are converted to bits exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Protocol, Sequence

from .errors import EmptyDocumentError, FingerprintMismatchError, ModelError
from .tokenizer import TokenSequence, Vocabulary

_LN2 = math.log(2.0)

DEFAULT_WINDOW = 1024
DEFAULT_MIN_CONTEXT = 512


class Scorer(Protocol):
    """Anything that can score a window of tokens: local model or backend."""

    vocab_fingerprint: str

    def score_window(self, tokens: Sequence[int]) -> list[Optional[float]]: ...


@dataclass(frozen=True)
class WindowConfig:
    """Scoring geometry: window size, context guarantee, optional token cap."""

    window: int = DEFAULT_WINDOW
    min_context: int = DEFAULT_MIN_CONTEXT
    max_scored_tokens: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.min_context < self.window:
            raise ModelError(
                f"require 1 <= min_context < window, got "
                f"min_context={self.min_context} window={self.window}"
            )
        if self.max_scored_tokens is not None and self.max_scored_tokens < 1:
            raise ModelError("max_scored_tokens must be >= 1 when set")

    @property
    def stride(self) -> int:
        return self.window - self.min_context


class Window(NamedTuple):
    start: int
    end: int
    first_scored: int


@dataclass(frozen=True)
class TokenScore:
    """One scored position in the marker-led stream (marker sits at 0)."""

    position: int
    token_id: int
    prob: float
    surprisal_bits: float
    context_len: int
    surface: bytes | None = None
    rank: int | None = None


@dataclass(frozen=True)
class DocumentScore:
    doc_id: str
    cumulative_bits: float
    avg_bits: float
    n_scored: int
    n_total_tokens: int


def surprisal_bits(prob: float) -> float:
    """Shannon information of an event, in bits: -log2(prob)."""
    if not 0.0 < prob <= 1.0:
        raise ModelError(f"probability must be in (0, 1], got {prob}")
    return -math.log2(prob)


def probability_from_bits(bits: float) -> float:
    """Inverse of surprisal_bits."""
    return 2.0 ** (-bits)


def plan_windows(n_tokens: int, cfg: WindowConfig) -> list[Window]:
    """Cover stream positions 1..n_tokens-1, each scored by exactly one window.

    ``n_tokens`` counts the prepended marker. The first window scores
    everything after the marker; each later window starts ``stride`` tokens
    further and scores its trailing ``stride`` positions, so scored positions
    carry at least ``min_context`` conditioning tokens.
    """
    if n_tokens < 2:
        raise EmptyDocumentError("document has no scoreable tokens")
    windows = [Window(0, min(cfg.window, n_tokens), 1)]
    i = 1
    while windows[-1].end < n_tokens:
        start = i * cfg.stride
        end = min(start + cfg.window, n_tokens)
        windows.append(Window(start, end, start + cfg.min_context))
        i += 1
    return windows


def _check_fingerprint(scorer, vocab: Vocabulary | None) -> None:
    got = getattr(scorer, "vocab_fingerprint", "")
    if vocab is not None and got and got != vocab.fingerprint:
        raise FingerprintMismatchError(
            f"scorer was built for vocabulary {got[:12]}..., "
            f"tokens come from {vocab.fingerprint[:12]}..."
        )


def score_document(
    q,
    tokens: TokenSequence | Sequence[int],
    cfg: WindowConfig,
    *,
    marker_id: int | None = None,
    vocab: Vocabulary | None = None,
    with_ranks: bool = False,
) -> tuple[list[TokenScore], DocumentScore]:
    """Score one document under ``q`` (local model or backend client).

    ``tokens`` are the document's tokens without the marker; the marker id
    comes from ``vocab`` unless given explicitly. Raises EmptyDocumentError
    for zero-token documents; backend failures propagate, so a document is
    either fully scored or not scored at all.
    """
    _check_fingerprint(q, vocab)
    doc_id = tokens.doc_id if isinstance(tokens, TokenSequence) else ""
    ids = list(tokens.ids if isinstance(tokens, TokenSequence) else tokens)
    if marker_id is None:
        if vocab is None or vocab.end_of_doc_id is None:
            raise ModelError("marker_id required (or a vocabulary that has one)")
        marker_id = vocab.end_of_doc_id
    if not ids:
        raise EmptyDocumentError(f"document {doc_id!r} has no tokens")

    stream = [marker_id] + ids
    n = len(stream)
    cap = cfg.max_scored_tokens
    scores: list[TokenScore] = []
    for win in plan_windows(n, cfg):
        seg = stream[win.start : win.end]
        lnps = q.score_window(seg)
        if len(lnps) != len(seg):
            raise ModelError("scorer returned wrong number of positions")
        for pos in range(win.first_scored, win.end):
            lnp = lnps[pos - win.start]
            prob = math.exp(lnp) if lnp is not None else 0.0
            bits = -lnp / _LN2 if lnp is not None else math.inf
            rank = None
            if with_ranks and hasattr(q, "rank_of"):
                rank = q.rank_of(stream[win.start : pos], stream[pos])
            scores.append(
                TokenScore(
                    position=pos,
                    token_id=stream[pos],
                    prob=prob,
                    surprisal_bits=bits,
                    context_len=pos - win.start,
                    surface=(
                        vocab.id_to_bytes[stream[pos]] if vocab is not None else None
                    ),
                    rank=rank,
                )
            )
            if cap is not None and len(scores) >= cap:
                break
        if cap is not None and len(scores) >= cap:
            break

    cumulative = cumulative_surprisal(scores)
    doc = DocumentScore(
        doc_id=doc_id,
        cumulative_bits=cumulative,
        avg_bits=cumulative / len(scores),
        n_scored=len(scores),
        n_total_tokens=len(ids),
    )
    return scores, doc


def cumulative_surprisal(scores: Iterable[TokenScore | float]) -> float:
    """Compensated (Kahan) sum of per-token surprisal bits; empty -> 0."""
    total = 0.0
    carry = 0.0
    for s in scores:
        x = s.surprisal_bits if isinstance(s, TokenScore) else float(s)
        y = x - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total
