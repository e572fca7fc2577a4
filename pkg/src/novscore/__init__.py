"""Token-surprisal novelty scoring for text corpora.

Pipeline: train a byte-level BPE vocabulary, train (or connect to) a causal
language model standing in for typical discourse, score documents as
per-token surprisal in bits under fixed-window conditioning, and compare
groups of documents with one-tailed Welch's t-tests.
"""

from .corpus import Document, ingest
from .errors import (
    BackendRequestError,
    DataError,
    EmptyDocumentError,
    FingerprintMismatchError,
    ModelError,
    NovscoreError,
    ProtocolError,
    TokenizerError,
    UsageError,
)
from .ngram import KNESER_NEY, MLE, NGramModel
from .protocol import BackendCapabilities, BackendClient
from .scoring import (
    DocumentScore,
    TokenScore,
    WindowConfig,
    cumulative_surprisal,
    plan_windows,
    probability_from_bits,
    score_document,
    surprisal_bits,
)
from .stats import SampleSummary, WelchResult, student_t_sf, summarize, welch_t
from .tokenizer import END_OF_DOC, TokenSequence, Vocabulary

__version__ = "0.1.0"

__all__ = [
    "BackendCapabilities",
    "BackendClient",
    "BackendRequestError",
    "DataError",
    "Document",
    "DocumentScore",
    "EmptyDocumentError",
    "END_OF_DOC",
    "FingerprintMismatchError",
    "KNESER_NEY",
    "MLE",
    "ModelError",
    "NGramModel",
    "NovscoreError",
    "ProtocolError",
    "SampleSummary",
    "TokenScore",
    "TokenSequence",
    "TokenizerError",
    "UsageError",
    "Vocabulary",
    "WelchResult",
    "WindowConfig",
    "cumulative_surprisal",
    "ingest",
    "plan_windows",
    "probability_from_bits",
    "score_document",
    "student_t_sf",
    "summarize",
    "surprisal_bits",
    "welch_t",
]
