"""Pretrained causal-transformer scoring backend for the novscore engine.

Speaks protocol v1 (line-delimited JSON over stdin/stdout) and exports
engine-format vocabulary files so the client side can tokenize compatibly.
"""

from .server import (
    PROTO_VERSION,
    ModelConfig,
    TransformerScorer,
    UniformConfig,
    UniformScorer,
    serve,
)
from .vocab_export import (
    ExportError,
    canonical_bytes,
    export_vocabulary,
    vocab_fingerprint,
    write_vocabulary,
)

__version__ = "0.1.0"
