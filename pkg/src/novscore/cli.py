"""Command-line surface: train-tokenizer, train-lm, score, inspect, compare.

Exit codes: 0 success, 1 usage error, 2 data error, 3 backend/protocol
error. A JSON config file (--config) supplies flag defaults; explicit flags
win. NOVSCORE_MODEL_DIR resolves bare model/vocabulary filenames.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .corpus import Document, ingest
from .errors import (
    DataError,
    EmptyDocumentError,
    NovscoreError,
    ProtocolError,
    UsageError,
)
from .ngram import KNESER_NEY, MLE, NGramModel
from .protocol import BackendClient
from .scoring import (
    DEFAULT_MIN_CONTEXT,
    DEFAULT_WINDOW,
    WindowConfig,
    score_document,
    surprisal_bits,
)
from .stats import summarize, welch_t
from .tokenizer import DEFAULT_VOCAB_SIZE, END_OF_DOC, Vocabulary

DEFAULT_THRESHOLD = 5.0


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code 1, not argparse's 2
        raise UsageError(message)


def _resolve(path: str) -> str:
    if os.path.exists(path) or os.sep in path:
        return path
    model_dir = os.environ.get("NOVSCORE_MODEL_DIR")
    if model_dir and os.path.exists(os.path.join(model_dir, path)):
        return os.path.join(model_dir, path)
    return path


def _fmt17(x: float) -> str:
    return format(x, ".17g")


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_train_tokenizer(args) -> int:
    docs = ingest(args.input)
    texts = [d.text for d in docs if not d.is_empty]
    if not texts:
        raise DataError("no non-empty documents in the corpus")
    vocab = Vocabulary.train_bpe(
        texts, vocab_size=args.vocab_size, special_tokens=args.special_token
    )
    vocab.save(args.output)
    print(
        f"trained vocabulary: {vocab.vocab_size} tokens "
        f"({len(vocab.merges)} merges), fingerprint {vocab.fingerprint[:12]} "
        f"-> {args.output}"
    )
    return 0


def cmd_train_lm(args) -> int:
    vocab = Vocabulary.load(_resolve(args.vocab))
    marker = vocab.end_of_doc_id
    if marker is None:
        raise DataError(f"vocabulary has no {END_OF_DOC} special token")
    docs = ingest(args.input)
    sequences = []
    for d in docs:
        if d.is_empty:
            continue
        seq = vocab.encode(d.text, doc_id=d.id)
        sequences.append([marker, *seq.ids])
    model = NGramModel.train(
        sequences,
        order=args.order,
        vocab_size=vocab.vocab_size,
        marker_id=marker,
        smoothing=args.smoothing,
        vocab_fingerprint=vocab.fingerprint,
    )
    model.save(args.output)
    print(
        f"trained {args.smoothing} model of order {args.order} on "
        f"{model.metadata['n_docs']} documents "
        f"({model.metadata['n_tokens']} tokens) -> {args.output}"
    )
    return 0


def _make_scorer(args, vocab: Vocabulary):
    """Returns (scorer_factory, is_remote). Factory yields one scorer per worker."""
    if bool(args.model) == bool(args.backend):
        raise UsageError("exactly one of --model or --backend is required")
    if args.model:
        model = NGramModel.load(_resolve(args.model))
        if model.vocab_fingerprint and model.vocab_fingerprint != vocab.fingerprint:
            raise DataError(
                "model was trained with a different vocabulary "
                f"({model.vocab_fingerprint[:12]} != {vocab.fingerprint[:12]})"
            )
        return (lambda: model), False
    cmd = shlex.split(args.backend)
    return (
        lambda: BackendClient(
            cmd, expected_fingerprint=vocab.fingerprint, timeout=args.timeout
        )
    ), True


def _score_one(scorer, vocab, cfg, doc: Document):
    """Score one document; returns a result row plus optional token scores."""
    row = {
        "doc_id": doc.id,
        "label": doc.label,
        "n_total": None,
        "n_scored": None,
        "cumulative_bits": None,
        "avg_bits": None,
        "skipped_reason": None,
    }
    if doc.is_empty:
        row["skipped_reason"] = "empty_text"
        return row, []
    seq = vocab.encode(doc.text, doc_id=doc.id)
    try:
        token_scores, doc_score = score_document(
            scorer, seq, cfg, vocab=vocab
        )
    except EmptyDocumentError:
        row["skipped_reason"] = "too_short"
        return row, []
    row.update(
        n_total=doc_score.n_total_tokens,
        n_scored=doc_score.n_scored,
        cumulative_bits=doc_score.cumulative_bits,
        avg_bits=doc_score.avg_bits,
    )
    return row, token_scores


def _write_token_scores(fh, fmt: str, doc_id: str, token_scores, writer_state):
    if fmt == "csv":
        writer = writer_state.get("csv")
        if writer is None:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                [
                    "doc_id",
                    "position",
                    "token_id",
                    "surface",
                    "prob",
                    "surprisal_bits",
                    "context_len",
                    "rank",
                ]
            )
            writer_state["csv"] = writer
        for ts in token_scores:
            writer.writerow(
                [
                    doc_id,
                    ts.position,
                    ts.token_id,
                    (ts.surface or b"").decode("utf-8", errors="backslashreplace"),
                    _fmt17(ts.prob),
                    _fmt17(ts.surprisal_bits),
                    ts.context_len,
                    "" if ts.rank is None else ts.rank,
                ]
            )
    else:
        for ts in token_scores:
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc_id,
                        "position": ts.position,
                        "token_id": ts.token_id,
                        "surface": (ts.surface or b"").decode(
                            "utf-8", errors="backslashreplace"
                        ),
                        "prob": ts.prob,
                        "surprisal_bits": ts.surprisal_bits,
                        "context_len": ts.context_len,
                        "rank": ts.rank,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def cmd_score(args) -> int:
    vocab = Vocabulary.load(_resolve(args.vocab))
    if vocab.end_of_doc_id is None:
        raise DataError(f"vocabulary has no {END_OF_DOC} special token")
    cfg = WindowConfig(
        window=args.window,
        min_context=args.min_context,
        max_scored_tokens=args.max_scored_tokens,
    )
    docs = ingest(args.input, labels_path=args.labels)
    if not docs:
        raise DataError("no documents to score")
    factory, is_remote = _make_scorer(args, vocab)

    workers = max(1, args.workers)
    if workers == 1 or not is_remote:
        scorer = factory()
        results = [_score_one(scorer, vocab, cfg, d) for d in docs]
        if is_remote:
            scorer.close()
    else:
        import threading

        local = threading.local()

        def run(doc):
            if not hasattr(local, "scorer"):
                local.scorer = factory()
            return _score_one(local.scorer, vocab, cfg, doc)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, docs))

    writer_state: dict = {}
    token_fh = open(args.per_token, "w", encoding="utf-8") if args.per_token else None
    n_scored = n_skipped = 0
    with open(args.output, "w", encoding="utf-8") as out:
        for row, token_scores in results:
            if row["skipped_reason"] is None:
                n_scored += 1
                row["above_threshold"] = row["avg_bits"] > args.threshold
            else:
                n_skipped += 1
                row["above_threshold"] = None
            out.write(json.dumps(row, sort_keys=True) + "\n")
            if token_fh is not None and token_scores:
                _write_token_scores(
                    token_fh, args.format, row["doc_id"], token_scores, writer_state
                )
    if token_fh is not None:
        token_fh.close()
    flagged = sum(
        1 for row, _ in results if row.get("above_threshold") is True
    )
    print(
        f"scored {n_scored} documents ({n_skipped} skipped, "
        f"{flagged} above {args.threshold} avg bits) -> {args.output}"
    )
    return 0


def cmd_inspect(args) -> int:
    vocab = Vocabulary.load(_resolve(args.vocab))
    marker = vocab.end_of_doc_id
    if marker is None:
        raise DataError(f"vocabulary has no {END_OF_DOC} special token")
    context_bytes = Path(args.context).read_bytes()
    ctx = vocab.encode(context_bytes)
    if len(ctx.ids) < 1:
        raise DataError("context tokenizes to zero tokens")
    history = [marker, *ctx.ids][-(args.window - 1) :]

    factory, is_remote = _make_scorer(args, vocab)
    scorer = factory()
    try:
        if is_remote:
            rows = scorer.topk_remote(history, args.k)
        else:
            rows = scorer.topk(history, args.k)
        print(f"context: {len(ctx.ids)} tokens; top {args.k} continuations:")
        print(f"{'rank':>4}  {'token':>6}  {'prob':>12}  {'bits':>8}  surface")
        for rank, (tid, p) in enumerate(rows, 1):
            surface = vocab.id_to_bytes[tid].decode("utf-8", errors="backslashreplace")
            print(
                f"{rank:>4}  {tid:>6}  {p:>12.6g}  {surprisal_bits(p):>8.3f}  "
                f"{surface!r}"
            )
        ranked = {tid: i + 1 for i, (tid, _) in enumerate(rows)}
        for cand in args.candidate or []:
            cand_ids = vocab.encode(cand).ids
            if not cand_ids:
                print(f"candidate {cand!r}: empty after tokenization")
                continue
            first = cand_ids[0]
            if is_remote:
                lnps = scorer.score_window([*history, first])
                p = math.exp(lnps[-1])
                rank = ranked.get(first)
            else:
                p = scorer.prob(history, first)
                rank = scorer.rank_of(history, first)
            rank_str = str(rank) if rank is not None else f">{args.k}"
            extra = "" if len(cand_ids) == 1 else f" (first of {len(cand_ids)} tokens)"
            bits = f"{surprisal_bits(p):.3f}" if p > 0.0 else "inf"
            print(
                f"candidate {cand!r}: token {first}, prob {p:.6g}, "
                f"{bits} bits, rank {rank_str}{extra}"
            )
    finally:
        if is_remote:
            scorer.close()
    return 0


def _load_score_rows(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{ln}: bad JSON: {exc}") from exc
    return rows


def cmd_compare(args) -> int:
    rows = _load_score_rows(args.scores)
    labels = {}
    if args.labels:
        from .corpus import read_labels

        labels = read_labels(Path(args.labels))
    groups: dict[str, list[float]] = {args.group_a: [], args.group_b: []}
    for row in rows:
        if row.get("skipped_reason"):
            continue
        label = row.get("label") or labels.get(row.get("doc_id", ""))
        if label not in groups:
            continue
        value = row.get(args.score_field)
        if value is None:
            raise DataError(
                f"document {row.get('doc_id')!r} lacks field {args.score_field!r}"
            )
        groups[label].append(float(value))
    for name, values in groups.items():
        if len(values) < 2:
            raise DataError(
                f"group {name!r} has {len(values)} usable documents; need >= 2"
            )
    a = summarize(groups[args.group_a])
    b = summarize(groups[args.group_b])
    result = welch_t(a, b, alternative=args.alternative)
    report = {
        "group_a": {"name": args.group_a, "n": a.n, "mean": a.mean, "variance": a.variance},
        "group_b": {"name": args.group_b, "n": b.n, "mean": b.mean, "variance": b.variance},
        "t": result.t,
        "df": result.df,
        "p_one_tailed": result.p_one_tailed,
        "alternative": result.alternative,
        "score_field": args.score_field,
        "inputs": {
            "scores_path": args.scores,
            "scores_sha256": _sha256_file(args.scores),
        },
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="novscore", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-tokenizer", help="learn a byte-level BPE vocabulary")
    p.add_argument("--input", required=True, help="corpus directory or .jsonl dataset")
    p.add_argument("--output", required=True, help="vocabulary file to write")
    p.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE)
    p.add_argument(
        "--special-token",
        action="append",
        default=None,
        help=f"special token name (repeatable; default {END_OF_DOC})",
    )
    p.set_defaults(func=cmd_train_tokenizer)

    p = sub.add_parser("train-lm", help="train the n-gram surrogate model")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--smoothing", choices=[KNESER_NEY, MLE], default=KNESER_NEY)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("score", help="score documents to per-token/per-doc files")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", default=None, help="saved n-gram model file")
    p.add_argument("--backend", default=None, help="backend command line")
    p.add_argument("--output", required=True, help="per-document JSONL file")
    p.add_argument("--per-token", default=None, help="per-token output file")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--labels", default=None, help="id/label table for documents")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--min-context", type=int, default=DEFAULT_MIN_CONTEXT)
    p.add_argument("--max-scored-tokens", type=int, default=None)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--seed", type=int, default=None, help="recorded for provenance")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("inspect", help="rank continuations of a context")
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--backend", default=None)
    p.add_argument("--context", required=True, help="file holding the context text")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--candidate", action="append", default=None)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--timeout", type=float, default=120.0)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("compare", help="one-tailed Welch's t-test between groups")
    p.add_argument("--scores", required=True, help="per-document score JSONL")
    p.add_argument("--labels", default=None)
    p.add_argument("--group-a", required=True)
    p.add_argument("--group-b", required=True)
    p.add_argument("--alternative", choices=["greater", "less"], default="greater")
    p.add_argument("--score-field", default="avg_bits")
    p.add_argument("--output", default=None, help="report JSON file")
    p.set_defaults(func=cmd_compare)

    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> list[str]:
    """Fold --config file values in as defaults: flags still win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a path")
    cfg_path = argv[i + 1]
    try:
        cfg = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {cfg_path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {cfg_path} must hold a JSON object")
    rest = argv[:i] + argv[i + 2 :]
    extra: list[str] = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if flag in rest or value is None:
            continue
        if isinstance(value, bool):
            raise UsageError(f"config key {key}: boolean flags are not supported")
        if isinstance(value, list):
            for v in value:
                extra.extend([flag, str(v)])
        else:
            extra.extend([flag, str(value)])
    # Config-derived flags go after the subcommand so argparse scopes them.
    return rest + extra


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if getattr(args, "special_token", None) is None and hasattr(
            args, "special_token"
        ):
            args.special_token = [END_OF_DOC]
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ProtocolError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except NovscoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
