"""Entry points: serve a model over stdio, or export its vocabulary file."""

from __future__ import annotations

import argparse
import os
import sys


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="novscore-hf-backend",
        description="Causal-transformer scoring backend (stdio protocol v1).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="speak protocol v1 on stdin/stdout")
    p.add_argument("--model", default=None, help="local model directory")
    p.add_argument("--device", default="cpu")
    p.add_argument("--max-context", type=int, default=None)
    p.add_argument(
        "--uniform", type=int, default=None, metavar="V",
        help="serve a uniform test double over V tokens instead of a model",
    )
    p.add_argument("--fingerprint", default=None,
                   help="fingerprint advertised by --uniform")

    p = sub.add_parser("export-vocab", help="write the engine vocabulary file")
    p.add_argument("--model", required=True, help="local model directory")
    p.add_argument("--output", required=True)

    args = parser.parse_args(argv)

    if args.command == "serve":
        from .server import ModelConfig, TransformerScorer, UniformConfig, UniformScorer, serve

        if (args.uniform is None) == (args.model is None):
            parser.error("serve needs exactly one of --model or --uniform")
        if args.uniform is not None:
            cfg = UniformConfig(vocab_size=args.uniform)
            if args.fingerprint:
                cfg.fingerprint = args.fingerprint
            scorer = UniformScorer(cfg)
        else:
            if not os.path.isdir(args.model):
                print(f"model directory not found: {args.model}", file=sys.stderr)
                return 1
            try:
                scorer = TransformerScorer(
                    ModelConfig(
                        model_dir=args.model,
                        device=args.device,
                        max_context=args.max_context,
                    )
                )
            except Exception as exc:
                print(f"model load failed: {exc}", file=sys.stderr)
                return 1
        serve(scorer)
        return 0

    if args.command == "export-vocab":
        from transformers import AutoTokenizer

        from .vocab_export import export_vocabulary, vocab_fingerprint, write_vocabulary

        if not os.path.isdir(args.model):
            print(f"model directory not found: {args.model}", file=sys.stderr)
            return 1
        try:
            tokenizer = AutoTokenizer.from_pretrained(args.model, local_files_only=True)
            exported = export_vocabulary(tokenizer)
        except Exception as exc:
            print(f"vocabulary export failed: {exc}", file=sys.stderr)
            return 1
        write_vocabulary(exported, args.output)
        print(
            f"exported {exported['vocab_size']} tokens, fingerprint "
            f"{vocab_fingerprint(exported)[:12]} -> {args.output}"
        )
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
