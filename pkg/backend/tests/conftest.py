"""Offline fixtures: a tiny randomly initialized causal transformer.

The tiny model exercises the full serving path (architecture, tokenizer
export, wire protocol) without any network access or real checkpoint.
"""

import json
import os
import subprocess
import sys

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

SAMPLE_TEXT = [
    "the quick brown fox jumps over the lazy dog " * 50,
    "pack my box with five dozen liquor jugs " * 50,
    "how vexingly quick daft zebras jump 0123456789 " * 50,
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    import torch
    from tokenizers import ByteLevelBPETokenizer
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    d = tmp_path_factory.mktemp("tinymodel")
    trainer = ByteLevelBPETokenizer()
    trainer.train_from_iterator(
        SAMPLE_TEXT, vocab_size=320, min_frequency=1,
        special_tokens=["<|endoftext|>"],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=trainer._tokenizer, eos_token="<|endoftext|>"
    )
    tokenizer.save_pretrained(str(d))

    torch.manual_seed(0)
    config = GPT2Config(
        vocab_size=len(tokenizer), n_positions=64, n_layer=2, n_head=2, n_embd=32
    )
    GPT2LMHeadModel(config).save_pretrained(str(d))
    return str(d)


class MiniClient:
    """Bare-bones protocol v1 client used only by this test suite."""

    def __init__(self, cmd: list[str]):
        self.proc = subprocess.Popen(
            cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1,
        )
        self.hello = json.loads(self._readline())
        self.next_id = 0

    def _readline(self) -> str:
        line = self.proc.stdout.readline()
        if not line:
            raise RuntimeError("backend closed its output")
        return line

    def request(self, op: str, tokens: list[int], **extra) -> dict:
        self.next_id += 1
        payload = {"id": self.next_id, "op": op, "tokens": tokens, **extra}
        self.proc.stdin.write(json.dumps(payload) + "\n")
        self.proc.stdin.flush()
        return json.loads(self._readline())

    def send_raw(self, line: str) -> dict:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        return json.loads(self._readline())

    def close(self) -> None:
        try:
            self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# One server shared per module: requests are independent and error records
# leave the session usable, so tests do not interfere.
@pytest.fixture(scope="module")
def tiny_backend(tiny_model_dir):
    cmd = [sys.executable, "-m", "novscore_backend", "serve", "--model", tiny_model_dir]
    with MiniClient(cmd) as client:
        yield client
