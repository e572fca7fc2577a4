"""Directional face-validity check under a real pretrained checkpoint.

Needs NOVSCORE_HF_MODEL pointing at a local causal-LM directory (for
example a downloaded gpt2 checkpoint); skipped otherwise, since this
environment has no network route to a model hub. Only the direction is
asserted: in a quantum-entanglement context, the "room temperature"
continuation must surprise the model more than the conventional "low
temperature" one. Absolute bit values are checkpoint-specific and are
deliberately not asserted.
"""

import math
import os
import sys

import pytest

from tests.conftest import MiniClient

MODEL_DIR = os.environ.get("NOVSCORE_HF_MODEL")

CONTEXT = (
    "Quantum entanglement experiments are exquisitely sensitive to thermal "
    "noise. Maintaining coherent entangled states normally requires "
    "cryogenic cooling, because vibrations scramble the fragile phase "
    "relationships between photons. Building on these observations, we "
    "propose a method that uses photonic crystals to observe entangled "
    "states at"
)


@pytest.mark.skipif(
    MODEL_DIR is None,
    reason="NOVSCORE_HF_MODEL not set: no local pretrained checkpoint available",
)
def test_room_temperature_is_more_surprising_than_low():
    from transformers import AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(MODEL_DIR, local_files_only=True)
    ctx_ids = tokenizer.encode(CONTEXT)
    low_id = tokenizer.encode(" low")[0]
    room_id = tokenizer.encode(" room")[0]

    cmd = [sys.executable, "-m", "novscore_backend", "serve", "--model", MODEL_DIR]
    with MiniClient(cmd) as client:
        limit = client.hello["max_context"]
        history = ctx_ids[-(limit - 1):]
        lp_low = client.request("score", [*history, low_id])["logprobs"][-1]
        lp_room = client.request("score", [*history, room_id])["logprobs"][-1]

    bits_low = -lp_low / math.log(2)
    bits_room = -lp_room / math.log(2)
    print(f"low: {bits_low:.2f} bits, room: {bits_room:.2f} bits")
    assert bits_room > bits_low
