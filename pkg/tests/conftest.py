"""Shared fixtures: deterministic synthetic corpora in two text genres.

Genre A and genre B share function words but draw content words from
disjoint syllable inventories, so a model trained on genre A sees genre B
as consistently less predictable. Everything is seeded; fixture content is
identical across runs.
"""

from __future__ import annotations

import random

import pytest

from novscore import KNESER_NEY, MLE, NGramModel, Vocabulary

FUNCTION_WORDS = (
    "the of and to in is for with that on as are by this from at or an be "
    "it which was not can has have will each between under more"
).split()

_VOWELS = "aeiou"


def make_lexicon(seed: int, consonants: str, n_words: int) -> list[str]:
    rng = random.Random(seed)
    syllables = [c + v for c in consonants for v in _VOWELS]
    syllables += [c + v + "n" for c in consonants for v in _VOWELS[:3]]
    words: set[str] = set()
    while len(words) < n_words:
        n_syl = rng.randint(2, 4)
        words.add("".join(rng.choice(syllables) for _ in range(n_syl)))
    return sorted(words)


def make_document(rng: random.Random, lexicon: list[str], n_chars: int) -> str:
    # Zipf-ish content-word frequencies over a fixed rank ordering.
    cum_weights = getattr(make_document, "_cw_cache", {}).get(id(lexicon))
    if cum_weights is None:
        total = 0.0
        cum_weights = []
        for i in range(len(lexicon)):
            total += 1.0 / (i + 1)
            cum_weights.append(total)
        cache = getattr(make_document, "_cw_cache", {})
        cache[id(lexicon)] = cum_weights
        make_document._cw_cache = cache
    sentences = []
    total = 0
    while total < n_chars:
        n_words = rng.randint(5, 14)
        ws = []
        for _ in range(n_words):
            if rng.random() < 0.45:
                ws.append(FUNCTION_WORDS[rng.randrange(len(FUNCTION_WORDS))])
            else:
                ws.append(rng.choices(lexicon, cum_weights=cum_weights)[0])
        s = " ".join(ws)
        s = s[0].upper() + s[1:] + ("." if rng.random() < 0.9 else "?")
        sentences.append(s)
        total += len(s) + 1
    return " ".join(sentences)


def make_corpus(
    seed: int, lexicon: list[str], n_docs: int, doc_chars: int
) -> list[str]:
    rng = random.Random(seed)
    return [make_document(rng, lexicon, doc_chars) for _ in range(n_docs)]


@pytest.fixture(scope="session")
def lexicon_a() -> list[str]:
    return make_lexicon(11, "bcdfglmnprstv", 700)


@pytest.fixture(scope="session")
def lexicon_b() -> list[str]:
    return make_lexicon(77, "hjkqwxz", 700)


@pytest.fixture(scope="session")
def small_corpus(lexicon_a) -> list[str]:
    """~60 KB of genre-A text split over 20 documents."""
    return make_corpus(101, lexicon_a, n_docs=20, doc_chars=3000)


@pytest.fixture(scope="session")
def small_vocab(small_corpus) -> Vocabulary:
    return Vocabulary.train_bpe(small_corpus, vocab_size=384)


def encode_with_marker(vocab: Vocabulary, texts: list[str]) -> list[list[int]]:
    marker = vocab.end_of_doc_id
    return [[marker, *vocab.encode(t).ids] for t in texts]


@pytest.fixture(scope="session")
def small_kn_model(small_corpus, small_vocab) -> NGramModel:
    return NGramModel.train(
        encode_with_marker(small_vocab, small_corpus),
        order=4,
        vocab_size=small_vocab.vocab_size,
        marker_id=small_vocab.end_of_doc_id,
        smoothing=KNESER_NEY,
        vocab_fingerprint=small_vocab.fingerprint,
    )


@pytest.fixture(scope="session")
def small_mle_model(small_corpus, small_vocab) -> NGramModel:
    return NGramModel.train(
        encode_with_marker(small_vocab, small_corpus),
        order=3,
        vocab_size=small_vocab.vocab_size,
        marker_id=small_vocab.end_of_doc_id,
        smoothing=MLE,
        vocab_fingerprint=small_vocab.fingerprint,
    )


@pytest.fixture(scope="session")
def mb_corpus(lexicon_a) -> list[str]:
    """~1 MB of genre-A text, the normalization-property fixture."""
    return make_corpus(202, lexicon_a, n_docs=64, doc_chars=16000)


@pytest.fixture(scope="session")
def mb_model(mb_corpus, lexicon_a):
    vocab = Vocabulary.train_bpe(mb_corpus, vocab_size=512)
    model = NGramModel.train(
        encode_with_marker(vocab, mb_corpus),
        order=4,
        vocab_size=vocab.vocab_size,
        marker_id=vocab.end_of_doc_id,
        smoothing=KNESER_NEY,
        vocab_fingerprint=vocab.fingerprint,
    )
    return vocab, model
