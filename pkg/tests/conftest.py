"""Shared fixtures: small deterministic tokenizer models and corpora."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tonguegraft.tokenizer import SegmentedCorpus, TokenizerModel, train_bpe


def make_corpus(*records: str) -> SegmentedCorpus:
    """Build a segmented corpus from whitespace-separated record strings."""
    return SegmentedCorpus(tuple(tuple(r.split()) for r in records))


@pytest.fixture(scope="session")
def kana_model() -> TokenizerModel:
    """Tiny Japanese-only model: 4 characters plus the merge (ね, こ)."""
    corpus = make_corpus("ねこ ねこ ねずみ")
    return train_bpe(corpus, target_vocab_size=5)


@pytest.fixture(scope="session")
def ascii_base_model() -> TokenizerModel:
    """A base model that knows ASCII words but no multi-byte characters."""
    corpus = make_corpus(
        "the cat sat on the mat",
        "the dog ate the bone",
        "a cat and a dog met then the cat ran",
        "one two three four five six seven eight nine ten",
    )
    return train_bpe(corpus, target_vocab_size=64)
