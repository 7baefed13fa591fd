"""Bundled demonstration corpora and the models built from them.

The package ships two tiny corpora.  The ASCII one trains a base tokenizer
that has never seen a CJK character, so CJK text falls through to byte
tokens.  The CJK one (64 distinct three-byte characters, one record per
line, no spaces) trains a donor whose learned inventory is exactly those 64
characters; grafting it into the base gives every CJK character a
single-token representation.  Because each character previously cost three
byte tokens, the expanded-to-base token ratio on the CJK corpus is exactly
one third, which makes the pair a self-contained end-to-end check of the
expansion pipeline.
"""

from __future__ import annotations

from importlib import resources

from .tokenizer import SegmentedCorpus, TokenizerModel, train_bpe
from .vocab_expansion import build_addition, merge_vocabularies

# Learned-vocabulary sizes for the demo models.  The CJK target equals the
# character inventory, so the donor learns no merges; the base target leaves
# room for a few dozen English merges on top of the ASCII inventory.
BASE_TARGET = 64
CJK_TARGET = 64


def _bundled_text(name: str) -> str:
    return (resources.files("tonguegraft") / "data" / name).read_text("utf-8")


def _corpus_from_text(text: str, source_id: str) -> SegmentedCorpus:
    records = tuple(
        tuple(line.split()) for line in text.splitlines() if line.strip()
    )
    return SegmentedCorpus(records=records, source_id=source_id)


def load_ascii_corpus() -> SegmentedCorpus:
    """The bundled English corpus the demo base model is trained on."""
    return _corpus_from_text(_bundled_text("ascii_corpus.txt"), "bundled-ascii")


def load_cjk_corpus() -> SegmentedCorpus:
    """The bundled CJK corpus: 64 distinct three-byte characters."""
    return _corpus_from_text(_bundled_text("cjk_corpus.txt"), "bundled-cjk")


def cjk_corpus_texts() -> list[str]:
    """The CJK corpus as plain lines, for token-counting reports."""
    return [
        line for line in _bundled_text("cjk_corpus.txt").splitlines() if line.strip()
    ]


def build_demo_base() -> TokenizerModel:
    """Base tokenizer trained on the bundled ASCII corpus."""
    return train_bpe(load_ascii_corpus(), BASE_TARGET)


def build_demo_expanded(base: TokenizerModel | None = None) -> TokenizerModel:
    """Expanded tokenizer: the demo base grafted with the CJK inventory."""
    if base is None:
        base = build_demo_base()
    donor = train_bpe(load_cjk_corpus(), CJK_TARGET)
    addition = build_addition(donor, base)
    return merge_vocabularies(base, addition)
