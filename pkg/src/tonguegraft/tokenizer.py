"""Subword tokenizer: BPE training, NFKC encoding with byte fallback, exact decoding.

The model is a plain byte-pair-encoding vocabulary over Unicode characters.
Training consumes a pre-segmented corpus (one record per line, words split by
whitespace upstream), so merges never cross word boundaries.  Encoding works
on raw text with no word segmentation: normalization, then greedy application
of merge rules by rank, then byte fallback for anything still out of
vocabulary.  256 reserved byte tokens ``<0x00>`` .. ``<0xFF>`` make encoding
total over arbitrary input.  Decoding inverts encoding exactly and never
normalizes.
"""

from __future__ import annotations

import json
import random
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import CorpusError, InvalidModelError, ModelFormatError, VocabularyError

FORMAT_VERSION = 1

# Surface forms of the reserved byte tokens, in byte-value order.
BYTE_TOKENS: tuple[str, ...] = tuple("<0x%02X>" % i for i in range(256))
_BYTE_VALUE: dict[str, int] = {tok: i for i, tok in enumerate(BYTE_TOKENS)}

# Score given to character and byte tokens; the k-th merge (1-based) scores -k,
# so a lower score always means a later, rarer merge.
BASE_SCORE = 0.0


def normalize(text: str) -> str:
    """Return the NFKC normal form of ``text``.

    Idempotent; applied before encoding and never during decoding.
    """
    return unicodedata.normalize("NFKC", text)


def _is_symbol(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def split_symbols(word: str) -> list[str]:
    """Split ``word`` so maximal runs of symbol characters stand alone.

    Symbol characters are those in Unicode categories P* and S*.  The
    concatenation of the returned pieces equals the input, and each piece is
    either all symbols or symbol-free: ``"cat-dog"`` gives
    ``["cat", "-", "dog"]`` and ``"a++b"`` gives ``["a", "++", "b"]``.
    """
    if not word:
        raise ValueError("split_symbols requires a non-empty word")
    pieces: list[str] = []
    start = 0
    in_symbols = _is_symbol(word[0])
    for i in range(1, len(word)):
        now = _is_symbol(word[i])
        if now != in_symbols:
            pieces.append(word[start:i])
            start = i
            in_symbols = now
    pieces.append(word[start:])
    return pieces


@dataclass(frozen=True)
class SegmentedCorpus:
    """A pre-segmented training corpus: records of word strings.

    Word segmentation happens upstream (the on-disk form is one record per
    line with whitespace between words), so no word may contain whitespace.
    """

    records: tuple[tuple[str, ...], ...]
    source_id: str = ""

    def __post_init__(self) -> None:
        for record in self.records:
            for word in record:
                if not word:
                    raise CorpusError("segmented corpus contains an empty word")
                if any(c.isspace() for c in word):
                    raise CorpusError(f"word contains whitespace: {word!r}")

    def __len__(self) -> int:
        return len(self.records)


def read_segmented_corpus(path: str, source_id: str = "") -> SegmentedCorpus:
    """Load a segmented corpus file: one record per line, words split on whitespace."""
    records: list[tuple[str, ...]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            words = tuple(line.split())
            if words:
                records.append(words)
    return SegmentedCorpus(tuple(records), source_id=source_id or path)


def sample_records(corpus: SegmentedCorpus, k: int, seed: int) -> SegmentedCorpus:
    """Take a uniform sample of ``k`` records without replacement, seeded.

    Record order is preserved.  If the corpus has at most ``k`` records it is
    returned unchanged, so sampling is a no-op on small inputs.
    """
    if k < 0:
        raise ValueError("sample size must be non-negative")
    if len(corpus.records) <= k:
        return corpus
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(corpus.records)), k))
    return SegmentedCorpus(
        tuple(corpus.records[i] for i in picked), source_id=corpus.source_id
    )


@dataclass(frozen=True)
class TokenizerModel:
    """An immutable BPE vocabulary with merge rules and reserved byte tokens.

    Token ids are dense and 0-based: the id of a token is its index in
    ``tokens``.  ``scores[i]`` belongs to ``tokens[i]``.  ``merges`` is
    ordered by rank; rank 0 applies first during encoding.  Exactly the 256
    byte-token surfaces must appear among ``tokens``; their surface form
    ``<0xHH>`` is reserved and cannot collide with trained tokens because
    symbol splitting keeps ``<`` and hex digits in separate pieces.
    """

    tokens: tuple[str, ...]
    scores: tuple[float, ...]
    merges: tuple[tuple[str, str], ...]
    nfkc: bool = True

    # Derived lookups, filled in __post_init__.
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)
    byte_to_id: dict[int, int] = field(init=False, repr=False, compare=False)
    id_to_byte: dict[int, int] = field(init=False, repr=False, compare=False)
    merge_ranks: dict[tuple[str, str], int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.scores):
            raise InvalidModelError("tokens and scores differ in length")
        token_to_id: dict[str, int] = {}
        byte_to_id: dict[int, int] = {}
        id_to_byte: dict[int, int] = {}
        for i, tok in enumerate(self.tokens):
            if not tok:
                raise InvalidModelError(f"empty token string at id {i}")
            if tok in token_to_id:
                raise InvalidModelError(f"duplicate token string: {tok!r}")
            token_to_id[tok] = i
            value = _BYTE_VALUE.get(tok)
            if value is not None:
                byte_to_id[value] = i
                id_to_byte[i] = value
        if len(byte_to_id) != 256:
            raise InvalidModelError(
                f"model must contain all 256 byte tokens, found {len(byte_to_id)}"
            )
        merge_ranks: dict[tuple[str, str], int] = {}
        for rank, (left, right) in enumerate(self.merges):
            if not left or not right:
                raise InvalidModelError(f"merge {rank} has an empty side")
            if (left, right) in merge_ranks:
                raise InvalidModelError(f"duplicate merge pair {(left, right)!r}")
            if left + right not in token_to_id:
                raise InvalidModelError(
                    f"merge {rank} produces {left + right!r} which is not in the vocabulary"
                )
            merge_ranks[(left, right)] = rank
        object.__setattr__(self, "token_to_id", token_to_id)
        object.__setattr__(self, "byte_to_id", byte_to_id)
        object.__setattr__(self, "id_to_byte", id_to_byte)
        object.__setattr__(self, "merge_ranks", merge_ranks)

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def is_byte_token(self, token_id: int) -> bool:
        return token_id in self.id_to_byte


def _merge_word(symbols: list[str], left: str, right: str) -> list[str]:
    """Merge every occurrence of the adjacent pair, left to right."""
    out: list[str] = []
    i = 0
    merged = left + right
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == left and symbols[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def train_bpe(
    corpus: SegmentedCorpus, target_vocab_size: int, nfkc: bool = True
) -> TokenizerModel:
    """Train a BPE vocabulary of ``target_vocab_size`` learned tokens.

    Each word is normalized, symbol-split, and broken into character symbols.
    The loop repeatedly merges the globally most frequent adjacent pair; ties
    break on the lexicographic order of the merged string (then of the left
    side, which disambiguates two splits of the same string).  Merges never
    cross word boundaries.  ``target_vocab_size`` counts learned tokens
    (characters plus merge outputs); the 256 reserved byte tokens come on top
    of it.  Training stops early, without error, if no pair is left to merge.

    Pair counting is single-threaded on purpose: the merge list must be a
    deterministic function of corpus and target.
    """
    piece_freq: Counter[str] = Counter()
    for record in corpus.records:
        for word in record:
            w = normalize(word) if nfkc else word
            if not w:
                continue
            for piece in split_symbols(w):
                piece_freq[piece] += 1
    if not piece_freq:
        raise CorpusError("cannot train on an empty corpus")

    inventory = sorted({ch for piece in piece_freq for ch in piece})
    if target_vocab_size < len(inventory):
        raise VocabularyError(
            f"target vocabulary size {target_vocab_size} is below the "
            f"character inventory of {len(inventory)}"
        )

    words: list[list[str]] = []
    freqs: list[int] = []
    for piece in piece_freq:
        words.append(list(piece))
        freqs.append(piece_freq[piece])

    pair_counts: Counter[tuple[str, str]] = Counter()
    pair_words: dict[tuple[str, str], set[int]] = {}
    for wi, symbols in enumerate(words):
        f = freqs[wi]
        for a, b in zip(symbols, symbols[1:]):
            pair_counts[(a, b)] += f
            pair_words.setdefault((a, b), set()).add(wi)

    vocab: set[str] = set(inventory)
    merges: list[tuple[str, str]] = []
    seen_pairs: set[tuple[str, str]] = set()
    merged_tokens: list[str] = []

    while len(vocab) < target_vocab_size and pair_counts:
        best = min(
            pair_counts.items(),
            key=lambda kv: (-kv[1], kv[0][0] + kv[0][1], kv[0][0]),
        )[0]
        # A pair can regain count when its output string forms again through a
        # different split; merge those occurrences but record the rule once.
        if best not in seen_pairs:
            seen_pairs.add(best)
            merges.append(best)
        new_token = best[0] + best[1]
        if new_token not in vocab:
            vocab.add(new_token)
            merged_tokens.append(new_token)

        for wi in sorted(pair_words.get(best, ())):
            symbols = words[wi]
            f = freqs[wi]
            for a, b in zip(symbols, symbols[1:]):
                pair_counts[(a, b)] -= f
                if pair_counts[(a, b)] <= 0:
                    del pair_counts[(a, b)]
                refs = pair_words.get((a, b))
                if refs is not None:
                    refs.discard(wi)
                    if not refs:
                        del pair_words[(a, b)]
            symbols = _merge_word(symbols, best[0], best[1])
            words[wi] = symbols
            for a, b in zip(symbols, symbols[1:]):
                pair_counts[(a, b)] += f
                pair_words.setdefault((a, b), set()).add(wi)

    tokens = list(BYTE_TOKENS) + inventory + merged_tokens
    scores = [BASE_SCORE] * (256 + len(inventory))
    rank_of: dict[str, int] = {}
    for k, (left, right) in enumerate(merges, start=1):
        rank_of.setdefault(left + right, k)
    scores += [-float(rank_of[t]) for t in merged_tokens]
    return TokenizerModel(tuple(tokens), tuple(scores), tuple(merges), nfkc=nfkc)


def encode(model: TokenizerModel, text: str) -> list[int]:
    """Encode ``text`` to token ids: normalize, merge by rank, byte fallback.

    The text is treated as one character stream; no word segmentation is
    applied at this stage.  Merges apply greedily, lowest rank first, all
    occurrences of the chosen pair at once.  Any leftover symbol that is not
    in the vocabulary is emitted as its UTF-8 bytes via the reserved byte
    tokens, so encoding never fails.
    """
    if model.nfkc:
        text = normalize(text)
    if not text:
        return []
    symbols = list(text)
    ranks = model.merge_ranks
    while len(symbols) > 1:
        best_rank: int | None = None
        for a, b in zip(symbols, symbols[1:]):
            r = ranks.get((a, b))
            if r is not None and (best_rank is None or r < best_rank):
                best_rank = r
        if best_rank is None:
            break
        left, right = model.merges[best_rank]
        symbols = _merge_word(symbols, left, right)

    ids: list[int] = []
    for sym in symbols:
        tid = model.token_to_id.get(sym)
        if tid is not None:
            ids.append(tid)
        else:
            # surrogatepass keeps encoding total even on lone surrogates;
            # such bytes decode back flagged as invalid UTF-8.
            for b in sym.encode("utf-8", "surrogatepass"):
                ids.append(model.byte_to_id[b])
    return ids


@dataclass(frozen=True)
class DecodedText:
    """Decoded text plus a flag for byte runs that were not valid UTF-8."""

    text: str
    invalid_utf8: bool


def decode_with_metadata(model: TokenizerModel, ids: Sequence[int]) -> DecodedText:
    """Decode ids to text, reassembling byte-token runs into UTF-8.

    Never normalizes: for any string ``s``, ``decode(encode(normalize(s)))``
    returns ``normalize(s)`` exactly.  A byte run that does not decode as
    UTF-8 is replaced with U+FFFD and flagged.
    """
    parts: list[str] = []
    buf = bytearray()
    invalid = False

    def flush() -> None:
        nonlocal invalid
        if not buf:
            return
        try:
            parts.append(buf.decode("utf-8"))
        except UnicodeDecodeError:
            parts.append(buf.decode("utf-8", "replace"))
            invalid = True
        buf.clear()

    for i in ids:
        if not 0 <= i < len(model.tokens):
            raise VocabularyError(f"token id {i} out of range for vocabulary of {len(model.tokens)}")
        value = model.id_to_byte.get(i)
        if value is not None:
            buf.append(value)
        else:
            flush()
            parts.append(model.tokens[i])
    flush()
    return DecodedText("".join(parts), invalid)


def decode(model: TokenizerModel, ids: Sequence[int]) -> str:
    """Decode ids to text; see :func:`decode_with_metadata`."""
    return decode_with_metadata(model, ids).text


def to_document(model: TokenizerModel) -> dict:
    """Build the serializable document for a model."""
    return {
        "version": FORMAT_VERSION,
        "normalization": ["nfkc"] if model.nfkc else [],
        "tokens": [
            {"string": tok, "score": score}
            for tok, score in zip(model.tokens, model.scores)
        ],
        "merges": [[left, right] for left, right in model.merges],
    }


def dumps_model(model: TokenizerModel) -> str:
    """Serialize to the canonical text form: UTF-8 JSON, LF line endings.

    The output is a deterministic function of the model, so identical corpus
    and target give a byte-identical file.
    """
    return json.dumps(to_document(model), ensure_ascii=False, indent=1) + "\n"


def save_model(model: TokenizerModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def _model_from_document(doc: dict) -> TokenizerModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("tokenizer document must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported tokenizer format version: {doc.get('version')!r}")
    norm = doc.get("normalization")
    if not isinstance(norm, list) or any(f != "nfkc" for f in norm):
        raise ModelFormatError(f"unknown normalization flags: {norm!r}")
    raw_tokens = doc.get("tokens")
    raw_merges = doc.get("merges")
    if not isinstance(raw_tokens, list) or not isinstance(raw_merges, list):
        raise ModelFormatError("tokenizer document needs 'tokens' and 'merges' arrays")
    tokens: list[str] = []
    scores: list[float] = []
    for entry in raw_tokens:
        if (
            not isinstance(entry, dict)
            or not isinstance(entry.get("string"), str)
            or not isinstance(entry.get("score"), (int, float))
        ):
            raise ModelFormatError(f"malformed token entry: {entry!r}")
        tokens.append(entry["string"])
        scores.append(float(entry["score"]))
    merges: list[tuple[str, str]] = []
    for pair in raw_merges:
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(p, str) for p in pair)
        ):
            raise ModelFormatError(f"malformed merge entry: {pair!r}")
        merges.append((pair[0], pair[1]))
    return TokenizerModel(tuple(tokens), tuple(scores), tuple(merges), nfkc="nfkc" in norm)


def loads_model(text: str) -> TokenizerModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a valid tokenizer document: {exc}") from exc
    return _model_from_document(doc)


def load_model(path: str) -> TokenizerModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
