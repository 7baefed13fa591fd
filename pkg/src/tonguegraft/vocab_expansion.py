"""Vocabulary grafting: select novel tokens from a trained model, merge into a base.

``build_addition`` filters a freshly trained vocabulary against a base
tokenizer and produces an addition set: the surviving tokens, their carried
scores, and for each one the base-tokenizer encoding of its string (its
constituents, used later for embedding construction).  ``merge_vocabularies``
appends those tokens to the base model so base ids are untouched and any text
with no added-vocabulary hit encodes exactly as before.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ModelFormatError, VocabularyError
from .tokenizer import FORMAT_VERSION, TokenizerModel, decode, encode

# Word-boundary escape used by sentence-piece style trainers.  Stripped from
# trained tokens because encoding here applies no word segmentation, so the
# boundary marking carries no information.
ESCAPE_CHAR = "▁"


@dataclass(frozen=True)
class AdditionEntry:
    """One token to graft: its string, carried score, and base-model encoding."""

    token: str
    score: float
    constituents: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.token:
            raise VocabularyError("addition entry has an empty token")
        if not self.constituents:
            raise VocabularyError(f"addition entry {self.token!r} has no constituents")


@dataclass(frozen=True)
class AdditionSet:
    """An ordered batch of grafted tokens, sized to a multiple of 8.

    ``base_vocab_size`` pins the base model the set was built against; the
    expanded ids are ``base_vocab_size + index``.
    """

    entries: tuple[AdditionEntry, ...]
    base_vocab_size: int

    def __post_init__(self) -> None:
        if len(self.entries) % 8 != 0:
            raise VocabularyError(
                f"addition size {len(self.entries)} is not a multiple of 8"
            )
        seen: set[str] = set()
        for e in self.entries:
            if e.token in seen:
                raise VocabularyError(f"duplicate addition token {e.token!r}")
            seen.add(e.token)
        if self.base_vocab_size <= 0:
            raise VocabularyError("base vocabulary size must be positive")

    def __len__(self) -> int:
        return len(self.entries)


def build_addition(trained: TokenizerModel, base: TokenizerModel) -> AdditionSet:
    """Select the trained tokens worth grafting onto ``base``.

    Filters, in order: byte tokens are skipped; the word-boundary escape is
    stripped (tokens that were pure escape vanish); tokens already in the
    base vocabulary are dropped; single characters whose UTF-8 encoding is
    one byte are dropped since byte fallback already covers them.  When two
    trained tokens collapse to the same string after stripping, the higher
    score survives.  The result keeps trained-vocabulary order and is
    truncated from the lowest-score end to a multiple of 8.

    Each surviving token must re-encode exactly under the base tokenizer
    (encode then decode gives the token back); a token that fails, which can
    only happen when the trained vocabulary is not normalization-stable,
    raises ``VocabularyError`` naming it.
    """
    order: list[str] = []
    scores: dict[str, float] = {}
    for tid, token in enumerate(trained.tokens):
        if trained.is_byte_token(tid):
            continue
        stripped = token.replace(ESCAPE_CHAR, "")
        if not stripped:
            continue
        if stripped in base.token_to_id:
            continue
        if len(stripped) == 1 and len(stripped.encode("utf-8")) == 1:
            continue
        if stripped not in scores:
            order.append(stripped)
            scores[stripped] = trained.scores[tid]
        else:
            scores[stripped] = max(scores[stripped], trained.scores[tid])

    if not order:
        raise VocabularyError("nothing to add: no novel tokens survive filtering")

    surplus = len(order) % 8
    if surplus:
        # Lowest score goes first; equal scores drop the later token.
        ranked = sorted(range(len(order)), key=lambda i: (scores[order[i]], -i))
        dropped = {order[i] for i in ranked[:surplus]}
        order = [t for t in order if t not in dropped]
    if not order:
        raise VocabularyError(
            "nothing to add: fewer than 8 novel tokens survive filtering"
        )

    entries = []
    for token in order:
        ids = tuple(encode(base, token))
        if decode(base, ids) != token:
            raise VocabularyError(
                f"token {token!r} does not re-encode exactly under the base "
                "tokenizer; is the trained vocabulary normalization-stable?"
            )
        entries.append(AdditionEntry(token, scores[token], ids))
    return AdditionSet(tuple(entries), base_vocab_size=len(base.tokens))


def merge_vocabularies(base: TokenizerModel, addition: AdditionSet) -> TokenizerModel:
    """Append an addition set to ``base`` and derive merge rules for it.

    Added tokens take ids ``base_vocab_size ..`` in entry order, scores
    carried as-is.  Merge rules for multi-character additions are appended
    after every base rule, ordered by descending score, so base behaviour is
    preserved wherever no added token applies.  Each rule is found by the
    leftmost split of the token into two formable parts, where a part is
    formable when it is a single character or some earlier rule produces it;
    a token with no formable split is kept in the vocabulary but gets no
    rule (it can then only appear through explicit ids, never from text).
    """
    if addition.base_vocab_size != len(base.tokens):
        raise VocabularyError(
            f"addition was built against a base of {addition.base_vocab_size} "
            f"tokens, got {len(base.tokens)}"
        )
    for e in addition.entries:
        if e.token in base.token_to_id:
            raise VocabularyError(f"id collision: {e.token!r} already in base vocabulary")

    tokens = base.tokens + tuple(e.token for e in addition.entries)
    scores = base.scores + tuple(e.score for e in addition.entries)

    producible = {left + right for left, right in base.merges}

    def formable(part: str) -> bool:
        return len(part) == 1 or part in producible

    new_merges: list[tuple[str, str]] = []
    for e in sorted(addition.entries, key=lambda e: -e.score):
        token = e.token
        if len(token) < 2:
            continue
        for i in range(1, len(token)):
            left, right = token[:i], token[i:]
            if formable(left) and formable(right):
                new_merges.append((left, right))
                producible.add(token)
                break

    return TokenizerModel(
        tokens, scores, base.merges + tuple(new_merges), nfkc=base.nfkc
    )


def to_addition_document(addition: AdditionSet) -> dict:
    return {
        "version": FORMAT_VERSION,
        "base_vocab_size": addition.base_vocab_size,
        "entries": [
            {
                "string": e.token,
                "score": e.score,
                "constituents": list(e.constituents),
            }
            for e in addition.entries
        ],
    }


def dumps_addition(addition: AdditionSet) -> str:
    return json.dumps(to_addition_document(addition), ensure_ascii=False, indent=1) + "\n"


def save_addition(addition: AdditionSet, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_addition(addition))


def loads_addition(text: str) -> AdditionSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a valid addition document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported addition format version: {doc!r:.80}")
    if not isinstance(doc.get("base_vocab_size"), int):
        raise ModelFormatError("addition document needs an integer 'base_vocab_size'")
    raw = doc.get("entries")
    if not isinstance(raw, list):
        raise ModelFormatError("addition document needs an 'entries' array")
    entries = []
    for item in raw:
        if (
            not isinstance(item, dict)
            or not isinstance(item.get("string"), str)
            or not isinstance(item.get("score"), (int, float))
            or not isinstance(item.get("constituents"), list)
            or not all(isinstance(c, int) for c in item["constituents"])
        ):
            raise ModelFormatError(f"malformed addition entry: {item!r:.120}")
        entries.append(
            AdditionEntry(item["string"], float(item["score"]), tuple(item["constituents"]))
        )
    return AdditionSet(tuple(entries), base_vocab_size=doc["base_vocab_size"])


def load_addition(path: str) -> AdditionSet:
    with open(path, encoding="utf-8") as fh:
        return loads_addition(fh.read())
