"""Tokenization-efficiency and evaluation-stability diagnostics.

Two report families live here.  Efficiency reports compare how many tokens a
base and an expanded tokenizer spend on the same text; the headline number is
the generation-efficiency gain, ``1/ratio - 1``, so a corpus tokenized at
0.562 times the base token count reads as a 77.9% gain.  Balance reports
detect the failure mode where a classification metric is propped up by one
majority class: when most predictions are a single label, small alignment
shifts between the prediction majority and the gold majority swing the score,
so the report flags the run as unstable.  The scalar metrics the reports rely
on (character-multiset F1, stripped exact match) and a score-transition
histogram for before/after comparisons are exported as well.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .errors import ConfigError, CorpusError, TonguegraftError
from .tokenizer import TokenizerModel, encode, normalize


def ratio_to_gain(token_ratio: float) -> float:
    """Generation-efficiency gain implied by a token ratio.

    A ratio of expanded to base token counts below 1.0 means the expanded
    tokenizer spends fewer tokens on the same text; the reciprocal measures
    how much more text fits in a fixed token budget.
    """
    if token_ratio <= 0:
        raise TonguegraftError(f"token ratio must be positive, got {token_ratio}")
    return 1.0 / token_ratio - 1.0


@dataclass(frozen=True)
class EfficiencyReport:
    """Token spend of two tokenizers over one corpus."""

    documents: int
    chars: int
    base_tokens: int
    expanded_tokens: int
    token_ratio: float
    efficiency_gain: float
    base_chars_per_token: float
    expanded_chars_per_token: float

    def __post_init__(self) -> None:
        if self.documents <= 0 or self.base_tokens <= 0 or self.expanded_tokens <= 0:
            raise TonguegraftError("efficiency report requires positive counts")
        if abs(self.efficiency_gain - ratio_to_gain(self.token_ratio)) > 1e-12:
            raise TonguegraftError("efficiency gain inconsistent with token ratio")

    def lines(self) -> list[str]:
        return [
            f"documents\t{self.documents}",
            f"chars\t{self.chars}",
            f"base_tokens\t{self.base_tokens}",
            f"expanded_tokens\t{self.expanded_tokens}",
            f"token_ratio\t{self.token_ratio:.6f}",
            f"efficiency_gain\t{self.efficiency_gain:.6f}",
            f"base_chars_per_token\t{self.base_chars_per_token:.6f}",
            f"expanded_chars_per_token\t{self.expanded_chars_per_token:.6f}",
        ]


def efficiency_report(
    base: TokenizerModel, expanded: TokenizerModel, corpus: Iterable[str]
) -> EfficiencyReport:
    """Tokenize every document with both models and compare the totals.

    Character counts are taken over the normalized text, the same form both
    tokenizers consume, so chars-per-token is comparable between them.
    """
    documents = 0
    chars = 0
    base_total = 0
    expanded_total = 0
    for text in corpus:
        documents += 1
        chars += len(normalize(text))
        base_total += len(encode(base, text))
        expanded_total += len(encode(expanded, text))
    if documents == 0:
        raise CorpusError("efficiency report needs a non-empty corpus")
    if base_total == 0 or expanded_total == 0:
        raise CorpusError("corpus contains no tokenizable text")
    ratio = expanded_total / base_total
    return EfficiencyReport(
        documents=documents,
        chars=chars,
        base_tokens=base_total,
        expanded_tokens=expanded_total,
        token_ratio=ratio,
        efficiency_gain=ratio_to_gain(ratio),
        base_chars_per_token=chars / base_total,
        expanded_chars_per_token=chars / expanded_total,
    )


def _majority(counts: Counter[str]) -> tuple[str, int]:
    """Most frequent label, ties broken toward the lexicographically smaller."""
    return min(counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class BalanceReport:
    """Majority-class profile of a prediction set against its gold labels."""

    n: int
    pred_counts: dict[str, int]
    label_counts: dict[str, int]
    majority_pred: str
    majority_pred_fraction: float
    majority_label: str
    majority_label_fraction: float
    majorities_coincide: bool
    threshold: float
    unstable: bool

    def lines(self) -> list[str]:
        out = [f"examples\t{self.n}"]
        for label in sorted(set(self.pred_counts) | set(self.label_counts)):
            out.append(
                f"class\t{label}\t{self.pred_counts.get(label, 0)}"
                f"\t{self.label_counts.get(label, 0)}"
            )
        out.extend(
            [
                f"majority_pred\t{self.majority_pred}\t{self.majority_pred_fraction:.6f}",
                f"majority_label\t{self.majority_label}\t{self.majority_label_fraction:.6f}",
                f"majorities_coincide\t{str(self.majorities_coincide).lower()}",
                f"threshold\t{self.threshold:.6f}",
                f"unstable\t{str(self.unstable).lower()}",
            ]
        )
        return out


def class_balance(
    predictions: Sequence[str], gold: Sequence[str], threshold: float = 0.9
) -> BalanceReport:
    """Flag prediction sets dominated by a single class.

    When the majority prediction fraction exceeds ``threshold`` the reported
    accuracy mostly measures whether that one class happens to match the gold
    majority, so the run is marked unstable.  The default threshold sits
    below the extreme collapse regime to catch borderline cases; pass 0.95
    to flag only near-total collapse.
    """
    if not predictions:
        raise ConfigError("class_balance needs at least one prediction")
    if len(predictions) != len(gold):
        raise ConfigError(
            f"got {len(predictions)} predictions but {len(gold)} gold labels"
        )
    if not 0 < threshold < 1:
        raise ConfigError("threshold must be in (0, 1)")
    pred_counts = Counter(predictions)
    label_counts = Counter(gold)
    n = len(predictions)
    pred_top, pred_n = _majority(pred_counts)
    label_top, label_n = _majority(label_counts)
    pred_fraction = pred_n / n
    return BalanceReport(
        n=n,
        pred_counts=dict(sorted(pred_counts.items())),
        label_counts=dict(sorted(label_counts.items())),
        majority_pred=pred_top,
        majority_pred_fraction=pred_fraction,
        majority_label=label_top,
        majority_label_fraction=label_n / n,
        majorities_coincide=pred_top == label_top,
        threshold=threshold,
        unstable=pred_fraction > threshold,
    )


def char_f1(prediction: str, gold: str) -> float:
    """F1 over character multisets.

    Precision and recall count characters with multiplicity, so repeated
    characters must be repeated in the prediction to score.  Two empty
    strings match perfectly; one empty string scores zero.
    """
    if not prediction and not gold:
        return 1.0
    if not prediction or not gold:
        return 0.0
    overlap = sum((Counter(prediction) & Counter(gold)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(prediction)
    recall = overlap / len(gold)
    return 2 * precision * recall / (precision + recall)


def exact_match(prediction: str, gold: str) -> int:
    """1 when the strings agree after stripping surrounding whitespace."""
    return int(prediction.strip() == gold.strip())


@dataclass(frozen=True)
class TransitionReport:
    """Joint histogram of paired before/after scores.

    ``counts[i][j]`` is the number of items whose before-score fell in bin
    ``i`` and whose after-score fell in bin ``j``.  Items on the diagonal
    kept their bin; mass away from it measures how much individual items
    moved even when the aggregate barely changed.
    """

    lo: float
    hi: float
    bins: int
    counts: tuple[tuple[int, ...], ...]
    n: int

    @property
    def diagonal_fraction(self) -> float:
        return sum(self.counts[i][i] for i in range(self.bins)) / self.n

    def lines(self) -> list[str]:
        out = [
            f"range\t{self.lo:.6f}\t{self.hi:.6f}",
            f"bins\t{self.bins}",
            f"items\t{self.n}",
            f"diagonal_fraction\t{self.diagonal_fraction:.6f}",
        ]
        for i, row in enumerate(self.counts):
            out.append("row\t" + str(i) + "\t" + "\t".join(str(c) for c in row))
        return out


def _bin_index(value: float, lo: float, hi: float, bins: int) -> int:
    if value == hi:
        return bins - 1
    return int((value - lo) / (hi - lo) * bins)


def score_transition(
    before: Sequence[float],
    after: Sequence[float],
    bins: int = 10,
    lo: float = 0.0,
    hi: float = 1.0,
) -> TransitionReport:
    """Build the joint before/after score distribution for paired items."""
    if not before:
        raise ConfigError("score_transition needs at least one score pair")
    if len(before) != len(after):
        raise ConfigError(
            f"got {len(before)} before-scores but {len(after)} after-scores"
        )
    if bins <= 0:
        raise ConfigError("bins must be positive")
    if not hi > lo:
        raise ConfigError("score range must satisfy hi > lo")
    grid = [[0] * bins for _ in range(bins)]
    for b, a in zip(before, after):
        for name, value in (("before", b), ("after", a)):
            if not lo <= value <= hi:
                raise ConfigError(
                    f"{name}-score {value} outside the [{lo}, {hi}] range"
                )
        grid[_bin_index(b, lo, hi, bins)][_bin_index(a, lo, hi, bins)] += 1
    return TransitionReport(
        lo=lo,
        hi=hi,
        bins=bins,
        counts=tuple(tuple(row) for row in grid),
        n=len(before),
    )
