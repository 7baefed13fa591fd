"""Continual-pretraining data pipeline: mixtures, parallel text, packing.

``plan_mixture`` turns source weights into exact integer token budgets
(largest-remainder apportionment, with per-source caps redistributed to
sources that can still absorb tokens) plus a deterministic interleave order
whose every prefix tracks the budget ratios to within one document per
source.  Parallel sentence pairs are formatted either as plain next-token
text or with a translation instruction and a loss mask over the target only.
``build_schedule`` arranges parallel examples against the plain stream, and
``pack_sequences`` fills fixed-length training sequences without reordering.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

from .errors import CorpusError, MixtureError, ScheduleError
from .tokenizer import TokenizerModel, encode

TI_INSTRUCTION_JA_TO_EN = "Please translate the following Japanese text into English."
TI_INSTRUCTION_EN_TO_JA = "Please translate the following English text into Japanese."


class ExampleFormat(str, Enum):
    NTP = "ntp"
    TI = "ti"


class Direction(str, Enum):
    JA_TO_EN = "ja-en"
    EN_TO_JA = "en-ja"


class ScheduleMode(str, Enum):
    TWO_STAGED = "two-staged"
    MIXED = "mixed"


# ---------------------------------------------------------------------------
# Mixture planning


@dataclass(frozen=True)
class MixtureSource:
    """One corpus in a mixture: id, sampling weight, optional token cap."""

    source_id: str
    weight: float
    token_cap: int | None = None
    path: str | None = None


@dataclass(frozen=True)
class MixtureSpec:
    """Weights over sources plus the total token budget and interleave seed."""

    sources: tuple[MixtureSource, ...]
    total_tokens: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sources:
            raise MixtureError("mixture needs at least one source")
        ids = [s.source_id for s in self.sources]
        if len(set(ids)) != len(ids):
            raise MixtureError(f"duplicate source ids: {ids}")
        for s in self.sources:
            if s.weight <= 0:
                raise MixtureError(f"source {s.source_id!r} has non-positive weight")
            if s.token_cap is not None and s.token_cap < 0:
                raise MixtureError(f"source {s.source_id!r} has negative token cap")
        if abs(sum(s.weight for s in self.sources) - 1.0) > 1e-9:
            raise MixtureError(
                f"weights must sum to 1, got {sum(s.weight for s in self.sources)!r}"
            )
        if self.total_tokens <= 0:
            raise MixtureError("total token budget must be positive")
        for s in self.sources:
            cap = s.token_cap
            if cap is not None and cap > math.ceil(s.weight * self.total_tokens):
                raise MixtureError(
                    f"cap on {s.source_id!r} exceeds its implied budget "
                    f"({cap} > {s.weight * self.total_tokens:g})"
                )


def _largest_remainder(weights: dict[str, float], total: int) -> dict[str, int]:
    """Apportion ``total`` by weight: floors first, remainders by size."""
    weight_sum = sum(weights.values())
    quotas = {sid: total * w / weight_sum for sid, w in weights.items()}
    budgets = {sid: math.floor(q) for sid, q in quotas.items()}
    leftover = total - sum(budgets.values())
    by_remainder = sorted(
        weights, key=lambda sid: (-(quotas[sid] - budgets[sid]), sid)
    )
    for sid in by_remainder[:leftover]:
        budgets[sid] += 1
    return budgets


def _apportion(spec: MixtureSpec) -> dict[str, int]:
    caps = {s.source_id: s.token_cap for s in spec.sources}
    weights = {s.source_id: s.weight for s in spec.sources}
    pinned: dict[str, int] = {}
    while True:
        free = {sid: w for sid, w in weights.items() if sid not in pinned}
        remaining = spec.total_tokens - sum(pinned.values())
        if not free:
            if remaining == 0:
                return pinned
            raise MixtureError(
                "infeasible mixture: all sources are capped below the demand"
            )
        budgets = _largest_remainder(free, remaining)
        overflow = [
            sid
            for sid, b in budgets.items()
            if caps[sid] is not None and b > caps[sid]
        ]
        if not overflow:
            return {**pinned, **budgets}
        for sid in overflow:
            pinned[sid] = caps[sid]  # type: ignore[assignment]


class _RoundRobin:
    """Smooth weighted round-robin over named lanes.

    Each step adds every active lane's weight to its credit, emits the lane
    with the highest credit, and subtracts the emitted credit mass.  Any
    prefix of the emissions deviates from the weight ratios by at most one
    emission per lane.  Ties break by a seeded, fixed priority order.
    """

    def __init__(self, weights: dict[str, float], seed: int) -> None:
        if not weights:
            raise MixtureError("round robin needs at least one lane")
        total = sum(weights.values())
        self._weights = {k: w / total for k, w in weights.items()}
        self._credit = {k: 0.0 for k in weights}
        order = sorted(weights)
        random.Random(seed).shuffle(order)
        self._priority = {k: i for i, k in enumerate(order)}

    def drop(self, lane: str) -> bool:
        """Remove a lane; returns False when no lane is left."""
        self._weights.pop(lane, None)
        self._credit.pop(lane, None)
        total = sum(self._weights.values())
        if total <= 0:
            return False
        self._weights = {k: w / total for k, w in self._weights.items()}
        return True

    def next(self) -> str:
        best: str | None = None
        for lane, w in self._weights.items():
            self._credit[lane] += w
            if best is None or (self._credit[lane], -self._priority[lane]) > (
                self._credit[best],
                -self._priority[best],
            ):
                best = lane
        assert best is not None
        self._credit[best] -= 1.0
        return best


@dataclass(frozen=True)
class MixturePlan:
    """Exact per-source budgets and the deterministic interleave order."""

    spec: MixtureSpec
    budgets: dict[str, int] = field(compare=False)

    def slots(self) -> Iterator[str]:
        """Yield source ids forever in smooth round-robin order.

        Lane weights follow the realized budgets, so the document mix in any
        prefix matches the token budget ratios to within one document per
        source while every source is still active.
        """
        weights = {sid: float(b) for sid, b in self.budgets.items() if b > 0}
        rr = _RoundRobin(weights, seed=self.spec.seed)
        while True:
            yield rr.next()


def plan_mixture(spec: MixtureSpec) -> MixturePlan:
    """Compute exact integer budgets for the spec, honoring caps.

    Budgets sum exactly to ``total_tokens``.  A source whose share exceeds
    its cap is pinned at the cap and the overflow is re-apportioned among the
    sources that can still absorb tokens, proportionally to their weights.
    """
    return MixturePlan(spec=spec, budgets=_apportion(spec))


@dataclass(frozen=True)
class PlanItem:
    source_id: str
    doc_ref: int
    tokens: int


def realize_plan(
    plan: MixturePlan,
    doc_tokens: dict[str, Sequence[int]],
) -> list[PlanItem]:
    """Assign documents to the plan's slots until every budget is spent.

    ``doc_tokens[sid]`` lists the token count of each document of a source,
    in file order; ``doc_ref`` is the index into that list.  Sources cycle
    through their documents again when the budget outlasts the corpus, and a
    source leaves the rotation after the document that crosses its budget.
    """
    for sid in plan.budgets:
        if plan.budgets[sid] > 0 and not doc_tokens.get(sid):
            raise CorpusError(f"source {sid!r} has a budget but no documents")
    remaining = dict(plan.budgets)
    cursor = {sid: 0 for sid in plan.budgets}
    weights = {sid: float(b) for sid, b in plan.budgets.items() if b > 0}
    if not weights:
        return []
    rr = _RoundRobin(weights, seed=plan.spec.seed)
    items: list[PlanItem] = []
    active = True
    while active:
        sid = rr.next()
        docs = doc_tokens[sid]
        ref = cursor[sid] % len(docs)
        cursor[sid] += 1
        count = docs[ref]
        items.append(PlanItem(sid, ref, count))
        remaining[sid] -= count
        if remaining[sid] <= 0:
            active = rr.drop(sid)
    return items


def write_plan(plan: MixturePlan, items: Sequence[PlanItem], path: str) -> None:
    """Write the plan file: budget header lines then (source_id, doc_ref) rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#mixture-plan\tv1\n")
        fh.write(f"#seed\t{plan.spec.seed}\n")
        fh.write(f"#total_tokens\t{plan.spec.total_tokens}\n")
        for source in plan.spec.sources:
            fh.write(f"#budget\t{source.source_id}\t{plan.budgets[source.source_id]}\n")
        for item in items:
            fh.write(f"{item.source_id}\t{item.doc_ref}\n")


def read_plan_items(path: str) -> list[tuple[str, int]]:
    items: list[tuple[str, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: malformed plan row {line!r}")
            items.append((parts[0], int(parts[1])))
    return items


# ---------------------------------------------------------------------------
# Document and pair input


def read_documents(path: str) -> list[str]:
    """Read a corpus: one UTF-8 document per line, or length-prefixed binary.

    A ``.bin`` suffix selects the binary form: repeated records of a
    little-endian u32 byte length followed by that many UTF-8 bytes.
    """
    if path.endswith(".bin"):
        docs: list[str] = []
        with open(path, "rb") as fh:
            raw = fh.read()
        offset = 0
        while offset < len(raw):
            if offset + 4 > len(raw):
                raise CorpusError(f"{path}: truncated record length at byte {offset}")
            (length,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            if offset + length > len(raw):
                raise CorpusError(f"{path}: truncated record payload at byte {offset}")
            docs.append(raw[offset : offset + length].decode("utf-8"))
            offset += length
        return docs
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


@dataclass(frozen=True)
class ParallelPair:
    """An aligned sentence pair; both sides must be non-empty."""

    ja: str
    en: str
    pair_id: int

    def __post_init__(self) -> None:
        if not self.ja.strip() or not self.en.strip():
            raise CorpusError(f"pair {self.pair_id} has an empty side")


def read_parallel_pairs(path: str) -> list[ParallelPair]:
    """Read tab-separated ja/en pairs, one per line; line number is the pair id."""
    pairs: list[ParallelPair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(
                    f"{path}:{lineno + 1}: expected two tab-separated fields, got {len(parts)}"
                )
            try:
                pairs.append(ParallelPair(parts[0], parts[1], pair_id=lineno))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno + 1}: {exc}") from exc
    return pairs


# ---------------------------------------------------------------------------
# Formatting


@dataclass(frozen=True)
class FormattedExample:
    """A formatted pair: token ids, per-token loss mask, format, direction."""

    token_ids: tuple[int, ...]
    loss_mask: tuple[int, ...]
    format: ExampleFormat
    direction: Direction
    pair_id: int

    def __post_init__(self) -> None:
        if len(self.token_ids) != len(self.loss_mask):
            raise ScheduleError("token ids and loss mask differ in length")
        if not self.token_ids:
            raise ScheduleError(f"pair {self.pair_id}: empty formatted example")
        if any(m not in (0, 1) for m in self.loss_mask):
            raise ScheduleError("loss mask values must be 0 or 1")
        if 1 not in self.loss_mask:
            raise ScheduleError(f"pair {self.pair_id}: loss mask is all zeros")
        if self.format is ExampleFormat.NTP and 0 in self.loss_mask:
            raise ScheduleError("next-token examples carry an all-ones mask")

    @property
    def tokens(self) -> int:
        return len(self.token_ids)


def _sides(pair: ParallelPair, direction: Direction) -> tuple[str, str]:
    if direction is Direction.JA_TO_EN:
        return pair.ja, pair.en
    return pair.en, pair.ja


def ntp_text(pair: ParallelPair, direction: Direction) -> str:
    """Plain next-token form: source and target joined by a single space."""
    source, target = _sides(pair, direction)
    return f"{source} {target}"


def ti_instruction(direction: Direction) -> str:
    if direction is Direction.JA_TO_EN:
        return TI_INSTRUCTION_JA_TO_EN
    return TI_INSTRUCTION_EN_TO_JA


def ti_prefix_text(pair: ParallelPair, direction: Direction) -> str:
    """Everything before the target: instruction line, then source and a space."""
    source, _ = _sides(pair, direction)
    return f"{ti_instruction(direction)}\n{source} "


def ti_text(pair: ParallelPair, direction: Direction) -> str:
    _, target = _sides(pair, direction)
    return ti_prefix_text(pair, direction) + target


def format_ntp(pair: ParallelPair, model: TokenizerModel) -> tuple[FormattedExample, FormattedExample]:
    """Format a pair in both directions as plain text; every token trains."""
    out = []
    for direction in (Direction.JA_TO_EN, Direction.EN_TO_JA):
        ids = tuple(encode(model, ntp_text(pair, direction)))
        out.append(
            FormattedExample(ids, (1,) * len(ids), ExampleFormat.NTP, direction, pair.pair_id)
        )
    return out[0], out[1]


def format_ti(pair: ParallelPair, model: TokenizerModel) -> tuple[FormattedExample, FormattedExample]:
    """Format a pair in both directions with a translation instruction.

    The loss mask is 0 over the instruction and source (separator included)
    and 1 over the target, so the masked-in ids decode to exactly the
    normalized target sentence.  Prefix and target are encoded separately,
    which pins that boundary regardless of the tokenizer's merges.
    """
    out = []
    for direction in (Direction.JA_TO_EN, Direction.EN_TO_JA):
        _, target = _sides(pair, direction)
        prefix_ids = tuple(encode(model, ti_prefix_text(pair, direction)))
        target_ids = tuple(encode(model, target))
        out.append(
            FormattedExample(
                prefix_ids + target_ids,
                (0,) * len(prefix_ids) + (1,) * len(target_ids),
                ExampleFormat.TI,
                direction,
                pair.pair_id,
            )
        )
    return out[0], out[1]


def format_pairs(
    pairs: Iterable[ParallelPair], model: TokenizerModel, fmt: ExampleFormat
) -> list[FormattedExample]:
    """Format every pair in both directions, preserving pair order."""
    formatter = format_ntp if fmt is ExampleFormat.NTP else format_ti
    out: list[FormattedExample] = []
    for pair in pairs:
        out.extend(formatter(pair, model))
    return out


# ---------------------------------------------------------------------------
# Scheduling and packing


@dataclass(frozen=True)
class TrainingDoc:
    """One schedulable document: ids, loss mask, and a provenance label."""

    token_ids: tuple[int, ...]
    loss_mask: tuple[int, ...]
    origin: str

    def __post_init__(self) -> None:
        if not self.token_ids:
            raise ScheduleError(f"empty document from {self.origin}")
        if len(self.token_ids) != len(self.loss_mask):
            raise ScheduleError(f"{self.origin}: ids and mask differ in length")

    @property
    def tokens(self) -> int:
        return len(self.token_ids)


def example_as_doc(example: FormattedExample) -> TrainingDoc:
    origin = f"parallel:{example.format.value}:{example.direction.value}:{example.pair_id}"
    return TrainingDoc(example.token_ids, example.loss_mask, origin)


def build_schedule(
    parallel: Sequence[FormattedExample],
    plain: Sequence[TrainingDoc],
    mode: ScheduleMode,
    fmt: ExampleFormat,
    seed: int = 0,
) -> list[TrainingDoc]:
    """Order parallel examples against the plain stream.

    Two-staged: every parallel example precedes every plain document.
    Mixed: the two streams interleave at their token-weight proportion, each
    stream keeping its internal order, any prefix within one document of the
    proportion.  Instruction-formatted data cannot be mixed: the mask-bearing
    examples are only supported as a leading stage, so TI with mixed raises.
    """
    if fmt is ExampleFormat.TI and mode is ScheduleMode.MIXED:
        raise ScheduleError(
            "unsupported combination: instruction-formatted examples can only "
            "be scheduled two-staged, not mixed into the plain stream"
        )
    for ex in parallel:
        if ex.format is not fmt:
            raise ScheduleError(f"example format {ex.format} does not match schedule format {fmt}")

    parallel_docs = [example_as_doc(ex) for ex in parallel]
    if mode is ScheduleMode.TWO_STAGED:
        return parallel_docs + list(plain)

    parallel_tokens = sum(d.tokens for d in parallel_docs)
    plain_tokens = sum(d.tokens for d in plain)
    if parallel_tokens == 0:
        return list(plain)
    if plain_tokens == 0:
        return parallel_docs

    # Token-deficit interleave: each step emits from the lane whose token
    # share lags its target most, so any prefix stays within one document's
    # tokens of the proportion.  The seed fixes the order among tied lanes.
    total = parallel_tokens + plain_tokens
    share = {"parallel": parallel_tokens / total, "plain": plain_tokens / total}
    lanes = ["parallel", "plain"]
    random.Random(seed).shuffle(lanes)
    priority = {lane: i for i, lane in enumerate(lanes)}
    queues: dict[str, list[TrainingDoc]] = {
        "parallel": list(parallel_docs),
        "plain": list(plain),
    }
    position = {"parallel": 0, "plain": 0}
    emitted = {"parallel": 0, "plain": 0}
    emitted_total = 0
    out: list[TrainingDoc] = []
    while True:
        active = [lane for lane in ("parallel", "plain") if position[lane] < len(queues[lane])]
        if not active:
            return out
        lane = max(
            active,
            key=lambda s: (share[s] * emitted_total - emitted[s], -priority[s]),
        )
        doc = queues[lane][position[lane]]
        position[lane] += 1
        emitted[lane] += doc.tokens
        emitted_total += doc.tokens
        out.append(doc)


@dataclass(frozen=True)
class PackedSequence:
    token_ids: tuple[int, ...]
    loss_mask: tuple[int, ...]


@dataclass
class PackStats:
    documents: int = 0
    sequences: int = 0
    split_documents: int = 0
    document_tokens: int = 0
    separator_tokens: int = 0
    padding_tokens: int = 0

    @property
    def used_positions(self) -> int:
        return self.document_tokens + self.separator_tokens


def pack_sequences(
    stream: Iterable[TrainingDoc],
    context_length: int,
    separator_id: int,
    pad_id: int | None = None,
) -> tuple[list[PackedSequence], PackStats]:
    """Greedily pack documents into fixed-length sequences, never reordering.

    A separator token (trained on, mask 1) sits between documents that share
    a sequence.  A document that no longer fits opens a fresh sequence; one
    longer than the context is split at the context boundary and counted in
    ``split_documents``.  The final partial sequence is padded with mask 0.
    """
    if context_length < 2:
        raise ScheduleError("context length must be at least 2")
    pad = separator_id if pad_id is None else pad_id
    stats = PackStats()
    sequences: list[PackedSequence] = []
    ids: list[int] = []
    mask: list[int] = []

    def flush() -> None:
        if not ids:
            return
        stats.padding_tokens += context_length - len(ids)
        ids.extend([pad] * (context_length - len(ids)))
        mask.extend([0] * (context_length - len(mask)))
        sequences.append(PackedSequence(tuple(ids), tuple(mask)))
        stats.sequences += 1
        ids.clear()
        mask.clear()

    for doc in stream:
        stats.documents += 1
        stats.document_tokens += doc.tokens
        if ids:
            if len(ids) + 1 + doc.tokens > context_length:
                flush()
            else:
                ids.append(separator_id)
                mask.append(1)
                stats.separator_tokens += 1
        if doc.tokens > context_length:
            stats.split_documents += 1
            offset = 0
            while offset < doc.tokens:
                take = min(context_length - len(ids), doc.tokens - offset)
                ids.extend(doc.token_ids[offset : offset + take])
                mask.extend(doc.loss_mask[offset : offset + take])
                offset += take
                if len(ids) == context_length:
                    flush()
        else:
            ids.extend(doc.token_ids)
            mask.extend(doc.loss_mask)
            if len(ids) == context_length:
                flush()
    flush()
    return sequences, stats


# ---------------------------------------------------------------------------
# Example stream files


def write_stream(docs: Iterable[TrainingDoc], path: str) -> None:
    """Write one document per line: origin, ids, mask, tab-separated."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            ids = " ".join(str(i) for i in doc.token_ids)
            mask = " ".join(str(m) for m in doc.loss_mask)
            fh.write(f"{doc.origin}\t{ids}\t{mask}\n")


def read_stream(path: str) -> list[TrainingDoc]:
    docs: list[TrainingDoc] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"{path}:{lineno}: malformed stream row")
            origin, ids_s, mask_s = parts
            docs.append(
                TrainingDoc(
                    tuple(int(x) for x in ids_s.split()),
                    tuple(int(x) for x in mask_s.split()),
                    origin,
                )
            )
    return docs


def write_packed(sequences: Iterable[PackedSequence], path: str) -> None:
    """Write packed sequences, one per line: ids TAB mask, space-separated."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for seq in sequences:
            ids = " ".join(str(i) for i in seq.token_ids)
            mask = " ".join(str(m) for m in seq.loss_mask)
            fh.write(f"{ids}\t{mask}\n")
