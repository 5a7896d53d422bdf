"""Conversational prompts built from word-aligned sentence pairs.

A prompt interleaves source and target chunks::

    <s> <t> s1 .. si </t> t1 .. tj </s> <s> <t> ... </t> ... </s>

preceded by a plain-text header that carries the prior-sentence context.
Training loss covers each target chunk plus its closing ``</s>``; the
``</t>`` before it is excluded.

Alignment pairs are 0-based ``(source_index, target_index)`` tuples, the same
numbering Pharaoh ``i-j`` files use. Spans are half-open.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import LANGUAGE_NAMES

BOS, SRC, END_SRC, EOS = "<s>", "<t>", "</t>", "</s>"
DELIMITERS = frozenset((BOS, SRC, END_SRC, EOS))
ESCAPE = "\\"

CONTEXT_PREFIX = "Use the following sentence as context:"


class DegenerateAlignment(ValueError):
    pass


class DelimiterCollision(ValueError):
    pass


class MalformedPrompt(ValueError):
    pass


def _is_escaped_delimiter(word: str) -> bool:
    return word.lstrip(ESCAPE) in DELIMITERS


def escape_word(word: str) -> str:
    """Prefix a backslash to delimiter literals (and to already-escaped ones)."""
    return ESCAPE + word if _is_escaped_delimiter(word) else word


def unescape_word(word: str) -> str:
    if word.startswith(ESCAPE) and _is_escaped_delimiter(word):
        return word[1:]
    return word


# -- data types ---------------------------------------------------------------


@dataclass(frozen=True)
class AlignedSentencePair:
    source: tuple[str, ...]
    target: tuple[str, ...]
    alignment: frozenset[tuple[int, int]]
    context: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for i, j in self.alignment:
            if not (0 <= i < len(self.source) and 0 <= j < len(self.target)):
                raise ValueError(f"alignment pair {i}-{j} out of range for |S|={len(self.source)}, |T|={len(self.target)}")

    @classmethod
    def from_text(cls, source: str, target: str, pharaoh: str, context: str = "") -> "AlignedSentencePair":
        return cls(tuple(source.split()), tuple(target.split()), read_pharaoh(pharaoh), tuple(context.split()))


@dataclass(frozen=True)
class Interval:
    src_start: int
    src_end: int
    tgt_start: int
    tgt_end: int


@dataclass(frozen=True)
class PromptPlan:
    intervals: tuple[Interval, ...]

    def __len__(self) -> int:
        return len(self.intervals)

    def validate(self, n_source: int, n_target: int) -> None:
        """Check contiguity, order and coverage; source spans must be nonempty."""
        if not self.intervals:
            raise ValueError("a plan needs at least one interval")
        s = t = 0
        for k, iv in enumerate(self.intervals):
            if iv.src_start != s or iv.tgt_start != t:
                raise ValueError(f"interval {k} is not contiguous with its predecessor")
            if iv.src_end <= iv.src_start or iv.tgt_end < iv.tgt_start:
                raise ValueError(f"interval {k} has an empty or inverted span")
            s, t = iv.src_end, iv.tgt_end
        if s != n_source or t != n_target:
            raise ValueError(f"plan covers ({s}, {t}), expected ({n_source}, {n_target})")

    @classmethod
    def from_cuts(cls, src_cuts: Sequence[int], tgt_cuts: Sequence[int]) -> "PromptPlan":
        """Build from cumulative span ends, e.g. ``([1, 3], [2, 4])``."""
        ivs = []
        s = t = 0
        for se, te in zip(src_cuts, tgt_cuts):
            ivs.append(Interval(s, se, t, te))
            s, t = se, te
        return cls(tuple(ivs))

    def cuts(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(iv.src_end for iv in self.intervals), tuple(iv.tgt_end for iv in self.intervals)

    def source_interval(self, i: int) -> int:
        for k, iv in enumerate(self.intervals):
            if iv.src_start <= i < iv.src_end:
                return k
        raise IndexError(i)

    def target_interval(self, j: int) -> int:
        for k, iv in enumerate(self.intervals):
            if iv.tgt_start <= j < iv.tgt_end:
                return k
        raise IndexError(j)


@dataclass
class SerializedPrompt:
    header: str
    tokens: list[str]
    loss_mask: list[bool] = field(default_factory=list)

    @property
    def body(self) -> str:
        return " ".join(self.tokens)

    @property
    def text(self) -> str:
        return f"{self.header} {self.body}" if self.tokens else self.header


# -- alignment segmentation ---------------------------------------------------


def read_pharaoh(line: str) -> frozenset[tuple[int, int]]:
    pairs = set()
    for item in line.split():
        left, sep, right = item.partition("-")
        if not sep:
            raise ValueError(f"bad alignment item {item!r}")
        pairs.add((int(left), int(right)))
    return frozenset(pairs)


def write_pharaoh(alignment: Iterable[tuple[int, int]]) -> str:
    return " ".join(f"{i}-{j}" for i, j in sorted(alignment))


def _need(pair: AlignedSentencePair) -> list[int]:
    """need[b] = source prefix length required before target prefix b can be emitted."""
    latest = [0] * len(pair.target)
    for i, j in pair.alignment:
        latest[j] = max(latest[j], i + 1)
    need = [0]
    for x in latest:
        need.append(max(need[-1], x))
    return need


def _max_intervals(a: int, b: int, need: list[int], n_src: int, n_tgt: int) -> int:
    count = 0
    while b < n_tgt and a < n_src:
        b += 1
        a = max(a + 1, need[b])
        if a > n_src:
            break
        count += 1
    return count


def segment_alignment(pair: AlignedSentencePair) -> PromptPlan:
    """Finest interval partition in which no target word precedes its aligned sources.

    Among partitions with the most intervals, target words are placed as early
    as possible (so unaligned target words join the earliest legal interval)
    and, given that, source spans are kept as short as possible (so unaligned
    source words ride along with the next aligned word).
    """
    n_src, n_tgt = len(pair.source), len(pair.target)
    if n_src == 0 or n_tgt == 0:
        raise DegenerateAlignment("source and target must both be nonempty")
    need = _need(pair)
    k_max = _max_intervals(0, 0, need, n_src, n_tgt)
    src_cuts, tgt_cuts = [], []
    a = b = 0
    for k in range(1, k_max):
        remaining = k_max - k
        for nb in range(n_tgt - 1, b, -1):
            na = max(a + 1, need[nb])
            if na < n_src and _max_intervals(na, nb, need, n_src, n_tgt) >= remaining:
                break
        else:  # pragma: no cover - k_max guarantees a feasible cut
            raise AssertionError("no feasible cut")
        src_cuts.append(na)
        tgt_cuts.append(nb)
        a, b = na, nb
    src_cuts.append(n_src)
    tgt_cuts.append(n_tgt)
    return PromptPlan.from_cuts(src_cuts, tgt_cuts)


def dependency_closed(plan: PromptPlan, alignment: Iterable[tuple[int, int]]) -> bool:
    return all(plan.source_interval(i) <= plan.target_interval(j) for i, j in alignment)


def merge_shift(
    plan: PromptPlan,
    seed: int,
    merge_prob: float = 0.2,
    shift_prob: float = 0.2,
    max_shift: int = 2,
) -> PromptPlan:
    """Randomly merge neighbouring intervals and nudge source-side boundaries.

    The result keeps spans contiguous, ordered and covering, but may break
    dependency closure on purpose.
    """
    rng = random.Random(seed)
    src_cuts, tgt_cuts = (list(c) for c in plan.cuts())

    # merging interval k with k+1 == dropping internal boundary k
    k = 0
    while k < len(src_cuts) - 1:
        if rng.random() < merge_prob:
            del src_cuts[k], tgt_cuts[k]
        else:
            k += 1

    for k in range(len(src_cuts) - 1):
        if rng.random() >= shift_prob or max_shift <= 0:
            continue
        lo = (src_cuts[k - 1] if k else 0) + 1
        hi = src_cuts[k + 1] - 1
        choices = [src_cuts[k] + d for d in range(-max_shift, max_shift + 1) if d and lo <= src_cuts[k] + d <= hi]
        if choices:
            src_cuts[k] = rng.choice(choices)
    return PromptPlan.from_cuts(src_cuts, tgt_cuts)


# -- serialization ------------------------------------------------------------


def build_header(context: Sequence[str], language_pair: str) -> str:
    src, _, tgt = language_pair.partition("-")
    line = f"Now translate the following sentence from {LANGUAGE_NAMES.get(src, src)} to {LANGUAGE_NAMES.get(tgt, tgt)} Assistant:"
    if context:
        return f"{CONTEXT_PREFIX} {' '.join(context)}\n{line}"
    return line


def _words(words: Iterable[str], escape: bool) -> list[str]:
    out = []
    for w in words:
        if _is_escaped_delimiter(w):
            if not escape:
                raise DelimiterCollision(f"word {w!r} collides with a delimiter")
            w = escape_word(w)
        out.append(w)
    return out


def mask_for(tokens: Sequence[str]) -> list[bool]:
    mask = []
    inside = False
    for tok in tokens:
        if tok == END_SRC:
            mask.append(False)
            inside = True
        elif tok == EOS:
            mask.append(inside)
            inside = False
        else:
            mask.append(inside)
    return mask


def serialize_chunks(
    chunks: Sequence[tuple[Sequence[str], Sequence[str] | None]],
    context: Sequence[str],
    language_pair: str,
    escape: bool = True,
) -> SerializedPrompt:
    """Serialize ``(source_words, target_words)`` chunks.

    A target of ``None`` leaves that interval open after ``</t>``; only the
    last chunk may be open.
    """
    tokens: list[str] = []
    for k, (src, tgt) in enumerate(chunks):
        tokens += [BOS, SRC, *_words(src, escape), END_SRC]
        if tgt is None:
            if k != len(chunks) - 1:
                raise MalformedPrompt("only the final interval may be open")
            continue
        tokens += [*_words(tgt, escape), EOS]
    return SerializedPrompt(build_header(context, language_pair), tokens, mask_for(tokens))


def serialize(
    plan: PromptPlan, pair: AlignedSentencePair, language_pair: str = "en-de", escape: bool = True
) -> SerializedPrompt:
    plan.validate(len(pair.source), len(pair.target))
    chunks = [
        (pair.source[iv.src_start : iv.src_end], pair.target[iv.tgt_start : iv.tgt_end]) for iv in plan.intervals
    ]
    return serialize_chunks(chunks, pair.context, language_pair, escape)


@dataclass(frozen=True)
class ParsedInterval:
    source: tuple[str, ...]
    target: tuple[str, ...]
    closed: bool
    start: int  # index of <s>
    end_src: int  # index of </t>
    end: int | None  # index of </s>, None when open


def parse_prompt(tokens: Sequence[str], allow_open: bool = False) -> list[ParsedInterval]:
    """Split prompt tokens back into intervals, unescaping words."""
    out = []
    i, n = 0, len(tokens)
    while i < n:
        start = i
        if tokens[i] != BOS or i + 1 >= n or tokens[i + 1] != SRC:
            raise MalformedPrompt(f"expected '<s> <t>' at token {i}")
        i += 2
        src = []
        while i < n and tokens[i] not in DELIMITERS:
            src.append(unescape_word(tokens[i]))
            i += 1
        if i >= n or tokens[i] != END_SRC:
            raise MalformedPrompt(f"expected '</t>' at token {i}")
        end_src = i
        i += 1
        tgt = []
        while i < n and tokens[i] not in DELIMITERS:
            tgt.append(unescape_word(tokens[i]))
            i += 1
        if i >= n:
            if not allow_open or tgt:
                raise MalformedPrompt("prompt ends inside an interval (missing '</s>')")
            out.append(ParsedInterval(tuple(src), (), False, start, end_src, None))
            break
        if tokens[i] != EOS:
            raise MalformedPrompt(f"expected '</s>' at token {i}, got {tokens[i]!r}")
        out.append(ParsedInterval(tuple(src), tuple(tgt), True, start, end_src, i))
        i += 1
    return out


def parse_plan(prompt: SerializedPrompt) -> tuple[PromptPlan, list[str], list[str]]:
    """Recover the plan and the source/target word lists from a closed prompt."""
    ivs = []
    source: list[str] = []
    target: list[str] = []
    for p in parse_prompt(prompt.tokens):
        ivs.append(Interval(len(source), len(source) + len(p.source), len(target), len(target) + len(p.target)))
        source += p.source
        target += p.target
    return PromptPlan(tuple(ivs)), source, target


def loss_positions(prompt: SerializedPrompt) -> list[tuple[int, int]]:
    """Closed token ranges ``(s_k, e_k)`` that carry loss, one per interval."""
    if not prompt.tokens:
        raise MalformedPrompt("empty prompt")
    return [(p.end_src + 1, p.end) for p in parse_prompt(prompt.tokens)]  # type: ignore[misc]
