"""Latency and quality metrics over emission logs.

Latency is length-adaptive average lagging (LAAL) computed per reference
sentence and averaged across sentences. The sentence split comes from the
timestamp alignment carried in the log instead of an edit-distance
resegmenter, so ``stream_laal`` approximates the published StreamLAAL.
Times are on the source clock; compute time is never added.

BLEU follows the usual corpus definition: clipped n-gram precisions up to
4-grams, geometric mean and brevity penalty. Orders with no hypothesis
n-grams at all are left out of the mean.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .core import Emission, EmissionLog

log = logging.getLogger(__name__)

WORD, CHAR = "word", "char"


class EmptyOutput(ValueError):
    pass


class AlignmentGap(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


def units(text: str, unit: str) -> list[str]:
    if unit == CHAR:
        return [ch for ch in text if not ch.isspace()]
    if unit == WORD:
        return text.split()
    raise ValueError(f"unknown unit {unit!r}")


def expand_units(tokens: Sequence[Emission | tuple[str, int]], unit: str) -> list[int]:
    """Emission time of every output unit; a token's units share its time."""
    times = []
    for tok in tokens:
        text, t = (tok.text, tok.emit_time_ms) if isinstance(tok, Emission) else tok
        times.extend([t] * len(units(text, unit)))
    return times


def laal_from_delays(delays: Sequence[float], source_ms: float, ref_len: int) -> float:
    if not delays:
        raise EmptyOutput("no output units")
    rate = source_ms / max(len(delays), ref_len)
    total = 0.0
    tau = 0
    for i, t in enumerate(delays):
        total += t - i * rate
        tau = i + 1
        if t >= source_ms:
            break
    return total / tau


def laal(tokens: Sequence[Emission | tuple[str, int]], source_ms: float, ref_len: int, unit: str = WORD) -> float:
    """LAAL in ms for one sentence; ``ref_len`` counts reference units."""
    return laal_from_delays(expand_units(tokens, unit), source_ms, ref_len)


@dataclass
class SentenceLatency:
    index: int
    laal_ms: float | None
    output_units: int
    reference_units: int


@dataclass
class LatencyReport:
    stream_laal_ms: float
    sentences: list[SentenceLatency] = field(default_factory=list)
    skipped: int = 0


def stream_laal_report(emissions: EmissionLog, unit: str = WORD) -> LatencyReport:
    if not emissions.sentences:
        raise AlignmentGap("log carries no sentence alignment")
    pos = 0
    for k, s in enumerate(emissions.sentences):
        if s.token_start != pos or s.token_end < s.token_start:
            raise AlignmentGap(f"sentence {k} starts at token {s.token_start}, expected {pos}")
        pos = s.token_end
    if pos != len(emissions.tokens):
        raise AlignmentGap(f"alignment covers {pos} of {len(emissions.tokens)} tokens")

    rows = []
    scores = []
    for k, s in enumerate(emissions.sentences):
        toks = emissions.tokens[s.token_start : s.token_end]
        rebased = [(t.text, t.emit_time_ms - s.start_ms) for t in toks]
        ref_len = len(units(s.reference, unit))
        n_out = len(expand_units(rebased, unit))
        value = None
        if n_out:
            value = laal(rebased, s.end_ms - s.start_ms, ref_len, unit)
            scores.append(value)
        rows.append(SentenceLatency(k, value, n_out, ref_len))
    skipped = sum(r.laal_ms is None for r in rows)
    if skipped:
        log.warning("%d sentence(s) without output were left out of stream_laal", skipped)
    if not scores:
        raise EmptyOutput("no sentence produced output")
    return LatencyReport(sum(scores) / len(scores), rows, skipped)


def stream_laal(emissions: EmissionLog, unit: str = WORD) -> float:
    """Unweighted mean of per-sentence LAAL, times re-based to each sentence start."""
    return stream_laal_report(emissions, unit).stream_laal_ms


# -- BLEU ---------------------------------------------------------------------

_13A_RULES = [
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
]


def tokenize_13a(line: str) -> list[str]:
    """mteval-v13a style tokenization: split off punctuation, keep decimal numbers whole."""
    norm = line.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
    for entity, char in (("&quot;", '"'), ("&amp;", "&"), ("&lt;", "<"), ("&gt;", ">")):
        norm = norm.replace(entity, char)
    norm = f" {norm} "
    for pattern, repl in _13A_RULES:
        norm = pattern.sub(repl, norm)
    return norm.split()


def tokenize_chars(line: str) -> list[str]:
    return [ch for ch in line if not ch.isspace()]


TOKENIZERS = {WORD: tokenize_13a, "13a": tokenize_13a, CHAR: tokenize_chars}


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuResult:
    score: float
    precisions: list[float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: list[int]
    totals: list[int]


def bleu_stats(hyps: Sequence[str], refs: Sequence[str], unit: str = WORD, max_order: int = 4):
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    tok = TOKENIZERS[unit]
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        ht, rt = tok(h), tok(r)
        hyp_len += len(ht)
        ref_len += len(rt)
        for n in range(1, max_order + 1):
            hc, rc = ngrams(ht, n), ngrams(rt, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += max(len(ht) - n + 1, 0)
    return matches, totals, hyp_len, ref_len


def corpus_bleu(
    hyps: Sequence[str], refs: Sequence[str], unit: str = WORD, smooth: str = "none", max_order: int = 4
) -> BleuResult:
    """Corpus BLEU on a 0-100 scale; ``unit`` is ``word`` (13a tokens) or ``char``."""
    matches, totals, hyp_len, ref_len = bleu_stats(hyps, refs, unit, max_order)
    precisions = [0.0] * max_order
    order = sum(1 for t in totals if t > 0)
    if hyp_len == 0 or order == 0:
        return BleuResult(0.0, precisions, 0.0, hyp_len, ref_len, matches, totals)

    inv = 1.0
    for n in range(order):
        if matches[n] > 0:
            precisions[n] = 100.0 * matches[n] / totals[n]
        elif smooth == "exp":
            inv *= 2
            precisions[n] = 100.0 / (inv * totals[n])
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    if min(precisions[:order]) == 0.0:
        return BleuResult(0.0, precisions, bp, hyp_len, ref_len, matches, totals)
    log_mean = sum(math.log(p / 100.0) for p in precisions[:order]) / order
    return BleuResult(100.0 * bp * math.exp(log_mean), precisions, bp, hyp_len, ref_len, matches, totals)


def sentence_outputs(emissions: EmissionLog, unit: str = WORD) -> list[str]:
    """Hypothesis text per aligned sentence (character output is joined without spaces)."""
    joiner = "" if unit == CHAR else " "
    return [
        joiner.join(t.text for t in emissions.tokens[s.token_start : s.token_end]) for s in emissions.sentences
    ]


@dataclass
class MetricReport:
    bleu: float
    stream_laal_ms: float
    unit: str
    latency: LatencyReport | None = None

    def to_dict(self) -> dict:
        return {"bleu": self.bleu, "stream_laal_ms": self.stream_laal_ms, "unit": self.unit}


def evaluate(emissions: EmissionLog, unit: str = WORD) -> MetricReport:
    hyps = sentence_outputs(emissions, unit)
    refs = [s.reference for s in emissions.sentences]
    latency = stream_laal_report(emissions, unit)
    return MetricReport(corpus_bleu(hyps, refs, unit).score, latency.stream_laal_ms, unit, latency)
