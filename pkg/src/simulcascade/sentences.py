"""Rule-based sentence splitting over word lists."""

from __future__ import annotations

from typing import Sequence

TERMINALS = frozenset(".!?。！？")
CLOSERS = "\"'”’»)]」』"

ABBREVIATIONS = frozenset(
    {"dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "jr.", "sr.", "vs.", "e.g.", "i.e.", "no.", "fig.", "approx."}
)


def ends_sentence(word: str) -> bool:
    if word.lower() in ABBREVIATIONS:
        return False
    stripped = word.rstrip(CLOSERS)
    return bool(stripped) and stripped[-1] in TERMINALS


def split_sentences(words: Sequence[str]) -> list[tuple[int, int]]:
    """Half-open ``(start, end)`` word spans, one per sentence.

    A sentence ends after any word that is, or ends in, terminal punctuation
    (closing quotes and brackets may trail it). Trailing words without a
    terminator form a final open sentence.

    >>> split_sentences("hello there . how are".split())
    [(0, 3), (3, 5)]
    >>> split_sentences("Dr. Smith spoke".split())
    [(0, 3)]
    """
    spans = []
    start = 0
    for i, w in enumerate(words):
        if ends_sentence(w):
            spans.append((start, i + 1))
            start = i + 1
    if start < len(words):
        spans.append((start, len(words)))
    return spans
