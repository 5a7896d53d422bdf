"""Local-agreement stabilization of incremental ASR hypotheses.

Within a segment, a word is committed once it sits at the same position in
``agreement`` consecutive hypotheses. When the segment closes, its last
hypothesis is committed in full. The transcript of the previous segment,
cut down to its last ``cutoff_words`` words, is handed to the ASR engine as
context for the next segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence


@dataclass(frozen=True)
class HypWord:
    text: str
    end_ms: int


@dataclass(frozen=True)
class CommittedWord:
    text: str
    commit_time_ms: int
    source_end_ms: int
    segment: int = 0


@dataclass(frozen=True)
class StabilizerConfig:
    cutoff_words: int = 8
    agreement: int = 2
    hop_ms: int = 200

    def __post_init__(self) -> None:
        if self.cutoff_words < 0:
            raise ValueError("cutoff_words must be >= 0")
        if self.agreement < 2:
            raise ValueError("agreement must be >= 2")
        if self.hop_ms <= 0:
            raise ValueError("hop_ms must be > 0")


def normalize(text: str) -> str:
    return " ".join(text.split())


def common_prefix_len(hyps: Sequence[Sequence[HypWord]]) -> int:
    n = min(len(h) for h in hyps)
    for i in range(n):
        first = normalize(hyps[0][i].text)
        if any(normalize(h[i].text) != first for h in hyps[1:]):
            return i
    return n


@dataclass
class StableTranscript:
    """Append-only committed words with per-segment boundaries."""

    words: list[CommittedWord] = field(default_factory=list)
    segment_starts: list[int] = field(default_factory=list)

    def texts(self) -> list[str]:
        return [w.text for w in self.words]

    def append(self, word: CommittedWord) -> None:
        if self.words and word.commit_time_ms < self.words[-1].commit_time_ms:
            raise ValueError("commit times must be nondecreasing")
        self.words.append(word)


class Stabilizer:
    def __init__(self, config: StabilizerConfig | None = None):
        self.config = config or StabilizerConfig()
        self.transcript = StableTranscript()
        self.context: list[str] = []
        self.segment = 0
        self._history: list[list[HypWord]] = []
        self._committed: list[str] = []  # committed texts in the open segment
        self._started = False

    def _open(self) -> None:
        if not self._started:
            self.transcript.segment_starts.append(len(self.transcript.words))
            self._started = True

    def _commit(self, words: Sequence[HypWord], now_ms: int) -> list[CommittedWord]:
        self._open()
        out = []
        for w in words:
            cw = CommittedWord(normalize(w.text), now_ms, min(w.end_ms, now_ms), self.segment)
            self.transcript.append(cw)
            self._committed.append(cw.text)
            out.append(cw)
        return out

    def step(self, hypothesis: Sequence[HypWord], now_ms: int) -> list[CommittedWord]:
        """Feed the next hypothesis for the open segment; return newly committed words."""
        hyp = [w for w in hypothesis if normalize(w.text)]
        self._history.append(hyp)
        window = self.config.agreement
        if len(self._history) > window:
            self._history = self._history[-window:]
        if len(self._history) < window or not hyp:
            return []
        agreed = common_prefix_len(self._history)
        done = len(self._committed)
        if agreed <= done:
            return []
        return self._commit(hyp[done:agreed], now_ms)

    def close_segment(self, final: Sequence[HypWord], now_ms: int) -> list[CommittedWord]:
        """Commit the rest of the segment's final hypothesis and roll the context buffer."""
        hyp = [w for w in final if normalize(w.text)]
        new = self._commit(hyp[len(self._committed):], now_ms) if len(hyp) > len(self._committed) else []
        if self._committed:
            cutoff = self.config.cutoff_words
            self.context = self._committed[-cutoff:] if cutoff else []
        self._history = []
        self._committed = []
        self._started = False
        self.segment += 1
        return new

    def context_for_next_call(self) -> list[str]:
        return list(self.context)
