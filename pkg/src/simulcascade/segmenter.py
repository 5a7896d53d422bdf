"""Voice-probability segmenter.

A segment is cut when either the run of frames scored below the voice
probability threshold grows longer than the maximum unvoiced duration, or
when adding another frame would take the segment past the maximum segment
duration. Silent audio stays inside the segments; nothing is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .core import AudioTimeline, Frame


class CutReason(str, Enum):
    MAX_DURATION = "MaxDuration"
    UNVOICED_RUN = "UnvoicedRun"
    END_OF_STREAM = "EndOfStream"


@dataclass(frozen=True)
class SegmenterConfig:
    max_unvoiced_ms: int = 100
    voice_prob_threshold: float = 0.5
    max_segment_ms: int = 500

    def __post_init__(self) -> None:
        if self.max_unvoiced_ms < 0:
            raise ValueError("max_unvoiced_ms must be >= 0")
        if self.max_segment_ms <= 0:
            raise ValueError("max_segment_ms must be > 0")
        if not 0.0 <= self.voice_prob_threshold <= 1.0:
            raise ValueError("voice_prob_threshold must be in [0, 1]")


@dataclass(frozen=True)
class SpeechSegment:
    index: int
    start_ms: int
    end_ms: int
    cut_reason: CutReason

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "cut_reason": self.cut_reason.value,
        }


class Segmenter:
    """Streaming state machine; feed frames in timeline order."""

    def __init__(self, config: SegmenterConfig):
        self.config = config
        self.seg_start = 0
        self.clock = 0
        self.unvoiced_ms = 0
        self.next_index = 0

    @property
    def open_ms(self) -> int:
        return self.clock - self.seg_start

    def _cut(self, reason: CutReason) -> SpeechSegment:
        seg = SpeechSegment(self.next_index, self.seg_start, self.clock, reason)
        self.next_index += 1
        self.seg_start = self.clock
        self.unvoiced_ms = 0
        return seg

    def push_frame(self, duration_ms: int, voice_prob: float) -> list[SpeechSegment]:
        """Advance by one frame and return the segments it closes (usually none or one).

        Two segments come back only in the corner case where a duration cut
        is followed by a single frame longer than ``max_unvoiced_ms``.
        """
        cfg = self.config
        if duration_ms > cfg.max_segment_ms:
            raise ValueError(f"frame of {duration_ms} ms cannot fit in max_segment_ms={cfg.max_segment_ms}")
        closed = []
        if self.open_ms + duration_ms > cfg.max_segment_ms:
            closed.append(self._cut(CutReason.MAX_DURATION))

        self.clock += duration_ms
        # a probability equal to the threshold counts as voiced
        if voice_prob < cfg.voice_prob_threshold:
            self.unvoiced_ms += duration_ms
        else:
            self.unvoiced_ms = 0

        if self.unvoiced_ms > cfg.max_unvoiced_ms:
            closed.append(self._cut(CutReason.UNVOICED_RUN))
        elif self.open_ms == cfg.max_segment_ms:
            closed.append(self._cut(CutReason.MAX_DURATION))
        return closed

    def flush(self) -> SpeechSegment | None:
        if self.open_ms == 0:
            return None
        return self._cut(CutReason.END_OF_STREAM)


def segment_timeline(timeline: AudioTimeline | Iterable[Frame], config: SegmenterConfig) -> list[SpeechSegment]:
    seg = Segmenter(config)
    out: list[SpeechSegment] = []
    for frame in timeline:
        out.extend(seg.push_frame(frame.duration_ms, frame.voice_prob))
    last = seg.flush()
    if last is not None:
        out.append(last)
    return out
