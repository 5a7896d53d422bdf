"""Shared domain types, the event-log schema and log replay.

Every timestamp in this package is an integer number of milliseconds on the
source-audio clock. Model compute time never advances that clock.

Event log lines look like::

    {"time_ms": 480, "kind": "TranslationEmitted", "payload": {...}}

Payload keys are written in the fixed order given by ``PAYLOAD_KEYS`` so that
logs are byte-stable across runs and platforms.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

DEFAULT_FRAME_MS = 20


class SchemaError(ValueError):
    """A log record or input file does not match its documented schema."""


class OrderError(ValueError):
    """Timestamps in an event log go backwards."""


# -- audio timeline ---------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    start_ms: int
    duration_ms: int
    voice_prob: float

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.duration_ms


@dataclass(frozen=True)
class AudioTimeline:
    """Contiguous frames with per-frame voice probabilities."""

    frames: tuple[Frame, ...]

    def __post_init__(self) -> None:
        expected = 0
        for i, fr in enumerate(self.frames):
            if fr.start_ms != expected:
                raise SchemaError(
                    f"frame {i}: start_ms={fr.start_ms}, expected {expected} (frames must be contiguous)"
                )
            if fr.duration_ms <= 0:
                raise SchemaError(f"frame {i}: duration_ms must be positive")
            if not 0.0 <= fr.voice_prob <= 1.0:
                raise SchemaError(f"frame {i}: voice_prob {fr.voice_prob} outside [0, 1]")
            expected = fr.end_ms

    @property
    def total_duration_ms(self) -> int:
        return self.frames[-1].end_ms if self.frames else 0

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    @classmethod
    def from_probs(cls, probs: Iterable[float], frame_ms: int = DEFAULT_FRAME_MS) -> "AudioTimeline":
        frames = tuple(Frame(i * frame_ms, frame_ms, float(p)) for i, p in enumerate(probs))
        return cls(frames)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"start_ms": f.start_ms, "duration_ms": f.duration_ms, "voice_prob": f.voice_prob}) + "\n"
            for f in self.frames
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "AudioTimeline":
        frames = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                frames.append(Frame(int(rec["start_ms"]), int(rec["duration_ms"]), float(rec["voice_prob"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaError(f"timeline line {lineno}: {exc}") from exc
        return cls(tuple(frames))

    @classmethod
    def load(cls, path: str | Path) -> "AudioTimeline":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


# -- latency regimes ----------------------------------------------------------

REGIME_THRESHOLDS_MS: dict[tuple[str, str], int] = {
    ("en-de", "low"): 2000,
    ("en-de", "high"): 4000,
    ("en-zh", "low"): 2500,
    ("en-zh", "high"): 4000,
}

LANGUAGE_PAIRS = ("en-de", "en-zh")
LANGUAGE_NAMES = {"en": "English", "de": "German", "zh": "Chinese"}


@dataclass(frozen=True)
class LatencyRegimeConfig:
    language_pair: str
    regime: str
    threshold_ms: int

    @classmethod
    def for_pair(cls, language_pair: str, regime: str) -> "LatencyRegimeConfig":
        try:
            return cls(language_pair, regime, REGIME_THRESHOLDS_MS[(language_pair, regime)])
        except KeyError:
            raise ValueError(f"unknown latency regime {language_pair}/{regime}") from None


def latency_unit(language_pair: str) -> str:
    """Scoring unit for a pair: Chinese output is scored per character."""
    return "char" if language_pair.endswith("-zh") else "word"


# -- pipeline events --------------------------------------------------------

SEGMENT_CLOSED = "SegmentClosed"
HYPOTHESIS_EMITTED = "HypothesisEmitted"
STABLE_COMMIT = "StableCommit"
TRANSLATION_EMITTED = "TranslationEmitted"
SENTENCE_COMPLETED = "SentenceCompleted"

PAYLOAD_KEYS: dict[str, tuple[str, ...]] = {
    SEGMENT_CLOSED: ("index", "start_ms", "end_ms", "cut_reason"),
    HYPOTHESIS_EMITTED: ("segment", "interval_start_ms", "interval_end_ms", "words"),
    STABLE_COMMIT: ("segment", "words"),
    TRANSLATION_EMITTED: ("text", "emit_time_ms", "source_ms", "sentence"),
    SENTENCE_COMPLETED: ("sentence", "source", "translation"),
}
EVENT_KINDS = tuple(PAYLOAD_KEYS)


@dataclass(frozen=True)
class PipelineEvent:
    time_ms: int
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        keys = PAYLOAD_KEYS[self.kind]
        return {"time_ms": self.time_ms, "kind": self.kind, "payload": {k: self.payload[k] for k in keys}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, rec: Any) -> "PipelineEvent":
        if not isinstance(rec, dict) or set(rec) != {"time_ms", "kind", "payload"}:
            raise SchemaError(f"event must have exactly time_ms, kind, payload: {rec!r}")
        time_ms, kind, payload = rec["time_ms"], rec["kind"], rec["payload"]
        if not isinstance(time_ms, int) or isinstance(time_ms, bool):
            raise SchemaError(f"time_ms must be an integer: {time_ms!r}")
        if kind not in PAYLOAD_KEYS:
            raise SchemaError(f"unknown event kind {kind!r}")
        if not isinstance(payload, dict) or set(payload) != set(PAYLOAD_KEYS[kind]):
            raise SchemaError(f"{kind} payload must have keys {PAYLOAD_KEYS[kind]}: {payload!r}")
        if kind == TRANSLATION_EMITTED:
            if not isinstance(payload["text"], str):
                raise SchemaError("TranslationEmitted.text must be a string")
            for key in ("emit_time_ms", "source_ms", "sentence"):
                if not isinstance(payload[key], int):
                    raise SchemaError(f"TranslationEmitted.{key} must be an integer")
        return cls(time_ms, kind, dict(payload))


def dump_events(events: Iterable[PipelineEvent]) -> str:
    return "".join(ev.to_json() + "\n" for ev in events)


def parse_events(text: str) -> list[PipelineEvent]:
    events = []
    for lineno, line in enumerate(io.StringIO(text), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
        try:
            events.append(PipelineEvent.from_dict(rec))
        except SchemaError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
    return events


# -- emission logs ----------------------------------------------------------


@dataclass(frozen=True)
class Emission:
    text: str
    emit_time_ms: int
    source_ms: int = 0
    sentence: int = 0


@dataclass(frozen=True)
class ReferenceSentence:
    """A reference translation pinned to its interval in the source audio."""

    start_ms: int
    end_ms: int
    reference: str
    source: str = ""

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class SentenceAlignment:
    start_ms: int
    end_ms: int
    reference: str
    token_start: int
    token_end: int


@dataclass
class EmissionLog:
    """Output tokens with emission times, plus the events they came from."""

    tokens: list[Emission] = field(default_factory=list)
    source_duration_ms: int = 0
    events: list[PipelineEvent] = field(default_factory=list)
    sentences: list[SentenceAlignment] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def to_jsonl(self) -> str:
        return dump_events(self.events)

    def translation(self, joiner: str = " ") -> str:
        return joiner.join(t.text for t in self.tokens)


def replay_log(events: Sequence[PipelineEvent | dict]) -> EmissionLog:
    """Validate an event sequence and collect its emitted tokens.

    Raises SchemaError for malformed records and OrderError when time_ms
    decreases anywhere in the sequence.
    """
    parsed: list[PipelineEvent] = []
    for i, ev in enumerate(events):
        if not isinstance(ev, PipelineEvent):
            try:
                ev = PipelineEvent.from_dict(ev)
            except SchemaError as exc:
                raise SchemaError(f"event {i}: {exc}") from exc
        elif ev.kind not in PAYLOAD_KEYS:
            raise SchemaError(f"event {i}: unknown kind {ev.kind!r}")
        if parsed and ev.time_ms < parsed[-1].time_ms:
            raise OrderError(f"event {i} at {ev.time_ms} ms follows an event at {parsed[-1].time_ms} ms")
        parsed.append(ev)

    tokens = []
    duration = 0
    for ev in parsed:
        if ev.kind == TRANSLATION_EMITTED:
            p = ev.payload
            if tokens and p["emit_time_ms"] < tokens[-1].emit_time_ms:
                raise OrderError(f"token {p['text']!r} emitted at {p['emit_time_ms']} ms goes back in time")
            tokens.append(Emission(p["text"], p["emit_time_ms"], p["source_ms"], p["sentence"]))
        elif ev.kind == SEGMENT_CLOSED:
            duration = max(duration, int(ev.payload["end_ms"]))
    return EmissionLog(tokens=tokens, source_duration_ms=duration, events=list(parsed))


def attach_references(log: EmissionLog, references: Sequence[ReferenceSentence]) -> EmissionLog:
    """Align output tokens to reference sentences by source time.

    Each token goes to the last reference sentence starting at or before the
    source time it was produced from. Token source times are nondecreasing, so
    the resulting ranges are contiguous and partition the output.
    """
    if not references:
        raise ValueError("at least one reference sentence is required")
    starts = [r.start_ms for r in references]
    owner = []
    for tok in log.tokens:
        k = 0
        while k + 1 < len(starts) and starts[k + 1] <= tok.source_ms:
            k += 1
        if owner and k < owner[-1]:
            k = owner[-1]
        owner.append(k)
    sentences = []
    pos = 0
    for k, ref in enumerate(references):
        end = pos
        while end < len(owner) and owner[end] == k:
            end += 1
        sentences.append(SentenceAlignment(ref.start_ms, ref.end_ms, ref.reference, pos, end))
        pos = end
    return EmissionLog(
        tokens=list(log.tokens),
        source_duration_ms=log.source_duration_ms,
        events=list(log.events),
        sentences=sentences,
    )


def load_references(path: str | Path) -> list[ReferenceSentence]:
    refs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            refs.append(
                ReferenceSentence(int(rec["start_ms"]), int(rec["end_ms"]), rec["reference"], rec.get("source", ""))
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return refs


def dump_references(refs: Iterable[ReferenceSentence]) -> str:
    return "".join(
        json.dumps(
            {"start_ms": r.start_ms, "end_ms": r.end_ms, "source": r.source, "reference": r.reference},
            ensure_ascii=False,
        )
        + "\n"
        for r in refs
    )
