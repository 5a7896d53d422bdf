"""Single-threaded scheduler: segmenter -> stabilizer -> agent, on the audio clock."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, TypeVar

from .agent import SimulAgent
from .config import PipelineConfig
from .core import (
    HYPOTHESIS_EMITTED,
    SEGMENT_CLOSED,
    STABLE_COMMIT,
    AudioTimeline,
    EmissionLog,
    PipelineEvent,
    replay_log,
)
from .engines import AsrEngine, TranslationEngine
from .segmenter import Segmenter, SpeechSegment
from .stabilizer import CommittedWord, HypWord, Stabilizer

T = TypeVar("T")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, time_ms: int, cause: BaseException):
        self.stage = stage
        self.time_ms = time_ms
        super().__init__(f"{stage} failed at {time_ms} ms: {cause}")


@dataclass
class Engines:
    asr: AsrEngine
    translator: TranslationEngine


class _Run:
    def __init__(self, config: PipelineConfig, engines: Engines):
        self.config = config
        self.asr = engines.asr
        self.segmenter = Segmenter(config.segmenter)
        self.stabilizer = Stabilizer(config.stabilizer)
        self.agent = SimulAgent(engines.translator, config.agent)
        self.events: list[PipelineEvent] = []
        self.last_hyp_ms = 0

    def guard(self, stage: str, now: int, fn: Callable[[], T]) -> T:
        try:
            return fn()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(stage, now, exc) from exc

    def hypothesis(self, start: int, now: int, final: bool) -> list[HypWord]:
        context = self.stabilizer.context_for_next_call()
        hyp = self.guard("asr", now, lambda: list(self.asr.transcribe(start, now, context, final=final)))
        if hyp:
            self.events.append(
                PipelineEvent(
                    now,
                    HYPOTHESIS_EMITTED,
                    {
                        "segment": self.stabilizer.segment,
                        "interval_start_ms": start,
                        "interval_end_ms": now,
                        "words": [w.text for w in hyp],
                    },
                )
            )
        return hyp

    def commit(self, words: list[CommittedWord], now: int) -> None:
        if not words:
            return
        self.events.append(
            PipelineEvent(
                now,
                STABLE_COMMIT,
                {
                    "segment": words[0].segment,
                    "words": [{"text": w.text, "source_end_ms": w.source_end_ms} for w in words],
                },
            )
        )
        self.guard("agent", now, lambda: self.agent.ingest(words, now))
        self.events.extend(self.agent.pop_events())

    def close(self, seg: SpeechSegment) -> None:
        now = seg.end_ms
        self.events.append(PipelineEvent(now, SEGMENT_CLOSED, seg.to_dict()))
        final = self.hypothesis(seg.start_ms, now, final=True)
        committed = self.guard("stabilizer", now, lambda: self.stabilizer.close_segment(final, now))
        self.commit(committed, now)
        self.last_hyp_ms = now

    def run(self, timeline: AudioTimeline) -> list[PipelineEvent]:
        hop = self.config.stabilizer.hop_ms
        for frame in timeline:
            now = frame.end_ms
            for seg in self.guard("segmenter", now, lambda: self.segmenter.push_frame(frame.duration_ms, frame.voice_prob)):
                self.close(seg)
            if self.segmenter.open_ms > 0 and now - self.last_hyp_ms >= hop:
                hyp = self.hypothesis(self.segmenter.seg_start, now, final=False)
                self.commit(self.guard("stabilizer", now, lambda: self.stabilizer.step(hyp, now)), now)
                self.last_hyp_ms = now
        end = timeline.total_duration_ms
        last = self.segmenter.flush()
        if last is not None:
            self.close(last)
        self.guard("agent", end, lambda: self.agent.finish(end))
        self.events.extend(self.agent.pop_events())
        return self.events


def run_pipeline(timeline: AudioTimeline, config: PipelineConfig, engines: Engines) -> EmissionLog:
    """Run the full cascade over a timeline and return the validated emission log.

    The result depends only on (timeline, config, engines); stateful reference
    engines are reset before the run.
    """
    for engine in (engines.asr, engines.translator):
        reset = getattr(engine, "reset", None)
        if callable(reset):
            reset()
    run = _Run(config, engines)
    log = replay_log(run.run(timeline))
    log.source_duration_ms = timeline.total_duration_ms
    return log
