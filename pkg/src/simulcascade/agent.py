"""Simultaneous translation agent driven by committed transcript words.

The agent keeps committed words in a buffer, splits the buffer into
sentences and translates the oldest sentence chunk by chunk. A translation
action fires when the oldest sentence holds at least ``min_chunk_words``
untranslated words, or as soon as a second sentence has started. When the
oldest sentence is fully translated and a later one exists, it is dropped
from the buffer and cached as the single-sentence memory bank that the next
prompt uses as context.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .core import SENTENCE_COMPLETED, TRANSLATION_EMITTED, PipelineEvent
from .engines import TranslationEngine
from .prompts import EOS, SerializedPrompt, serialize_chunks
from .sentences import split_sentences
from .stabilizer import CommittedWord

log = logging.getLogger(__name__)

CHUNK, BOUNDARY, FLUSH = "chunk", "boundary", "flush"


class EmptyChunk(RuntimeError):
    """A translation action was requested with nothing left to translate."""


@dataclass(frozen=True)
class AgentConfig:
    min_chunk_words: int = 3
    language_pair: str = "en-de"
    strict_trigger: bool = False
    memory: str = "source"
    max_new_tokens: int = 64

    def __post_init__(self) -> None:
        if self.min_chunk_words < 1:
            raise ValueError("min_chunk_words must be >= 1")
        if self.memory not in ("source", "target"):
            raise ValueError("memory must be 'source' or 'target'")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


@dataclass
class BufferedWord:
    text: str
    source_end_ms: int
    translated: bool = False


@dataclass(frozen=True)
class Action:
    time_ms: int
    sentence: int
    source: tuple[str, ...]
    output: tuple[str, ...]
    reason: str
    prompt: SerializedPrompt
    truncated: bool = False


@dataclass
class AgentState:
    buffer: list[BufferedWord] = field(default_factory=list)
    running_translation: list[str] = field(default_factory=list)
    memory_bank: list[str] | None = None
    live_chunks: list[tuple[tuple[str, ...], tuple[str, ...]]] = field(default_factory=list)
    sentence_index: int = 0


class SimulAgent:
    def __init__(self, engine: TranslationEngine, config: AgentConfig | None = None):
        self.engine = engine
        self.config = config or AgentConfig()
        self.state = AgentState()
        self.actions: list[Action] = []
        self.events: list[PipelineEvent] = []

    # -- public API -----------------------------------------------------------

    def ingest(self, words: Sequence[CommittedWord], now_ms: int) -> list[Action]:
        """Append committed words and run every translation action they trigger."""
        self.state.buffer.extend(BufferedWord(w.text, w.source_end_ms) for w in words)
        return self._loop(now_ms, flush=False)

    def finish(self, now_ms: int) -> list[Action]:
        """End of stream: translate whatever is left, ignoring the chunk floor."""
        return self._loop(now_ms, flush=True)

    def sentences(self) -> list[tuple[int, int]]:
        return split_sentences([w.text for w in self.state.buffer])

    def untranslated(self) -> list[int]:
        spans = self.sentences()
        if not spans:
            return []
        s, e = spans[0]
        return [k for k in range(s, e) if not self.state.buffer[k].translated]

    def build_incremental_prompt(self) -> SerializedPrompt:
        """Prompt for the untranslated words of the oldest sentence, left open after ``</t>``."""
        idx = self.untranslated()
        if not idx:
            raise EmptyChunk("no untranslated words in the oldest sentence")
        chunk = tuple(self.state.buffer[k].text for k in idx)
        chunks: list = [*self.state.live_chunks, (chunk, None)]
        return serialize_chunks(chunks, self.state.memory_bank or (), self.config.language_pair)

    def complete_sentence(self, now_ms: int) -> PipelineEvent:
        st = self.state
        spans = self.sentences()
        if not spans:
            raise EmptyChunk("buffer is empty")
        s, e = spans[0]
        source = [w.text for w in st.buffer[s:e]]
        translation = [tok for _, out in st.live_chunks for tok in out]
        st.memory_bank = source if self.config.memory == "source" else translation
        del st.buffer[s:e]
        st.live_chunks = []
        ev = PipelineEvent(
            now_ms,
            SENTENCE_COMPLETED,
            {"sentence": st.sentence_index, "source": source, "translation": translation},
        )
        st.sentence_index += 1
        self.events.append(ev)
        return ev

    def pop_events(self) -> list[PipelineEvent]:
        out, self.events = self.events, []
        return out

    # -- internals --------------------------------------------------------------

    def _chunk_ready(self, n: int) -> bool:
        mcs = self.config.min_chunk_words
        return n > mcs if self.config.strict_trigger else n >= mcs

    def _loop(self, now_ms: int, flush: bool) -> list[Action]:
        fired = []
        while True:
            spans = self.sentences()
            if not spans:
                break
            several = len(spans) > 1
            pending = self.untranslated()
            if pending:
                if self._chunk_ready(len(pending)):
                    fired.append(self._translate(now_ms, CHUNK))
                elif several:
                    fired.append(self._translate(now_ms, BOUNDARY))
                elif flush:
                    fired.append(self._translate(now_ms, FLUSH))
                else:
                    break
            elif several or flush:
                self.complete_sentence(now_ms)
            else:
                break
        return fired

    def _translate(self, now_ms: int, reason: str) -> Action:
        st = self.state
        idx = self.untranslated()
        prompt = self.build_incremental_prompt()
        raw = list(self.engine.generate(prompt))
        budget = self.config.max_new_tokens
        head = raw[: budget + 1]
        if EOS in head:
            output, truncated = head[: head.index(EOS)], False
        else:
            output, truncated = raw[:budget], True
            log.warning("engine produced no </s> within %d tokens; closing the interval", budget)

        source = tuple(st.buffer[k].text for k in idx)
        for k in idx:
            st.buffer[k].translated = True
        st.live_chunks.append((source, tuple(output)))
        st.running_translation.extend(output)
        source_ms = max(st.buffer[k].source_end_ms for k in idx)
        for tok in output:
            self.events.append(
                PipelineEvent(
                    now_ms,
                    TRANSLATION_EMITTED,
                    {"text": tok, "emit_time_ms": now_ms, "source_ms": source_ms, "sentence": st.sentence_index},
                )
            )
        action = Action(now_ms, st.sentence_index, source, tuple(output), reason, prompt, truncated)
        self.actions.append(action)
        return action
