"""Engine interfaces and the deterministic reference engines.

Real ASR or LLM backends plug in by implementing the two protocols below.
The reference engines here are model-free so that every pipeline run can be
replayed exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .prompts import EOS, SerializedPrompt, parse_prompt
from .sentences import CLOSERS, TERMINALS, ends_sentence
from .stabilizer import HypWord

class AsrEngine(Protocol):
    def transcribe(
        self, start_ms: int, end_ms: int, context: Sequence[str], final: bool = False
    ) -> list[HypWord]: ...


class TranslationEngine(Protocol):
    def generate(self, prompt: SerializedPrompt) -> list[str]: ...


# -- ASR ----------------------------------------------------------------------


@dataclass(frozen=True)
class TimedWord:
    text: str
    start_ms: int
    end_ms: int

    @property
    def mid_ms(self) -> int:
        return (self.start_ms + self.end_ms) // 2


def load_transcript(path: str | Path) -> list[TimedWord]:
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            words.append(TimedWord(rec["text"], int(rec["start_ms"]), int(rec["end_ms"])))
    return words


def dump_transcript(words: Sequence[TimedWord]) -> str:
    return "".join(
        json.dumps({"text": w.text, "start_ms": w.start_ms, "end_ms": w.end_ms}, ensure_ascii=False) + "\n"
        for w in words
    )


class TranscriptAsrEngine:
    """Transcribes from a time-stamped ground-truth transcript.

    A word belongs to the audio interval that contains its midpoint. Words
    still being spoken at ``end_ms`` come back truncated to the fraction heard
    so far, which naturally makes the tail of each hypothesis unstable. A
    final call (segment closed) returns every owned word in full.

    With ``revision_prob > 0`` the last complete word of a non-final
    hypothesis is occasionally misheard. The choice is seeded by
    ``(seed, start_ms, end_ms)``, so identical calls give identical output.
    """

    def __init__(self, words: Sequence[TimedWord], revision_prob: float = 0.0, seed: int = 0):
        self.words = list(words)
        self.revision_prob = revision_prob
        self.seed = seed

    def transcribe(self, start_ms: int, end_ms: int, context: Sequence[str] = (), final: bool = False) -> list[HypWord]:
        hyp = []
        for w in self.words:
            if not (start_ms <= w.mid_ms < end_ms):
                continue
            if final or w.end_ms <= end_ms:
                hyp.append(HypWord(w.text, min(w.end_ms, end_ms)))
            else:
                heard = (end_ms - w.start_ms) / (w.end_ms - w.start_ms)
                keep = max(1, int(len(w.text) * heard))
                hyp.append(HypWord(w.text[:keep], end_ms))
        if not final and self.revision_prob > 0 and hyp:
            rng = random.Random(f"{self.seed}:{start_ms}:{end_ms}")
            if rng.random() < self.revision_prob:
                last = hyp[-1]
                misheard = last.text[:-1] if len(last.text) > 1 else last.text + "a"
                hyp[-1] = HypWord(misheard, last.end_ms)
        return hyp


class ScriptedAsrEngine:
    """Replays a hypothesis trace of ``{"interval_end_ms", "words", ["ends_ms"]}`` records."""

    def __init__(self, trace: Sequence[Mapping]):
        self.trace = sorted(trace, key=lambda r: r["interval_end_ms"])

    @staticmethod
    def hypothesis(rec: Mapping) -> list[HypWord]:
        ends = rec.get("ends_ms") or [rec["interval_end_ms"]] * len(rec["words"])
        return [HypWord(w, int(e)) for w, e in zip(rec["words"], ends)]

    def transcribe(self, start_ms: int, end_ms: int, context: Sequence[str] = (), final: bool = False) -> list[HypWord]:
        best = None
        for rec in self.trace:
            if start_ms < rec["interval_end_ms"] <= end_ms:
                best = rec
        return self.hypothesis(best) if best else []


# -- translation ----------------------------------------------------------------


def _open_source(prompt: SerializedPrompt) -> tuple[list[str], list[str], int]:
    """(source words of the open interval, all source words so far, target words already emitted)."""
    parsed = parse_prompt(prompt.tokens, allow_open=True)
    if not parsed or parsed[-1].closed:
        raise ValueError("prompt has no open interval")
    all_src = [w for p in parsed for w in p.source]
    done = sum(len(p.target) for p in parsed)
    return list(parsed[-1].source), all_src, done


class IdentityEngine:
    """Copies the open interval's source words."""

    def generate(self, prompt: SerializedPrompt) -> list[str]:
        src, _, _ = _open_source(prompt)
        return [*src, EOS]


ZH_PUNCT = {".": "。", ",": "，", "?": "？", "!": "！", ":": "：", ";": "；"}


class DictionaryEngine:
    """Word-for-word lexicon translation, one output token per source word.

    Trailing punctuation is split off, looked up separately and reattached.
    Unknown words are copied. With ``delay=1`` the newest source word of an
    unfinished sentence is held back until more source arrives; everything
    held is released once the sentence's terminal word shows up.
    """

    def __init__(self, lexicon: Mapping[str, str], delay: int = 0, target_lang: str = "de"):
        for k, v in lexicon.items():
            if not v or any(ch.isspace() for ch in v):
                raise ValueError(f"lexicon value for {k!r} must be a single nonempty token")
        self.lexicon = {k.lower(): v for k, v in lexicon.items()}
        self.delay = delay
        self.punct = dict(ZH_PUNCT) if target_lang == "zh" else {}

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "DictionaryEngine":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), **kwargs)

    def translate_word(self, word: str) -> str:
        core = word.rstrip("".join(TERMINALS) + CLOSERS + ",;:")
        tail = word[len(core):]
        if not core:
            return "".join(self.punct.get(ch, ch) for ch in word)
        out = self.lexicon.get(core.lower(), core)
        return out + "".join(self.punct.get(ch, ch) for ch in tail)

    def generate(self, prompt: SerializedPrompt) -> list[str]:
        _, all_src, done = _open_source(prompt)
        upto = len(all_src)
        if self.delay and all_src and not ends_sentence(all_src[-1]):
            upto = max(done, upto - self.delay)
        return [self.translate_word(w) for w in all_src[done:upto]] + [EOS]


class ScriptedEngine:
    """Replays fixed outputs, one list of tokens per call; ``</s>`` once exhausted."""

    def __init__(self, outputs: Sequence[Sequence[str]]):
        self.outputs = [list(o) for o in outputs]
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedEngine":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([json.loads(line) for line in lines if line.strip()])

    def reset(self) -> None:
        self.calls = 0

    def generate(self, prompt: SerializedPrompt) -> list[str]:
        out = self.outputs[self.calls] if self.calls < len(self.outputs) else []
        self.calls += 1
        return list(out) if out and out[-1] == EOS else [*out, EOS]


def make_translation_engine(spec: str, target_lang: str = "de") -> TranslationEngine:
    """Build an engine from ``identity``, ``dict:<path>[:delay]`` or ``scripted:<path>``."""
    kind, _, arg = spec.partition(":")
    if kind == "identity":
        return IdentityEngine()
    if kind == "dict":
        path, delay = arg, 0
        head, sep, tail = arg.rpartition(":")
        if sep and tail.isdigit():
            path, delay = head, int(tail)
        return DictionaryEngine.from_file(path, delay=delay, target_lang=target_lang)
    if kind == "scripted":
        return ScriptedEngine.from_file(arg)
    raise ValueError(f"unknown engine {spec!r}; expected identity, dict:<path> or scripted:<path>")
