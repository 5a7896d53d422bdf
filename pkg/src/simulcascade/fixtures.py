"""Self-contained scenario bundles for runs, evaluation and regression tests.

A scenario directory holds::

    scenario.json      name, language pair, ASR revision rate
    timeline.jsonl     one frame per line: start_ms, duration_ms, voice_prob
    transcript.jsonl   ground-truth words with start_ms/end_ms (drives the reference ASR)
    references.jsonl   one reference sentence per line with its source interval
    lexicon.json       word map for the dictionary translation engine
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    DEFAULT_FRAME_MS,
    AudioTimeline,
    Frame,
    ReferenceSentence,
    dump_references,
    load_references,
)
from .engines import (
    DictionaryEngine,
    IdentityEngine,
    TimedWord,
    TranscriptAsrEngine,
    dump_transcript,
    load_transcript,
    make_translation_engine,
)
from .pipeline import Engines


class UnknownFixture(KeyError):
    pass


@dataclass
class Scenario:
    name: str
    language_pair: str
    timeline: AudioTimeline
    transcript: list[TimedWord]
    references: list[ReferenceSentence]
    lexicon: dict[str, str] = field(default_factory=dict)
    revision_prob: float = 0.0

    @property
    def target_lang(self) -> str:
        return self.language_pair.split("-")[1]

    def engines(self, translator: str = "dict", seed: int = 0) -> Engines:
        asr = TranscriptAsrEngine(self.transcript, self.revision_prob, seed)
        if translator == "identity":
            engine = IdentityEngine()
        elif translator == "dict":
            engine = DictionaryEngine(self.lexicon, target_lang=self.target_lang)
        else:
            engine = make_translation_engine(translator, self.target_lang)
        return Engines(asr, engine)

    def write(self, directory: str | Path) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        meta = {"name": self.name, "language_pair": self.language_pair, "revision_prob": self.revision_prob}
        (out / "scenario.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        (out / "timeline.jsonl").write_text(self.timeline.to_jsonl(), encoding="utf-8")
        (out / "transcript.jsonl").write_text(dump_transcript(self.transcript), encoding="utf-8")
        (out / "references.jsonl").write_text(dump_references(self.references), encoding="utf-8")
        (out / "lexicon.json").write_text(
            json.dumps(self.lexicon, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8"
        )
        return out

    @classmethod
    def load(cls, directory: str | Path) -> "Scenario":
        src = Path(directory)
        meta = json.loads((src / "scenario.json").read_text(encoding="utf-8"))
        lexicon_path = src / "lexicon.json"
        return cls(
            name=meta["name"],
            language_pair=meta["language_pair"],
            timeline=AudioTimeline.load(src / "timeline.jsonl"),
            transcript=load_transcript(src / "transcript.jsonl"),
            references=load_references(src / "references.jsonl"),
            lexicon=json.loads(lexicon_path.read_text(encoding="utf-8")) if lexicon_path.exists() else {},
            revision_prob=float(meta.get("revision_prob", 0.0)),
        )


def _round(ms: float, frame_ms: int) -> int:
    return int(round(ms / frame_ms)) * frame_ms


def speak(
    sentences: list[tuple[str, str]],
    total_ms: int,
    lead_ms: int = 400,
    gap_ms: int = 60,
    pause_ms: int = 600,
    frame_ms: int = DEFAULT_FRAME_MS,
    seed: int = 0,
) -> tuple[AudioTimeline, list[TimedWord], list[ReferenceSentence]]:
    """Lay sentences out on a timeline with word durations that grow with word length.

    Frames inside words score high, short gaps between words sit just under
    0.5, and pauses between sentences are near zero.
    """
    rng = random.Random(seed)
    words: list[TimedWord] = []
    refs: list[ReferenceSentence] = []
    t = lead_ms
    for k, (source, reference) in enumerate(sentences):
        if k:
            t += pause_ms - gap_ms
        first = len(words)
        for w in source.split():
            dur = _round(100 + 30 * len(w), frame_ms)
            words.append(TimedWord(w, t, t + dur))
            t += dur + gap_ms
        refs.append(ReferenceSentence(words[first].start_ms, words[-1].end_ms, reference, source))
    if t > total_ms:
        raise ValueError(f"sentences need {t} ms but the scenario is {total_ms} ms long")

    frames = []
    wi = 0
    for start in range(0, total_ms, frame_ms):
        while wi < len(words) and words[wi].end_ms <= start:
            wi += 1
        in_word = wi < len(words) and words[wi].start_ms <= start
        in_sentence = any(r.start_ms <= start < r.end_ms for r in refs)
        if in_word:
            p = 0.8 + 0.19 * rng.random()
        elif in_sentence:
            p = 0.35 + 0.1 * rng.random()
        else:
            p = 0.05 * rng.random()
        frames.append(Frame(start, frame_ms, round(p, 3)))
    return AudioTimeline(tuple(frames)), words, refs


def _greetings() -> Scenario:
    timeline, words, refs = speak(
        [
            (
                "Hello everyone, and welcome to our conference on speech translation.",
                "Hallo zusammen, und willkommen zu unserer Konferenz über Sprachübersetzung.",
            ),
            (
                "Today we will show how machines translate while people are still speaking.",
                "Heute zeigen wir, wie Maschinen übersetzen, während Menschen noch sprechen.",
            ),
        ],
        total_ms=10_000,
        seed=11,
    )
    lexicon = {
        "hello": "Hallo", "everyone": "zusammen", "and": "und", "welcome": "willkommen", "to": "zu",
        "our": "unserer", "conference": "Konferenz", "on": "über", "speech": "Sprach",
        "translation": "Übersetzung", "today": "Heute", "we": "wir", "will": "werden", "show": "zeigen",
        "how": "wie", "machines": "Maschinen", "translate": "übersetzen", "while": "während",
        "people": "Menschen", "are": "sind", "still": "noch", "speaking": "sprechen",
    }  # fmt: skip
    return Scenario("greetings", "en-de", timeline, words, refs, lexicon, revision_prob=0.3)


def _lecture() -> Scenario:
    timeline, words, refs = speak(
        [
            ("Good morning and thank you all for coming.", "Guten Morgen und vielen Dank an alle fürs Kommen."),
            (
                "Our system listens, transcribes and translates in real time.",
                "Unser System hört zu, transkribiert und übersetzt in Echtzeit.",
            ),
            ("Dr. Smith will answer your questions at the end.", "Dr. Smith wird Ihre Fragen am Ende beantworten."),
        ],
        total_ms=14_000,
        seed=23,
    )
    lexicon = {
        "good": "Guten", "morning": "Morgen", "and": "und", "thank": "Dank", "you": "Ihnen", "all": "alle",
        "for": "fürs", "coming": "Kommen", "our": "Unser", "system": "System", "listens": "hört",
        "transcribes": "transkribiert", "translates": "übersetzt", "in": "in", "real": "Echt", "time": "zeit",
        "dr.": "Dr.", "smith": "Smith", "will": "wird", "answer": "beantworten", "your": "Ihre",
        "questions": "Fragen", "at": "am", "the": "das", "end": "Ende",
    }  # fmt: skip
    return Scenario("lecture", "en-de", timeline, words, refs, lexicon, revision_prob=0.2)


def _greetings_zh() -> Scenario:
    timeline, words, refs = speak(
        [
            ("Hello everyone, welcome to the conference.", "大家好，欢迎参加会议。"),
            ("Today we talk about translation.", "今天我们谈谈翻译。"),
        ],
        total_ms=7_000,
        seed=5,
    )
    lexicon = {
        "hello": "你好", "everyone": "大家", "welcome": "欢迎", "to": "参加", "the": "这个",
        "conference": "会议", "today": "今天", "we": "我们", "talk": "谈谈", "about": "关于",
        "translation": "翻译",
    }  # fmt: skip
    return Scenario("greetings-zh", "en-zh", timeline, words, refs, lexicon, revision_prob=0.2)


def _silence() -> Scenario:
    timeline = AudioTimeline.from_probs([0.0] * 250)
    return Scenario("silence", "en-de", timeline, [], [ReferenceSentence(0, timeline.total_duration_ms, "")])


FIXTURES = {
    "greetings": _greetings,
    "lecture": _lecture,
    "greetings-zh": _greetings_zh,
    "silence": _silence,
}


def make_fixture(name: str, directory: str | Path | None = None) -> Scenario:
    """Build a registered scenario; write it to ``directory`` when given."""
    try:
        scenario = FIXTURES[name]()
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r}; available: {', '.join(sorted(FIXTURES))}") from None
    if directory is not None:
        scenario.write(directory)
    return scenario
