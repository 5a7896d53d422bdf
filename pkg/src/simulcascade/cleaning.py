"""Four-step cleaning of subtitle-style parallel corpora.

1. length: source and context must both have at least 25 characters
2. noise: drop ``...``, brackets, parentheses and all-caps lines
3. script (en-zh only): drop targets containing Latin-alphabet words
4. quality: drop pairs scoring below the quality-estimation threshold

``"- "`` dialogue dashes are normalized to a single space up front, so a
second pass over cleaned output keeps everything.
"""

from __future__ import annotations

import csv
import io
import json
import re
import subprocess
from collections import Counter
from dataclasses import asdict, dataclass, replace
from typing import Callable, Iterable, Protocol, Sequence

MIN_CHARS = 25
NOISE_MARKERS = ("...", "[", "]", "(", ")")
LATIN_RUN = re.compile(r"[A-Za-zÀ-ɏ]{2,}")
WORD_RE = re.compile(r"\w+", re.UNICODE)
CJK_RE = re.compile(r"[㐀-鿿豈-﫿]")

STEPS = ("length", "noise", "script", "quality", "scorer_failure")


class ScorerFailure(RuntimeError):
    pass


class QualityScorer(Protocol):
    def score(self, source: str, target: str) -> float: ...


@dataclass(frozen=True)
class CorpusSample:
    source: str
    target: str
    context: str = ""
    language_pair: str = "en-de"


@dataclass
class CleanReport:
    kept: list[CorpusSample]
    dropped: Counter

    def counts(self) -> dict[str, int]:
        return {step: self.dropped.get(step, 0) for step in STEPS}


def normalize_dashes(text: str) -> str:
    while "- " in text:
        text = text.replace("- ", " ")
    return text


def is_all_caps(text: str) -> bool:
    """True when the text has cased letters and every one of them is uppercase."""
    return text.isupper()


def detect_latin_words(text: str) -> bool:
    """True iff the text holds a run of two or more consecutive Latin letters."""
    return LATIN_RUN.search(text) is not None


def _tokens(text: str) -> list[str]:
    out = []
    for w in WORD_RE.findall(text.lower()):
        out.extend(CJK_RE.findall(w) if CJK_RE.search(w) else [w])
    return out


class LexicalScorer:
    """Dice overlap of token sets, after mapping source tokens through an optional lexicon."""

    def __init__(self, lexicon: dict[str, str] | None = None):
        self.lexicon = {k.lower(): v.lower() for k, v in (lexicon or {}).items()}

    def score(self, source: str, target: str) -> float:
        src = {self.lexicon.get(t, t) for t in _tokens(source)}
        tgt = set(_tokens(target))
        if not src or not tgt:
            return 0.0
        return 2 * len(src & tgt) / (len(src) + len(tgt))


class ExternalScorer:
    """Runs a command per pair: JSON ``{"source", "target"}`` on stdin, a float on stdout."""

    def __init__(self, command: str, timeout: float = 30.0):
        self.command = command
        self.timeout = timeout

    def score(self, source: str, target: str) -> float:
        payload = json.dumps({"source": source, "target": target}, ensure_ascii=False)
        try:
            proc = subprocess.run(
                self.command, shell=True, input=payload, capture_output=True, text=True, timeout=self.timeout
            )
            if proc.returncode != 0:
                raise ScorerFailure(f"scorer exited with {proc.returncode}: {proc.stderr.strip()}")
            return float(proc.stdout.strip())
        except (ValueError, subprocess.SubprocessError) as exc:
            raise ScorerFailure(str(exc)) from exc


class FunctionScorer:
    def __init__(self, fn: Callable[[str, str], float]):
        self.fn = fn

    def score(self, source: str, target: str) -> float:
        return self.fn(source, target)


def _drop_step(sample: CorpusSample) -> str | None:
    if len(sample.source) < MIN_CHARS or len(sample.context) < MIN_CHARS:
        return "length"
    for text in (sample.source, sample.target):
        if any(m in text for m in NOISE_MARKERS) or is_all_caps(text):
            return "noise"
    if sample.language_pair == "en-zh" and detect_latin_words(sample.target):
        return "script"
    return None


def clean(samples: Iterable[CorpusSample], scorer: QualityScorer, threshold: float = 0.6) -> CleanReport:
    """Run the four steps in order; input order is preserved among kept samples."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    kept = []
    dropped: Counter = Counter()
    for sample in samples:
        sample = replace(
            sample,
            source=normalize_dashes(sample.source),
            target=normalize_dashes(sample.target),
            context=normalize_dashes(sample.context),
        )
        step = _drop_step(sample)
        if step is None:
            try:
                value = float(scorer.score(sample.source, sample.target))
                if not 0.0 <= value <= 1.0:  # also catches NaN
                    raise ScorerFailure(f"score {value!r} outside [0, 1]")
            except Exception:
                step = "scorer_failure"
            else:
                if value < threshold:
                    step = "quality"
        if step:
            dropped[step] += 1
        else:
            kept.append(sample)
    return CleanReport(kept, dropped)


# -- corpus I/O -----------------------------------------------------------------


def read_corpus(text: str, language_pair: str, fmt: str = "auto") -> list[CorpusSample]:
    """Parse JSON-lines (``source``/``target``/``context``) or TSV (``source<TAB>target<TAB>context``)."""
    lines = [line for line in text.splitlines() if line.strip()]
    if fmt == "auto":
        fmt = "jsonl" if lines and lines[0].lstrip().startswith("{") else "tsv"
    out = []
    if fmt == "jsonl":
        for line in lines:
            rec = json.loads(line)
            out.append(
                CorpusSample(rec["source"], rec["target"], rec.get("context", ""), rec.get("language_pair", language_pair))
            )
    else:
        for row in csv.reader(lines, delimiter="\t", quoting=csv.QUOTE_NONE):
            out.append(CorpusSample(row[0], row[1] if len(row) > 1 else "", row[2] if len(row) > 2 else "", language_pair))
    return out


def write_corpus(samples: Sequence[CorpusSample], fmt: str = "jsonl") -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(asdict(s), ensure_ascii=False) + "\n" for s in samples)
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", quoting=csv.QUOTE_NONE, escapechar="\\", lineterminator="\n")
    for s in samples:
        writer.writerow([s.source, s.target, s.context])
    return buf.getvalue()
