"""Command-line entry point: ``simulcascade <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .agent import AgentConfig, SimulAgent
from .cleaning import ExternalScorer, LexicalScorer, clean, read_corpus, write_corpus
from .config import PRESETS, ConfigError, PipelineConfig, load_config, validate_config
from .core import (
    STABLE_COMMIT,
    AudioTimeline,
    OrderError,
    PipelineEvent,
    SchemaError,
    attach_references,
    dump_events,
    latency_unit,
    load_references,
    parse_events,
    replay_log,
)
from .engines import ScriptedAsrEngine, make_translation_engine
from .fixtures import FIXTURES, Scenario, UnknownFixture, make_fixture
from .metrics import AlignmentGap, EmptyOutput, LengthMismatch, corpus_bleu, stream_laal_report
from .pipeline import PipelineError, run_pipeline
from .prompts import (
    AlignedSentencePair,
    DegenerateAlignment,
    DelimiterCollision,
    MalformedPrompt,
    loss_positions,
    merge_shift,
    segment_alignment,
    serialize,
)
from .segmenter import SegmenterConfig, segment_timeline
from .stabilizer import CommittedWord, Stabilizer, StabilizerConfig
from .sweep import format_table, rows_to_jsonl, sweep

KNOWN_ERRORS = (
    ConfigError,
    SchemaError,
    OrderError,
    PipelineError,
    UnknownFixture,
    AlignmentGap,
    EmptyOutput,
    LengthMismatch,
    DegenerateAlignment,
    DelimiterCollision,
    MalformedPrompt,
    OSError,
    ValueError,
)


def _write(args: argparse.Namespace, text: str) -> None:
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _base_config(args: argparse.Namespace, language_pair: str | None = None) -> PipelineConfig:
    if args.config:
        config = load_config(args.config)
    elif getattr(args, "preset", None):
        config = validate_config({"preset": args.preset})
    elif language_pair:
        config = validate_config({"preset": f"{language_pair}-low"})
    else:
        config = validate_config({})
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


# -- subcommands ----------------------------------------------------------------


def cmd_segment(args: argparse.Namespace) -> int:
    seg = _base_config(args).segmenter
    config = SegmenterConfig(
        max_unvoiced_ms=seg.max_unvoiced_ms if args.mud_ms is None else args.mud_ms,
        voice_prob_threshold=seg.voice_prob_threshold if args.vpt is None else args.vpt,
        max_segment_ms=seg.max_segment_ms if args.msd_ms is None else args.msd_ms,
    )
    segments = segment_timeline(AudioTimeline.load(args.timeline), config)
    _write(args, "".join(json.dumps(s.to_dict()) + "\n" for s in segments))
    return 0


def cmd_transcribe_sim(args: argparse.Namespace) -> int:
    base = _base_config(args).stabilizer
    config = StabilizerConfig(
        cutoff_words=base.cutoff_words if args.cutoff_words is None else args.cutoff_words,
        agreement=base.agreement if args.agreement is None else args.agreement,
        hop_ms=base.hop_ms,
    )
    stab = Stabilizer(config)
    events = []
    last = None
    for lineno, line in enumerate(Path(args.trace).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            now = int(rec["interval_end_ms"])
            hyp = ScriptedAsrEngine.hypothesis(rec)
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaError(f"{args.trace}:{lineno}: {exc}") from exc
        if last is not None and now < last:
            raise OrderError(f"{args.trace}:{lineno}: interval_end_ms goes back to {now}")
        last = now
        segment = stab.segment
        words = stab.close_segment(hyp, now) if rec.get("final") else stab.step(hyp, now)
        if words:
            payload = {"segment": segment, "words": [{"text": w.text, "source_end_ms": w.source_end_ms} for w in words]}
            events.append(PipelineEvent(now, STABLE_COMMIT, payload))
    _write(args, dump_events(events))
    return 0


def cmd_translate_sim(args: argparse.Namespace) -> int:
    base = _base_config(args, args.lang_pair)
    pair = args.lang_pair or base.language_pair
    config = AgentConfig(
        min_chunk_words=base.agent.min_chunk_words if args.mcs is None else args.mcs,
        language_pair=pair,
        strict_trigger=args.strict or base.agent.strict_trigger,
        memory=args.memory or base.agent.memory,
        max_new_tokens=base.agent.max_new_tokens,
    )
    agent = SimulAgent(make_translation_engine(args.engine, pair.split("-")[1]), config)
    events = replay_log(parse_events(Path(args.events).read_text(encoding="utf-8"))).events
    out: list[PipelineEvent] = []
    end = 0
    for ev in events:
        end = ev.time_ms
        if ev.kind != STABLE_COMMIT:
            continue
        words = [CommittedWord(w["text"], ev.time_ms, int(w["source_end_ms"])) for w in ev.payload["words"]]
        agent.ingest(words, ev.time_ms)
        out.extend(agent.pop_events())
    agent.finish(end)
    out.extend(agent.pop_events())
    _write(args, dump_events(out))
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    scenario = Scenario.load(args.scenario)
    config = _base_config(args, scenario.language_pair)
    if args.mcs is not None:
        config = config.replace(mcs=args.mcs)
    emissions = run_pipeline(scenario.timeline, config, scenario.engines(args.engine, seed=config.seed))
    _write(args, emissions.to_jsonl())
    return 0


def cmd_eval_latency(args: argparse.Namespace) -> int:
    emissions = replay_log(parse_events(Path(args.log).read_text(encoding="utf-8")))
    emissions = attach_references(emissions, load_references(args.references))
    unit = args.unit or latency_unit(args.lang_pair)
    report = stream_laal_report(emissions, unit)
    if args.format == "jsonl":
        lines = [json.dumps({"sentence": r.index, "laal_ms": r.laal_ms, "output_units": r.output_units,
                             "reference_units": r.reference_units}) for r in report.sentences]
        lines.append(json.dumps({"stream_laal_ms": report.stream_laal_ms, "unit": unit, "skipped": report.skipped}))
        _write(args, "\n".join(lines) + "\n")
    else:
        rows = [f"{'sentence':>8} | {'LAAL (ms)':>10} | {'out':>4} | {'ref':>4}"]
        for r in report.sentences:
            value = "-" if r.laal_ms is None else f"{r.laal_ms:.2f}"
            rows.append(f"{r.index:>8} | {value:>10} | {r.output_units:>4} | {r.reference_units:>4}")
        rows.append(f"StreamLAAL ({unit}): {report.stream_laal_ms:.2f} ms")
        _write(args, "\n".join(rows) + "\n")
    return 0


def cmd_eval_bleu(args: argparse.Namespace) -> int:
    hyps = Path(args.hyp).read_text(encoding="utf-8").splitlines()
    refs = Path(args.ref).read_text(encoding="utf-8").splitlines()
    unit = args.unit or latency_unit(args.lang_pair)
    result = corpus_bleu(hyps, refs, unit=unit, smooth=args.smooth)
    if args.format == "jsonl":
        _write(args, json.dumps({"bleu": result.score, "precisions": result.precisions, "bp": result.brevity_penalty,
                                 "hyp_len": result.hyp_len, "ref_len": result.ref_len, "unit": unit}) + "\n")
    else:
        p = "/".join(f"{x:.1f}" for x in result.precisions)
        _write(args, f"BLEU = {result.score:.2f} {p} (BP = {result.brevity_penalty:.3f} "
                     f"hyp_len = {result.hyp_len} ref_len = {result.ref_len})\n")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = Scenario.load(args.scenario)
    base = _base_config(args, scenario.language_pair)
    grid = {}
    for key, parse in (("mud_ms", _int_list), ("vpt", _float_list), ("msd_ms", _int_list), ("mcs", _int_list)):
        value = getattr(args, key)
        if value:
            grid[key] = parse(value)
    rows = sweep(scenario, base, grid, translator=args.engine, jobs=args.jobs)
    print(format_table(rows))
    if args.output:
        Path(args.output).write_text(rows_to_jsonl(rows), encoding="utf-8")
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"sweep point {r.point} failed: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_clean(args: argparse.Namespace) -> int:
    samples = read_corpus(Path(args.input).read_text(encoding="utf-8"), args.lang_pair, args.format)
    if args.scorer == "lexical":
        lexicon = json.loads(Path(args.lexicon).read_text(encoding="utf-8")) if args.lexicon else None
        scorer = LexicalScorer(lexicon)
    elif args.scorer.startswith("external:"):
        scorer = ExternalScorer(args.scorer.partition(":")[2])
    else:
        raise ValueError(f"unknown scorer {args.scorer!r}; use lexical or external:<cmd>")
    report = clean(samples, scorer, args.qe_threshold)
    out_fmt = "tsv" if args.format == "tsv" else "jsonl"
    _write(args, write_corpus(report.kept, out_fmt))
    print(json.dumps({"input": len(samples), "kept": len(report.kept), "dropped": report.counts()}), file=sys.stderr)
    return 0


def cmd_build_prompts(args: argparse.Namespace) -> int:
    sources = Path(args.source).read_text(encoding="utf-8").splitlines()
    targets = Path(args.target).read_text(encoding="utf-8").splitlines()
    aligns = Path(args.align).read_text(encoding="utf-8").splitlines()
    contexts = Path(args.context).read_text(encoding="utf-8").splitlines() if args.context else [""] * len(sources)
    if not (len(sources) == len(targets) == len(aligns) == len(contexts)):
        raise ValueError("source, target, alignment and context files must have the same number of lines")
    lines = []
    for n, (s, t, a, c) in enumerate(zip(sources, targets, aligns, contexts)):
        pair = AlignedSentencePair.from_text(s, t, a, c)
        plan = segment_alignment(pair)
        plan = merge_shift(plan, args.seed + n, args.merge_prob, args.shift_prob, args.max_shift)
        prompt = serialize(plan, pair, args.lang_pair)
        lines.append(json.dumps({
            "header": prompt.header,
            "tokens": prompt.tokens,
            "loss_mask": prompt.loss_mask,
            "intervals": [[iv.src_start, iv.src_end, iv.tgt_start, iv.tgt_end] for iv in plan.intervals],
            "loss_ranges": loss_positions(prompt),
        }, ensure_ascii=False))
    _write(args, "".join(line + "\n" for line in lines))
    return 0


def cmd_make_fixture(args: argparse.Namespace) -> int:
    if not args.output:
        raise ValueError("make-fixture needs --output DIR")
    make_fixture(args.name, args.output)
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (JSON)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--output", "-o", help="write results here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="simulcascade", description="Deterministic cascaded simultaneous speech translation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[common], help="cut a timeline into speech segments")
    p.add_argument("timeline")
    p.add_argument("--mud-ms", type=int)
    p.add_argument("--vpt", type=float)
    p.add_argument("--msd-ms", type=int)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("transcribe-sim", parents=[common], help="replay an ASR hypothesis trace through the stabilizer")
    p.add_argument("trace")
    p.add_argument("--cutoff-words", type=int)
    p.add_argument("--agreement", type=int)
    p.set_defaults(func=cmd_transcribe_sim)

    p = sub.add_parser("translate-sim", parents=[common], help="run the agent over StableCommit events")
    p.add_argument("events")
    p.add_argument("--mcs", type=int)
    p.add_argument("--engine", default="identity", help="identity | dict:<path>[:delay] | scripted:<path>")
    p.add_argument("--lang-pair", choices=["en-de", "en-zh"])
    p.add_argument("--strict", action="store_true", help="fire on more than MCS words instead of at least MCS")
    p.add_argument("--memory", choices=["source", "target"])
    p.set_defaults(func=cmd_translate_sim)

    p = sub.add_parser("run", parents=[common], help="run the full pipeline on a scenario directory")
    p.add_argument("scenario")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--engine", default="dict", help="dict | identity | dict:<path>[:delay] | scripted:<path>")
    p.add_argument("--mcs", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval-latency", parents=[common], help="StreamLAAL of an event log")
    p.add_argument("log")
    p.add_argument("--references", required=True)
    p.add_argument("--unit", choices=["word", "char"])
    p.add_argument("--lang-pair", default="en-de", choices=["en-de", "en-zh"])
    p.add_argument("--format", choices=["text", "jsonl"], default="text")
    p.set_defaults(func=cmd_eval_latency)

    p = sub.add_parser("eval-bleu", parents=[common], help="corpus BLEU of line-aligned files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--unit", choices=["word", "char"])
    p.add_argument("--lang-pair", default="en-de", choices=["en-de", "en-zh"])
    p.add_argument("--smooth", choices=["none", "exp"], default="none")
    p.add_argument("--format", choices=["text", "jsonl"], default="text")
    p.set_defaults(func=cmd_eval_bleu)

    p = sub.add_parser("sweep", parents=[common], help="grid search over MUD/VPT/MSD/MCS")
    p.add_argument("scenario")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--mud-ms", help="comma-separated values")
    p.add_argument("--vpt")
    p.add_argument("--msd-ms")
    p.add_argument("--mcs")
    p.add_argument("--engine", default="dict")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("clean", parents=[common], help="filter a parallel corpus")
    p.add_argument("input")
    p.add_argument("--lang-pair", default="en-de", choices=["en-de", "en-zh"])
    p.add_argument("--qe-threshold", type=float, default=0.6)
    p.add_argument("--scorer", default="lexical", help="lexical | external:<cmd>")
    p.add_argument("--lexicon", help="JSON word map used by the lexical scorer")
    p.add_argument("--format", choices=["auto", "jsonl", "tsv"], default="auto")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("build-prompts", parents=[common], help="conversational training prompts from aligned text")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--align", required=True, help="Pharaoh i-j alignments, 0-based")
    p.add_argument("--context", help="prior source sentence per line")
    p.add_argument("--lang-pair", default="en-de", choices=["en-de", "en-zh"])
    p.add_argument("--merge-prob", type=float, default=0.2)
    p.add_argument("--shift-prob", type=float, default=0.2)
    p.add_argument("--max-shift", type=int, default=2)
    p.set_defaults(func=cmd_build_prompts)

    p = sub.add_parser("make-fixture", parents=[common], help="write a built-in scenario directory")
    p.add_argument("name", help=f"one of: {', '.join(sorted(FIXTURES))}")
    p.set_defaults(func=cmd_make_fixture)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "build-prompts" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
