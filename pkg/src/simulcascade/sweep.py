"""Hyperparameter grid over segmenter and agent settings, one pipeline run per point."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .config import PipelineConfig
from .core import attach_references, latency_unit
from .fixtures import Scenario
from .metrics import MetricReport, evaluate
from .pipeline import run_pipeline

GRID_KEYS = ("mud_ms", "vpt", "msd_ms", "mcs")


@dataclass
class SweepRow:
    point: dict
    bleu: float | None
    stream_laal_ms: float | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {**self.point, "bleu": self.bleu, "stream_laal_ms": self.stream_laal_ms, "error": self.error}


def evaluate_run(scenario: Scenario, config: PipelineConfig, translator: str = "dict") -> MetricReport:
    engines = scenario.engines(translator, seed=config.seed)
    log = run_pipeline(scenario.timeline, config, engines)
    return evaluate(attach_references(log, scenario.references), latency_unit(scenario.language_pair))


def _run_point(args: tuple) -> SweepRow:
    scenario, base, point, translator = args
    try:
        config = base.replace(**point)
        report = evaluate_run(scenario, config, translator)
        return SweepRow(point, report.bleu, report.stream_laal_ms)
    except Exception as exc:  # one bad point must not stop the sweep
        return SweepRow(point, None, None, f"{type(exc).__name__}: {exc}")


def grid_points(grid: dict[str, Sequence]) -> list[dict]:
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys {sorted(unknown)}; use {GRID_KEYS}")
    keys = [k for k in GRID_KEYS if k in grid]
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def sweep(
    scenario: Scenario,
    base: PipelineConfig,
    grid: dict[str, Sequence],
    translator: str = "dict",
    jobs: int = 1,
) -> list[SweepRow]:
    """Rows come back in grid order whatever the parallelism."""
    tasks = [(scenario, base, point, translator) for point in grid_points(grid)]
    if jobs <= 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point, tasks))


def format_table(rows: Sequence[SweepRow]) -> str:
    keys = list(rows[0].point) if rows else []
    header = [*keys, "BLEU", "StreamLAAL"]
    body = []
    for r in rows:
        cells = [str(r.point[k]) for k in keys]
        if r.error:
            cells += ["error", r.error]
        else:
            cells += [f"{r.bleu:.2f}", f"{r.stream_laal_ms:.2f}"]
        body.append(cells)
    widths = [max(len(str(c)) for c in col) for col in zip(header, *body)] if body else [len(h) for h in header]
    lines = [" | ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    lines += [" | ".join(c.rjust(w) for c, w in zip(cells, widths)) for cells in body]
    return "\n".join(lines)


def rows_to_jsonl(rows: Sequence[SweepRow]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in rows)
