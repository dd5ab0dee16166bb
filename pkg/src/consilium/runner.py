"""Experiment execution: sweep plans, the JSONL transcript store, resume, and reports."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from . import engine
from .backend import ChatBackend, OpenAICompatibleBackend, ScriptedBackend
from .core import Approach, PromptStyle, RunConfig, TranscriptRecord, validate_config
from .corpus import GroupSpec, load_corpus, sample_group
from .evalkit import MetricsReport
from .prompting import load_templates

logger = logging.getLogger(__name__)

STORE_NAME = "transcripts.jsonl"
REPORT_JSON = "report.json"
REPORT_TXT = "report.txt"


class PlanError(ValueError):
    pass


@dataclass
class ExperimentPlan:
    corpus: Path
    groups: list[GroupSpec]
    configs: list[RunConfig]
    out: Path
    backend: str = "scripted"
    script: Path | None = None
    parallelism: int = 4
    templates: Path | None = None
    resume: bool = False

    @classmethod
    def from_dict(cls, data: dict[str, Any], base: Path | None = None) -> "ExperimentPlan":
        base = base or Path.cwd()

        def resolve(p: str | None) -> Path | None:
            if p is None:
                return None
            p = Path(p)
            return p if p.is_absolute() else base / p

        try:
            run = dict(data.get("run", {}))
            approaches = data.get("approaches", [a.value for a in Approach])
            styles = data.get("prompt_styles", [s.value for s in PromptStyle])
            configs = [
                validate_config(RunConfig.from_dict({**run, "approach": a, "prompt_style": s}))
                for a in approaches for s in styles
            ]
            return cls(
                corpus=resolve(data["corpus"]),
                groups=[GroupSpec.from_dict(g) for g in data["groups"]],
                configs=configs,
                out=resolve(data.get("out", "out")),
                backend=data.get("backend", "scripted"),
                script=resolve(data.get("script")),
                parallelism=int(data.get("parallelism", 4)),
                templates=resolve(data.get("templates")),
                resume=bool(data.get("resume", False)),
            )
        except KeyError as exc:
            raise PlanError(f"plan is missing {exc.args[0]!r}") from None
        except ValueError as exc:
            raise PlanError(str(exc)) from None

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentPlan":
        path = Path(path)
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f), base=path.parent)

    def validate(self) -> None:
        problems = []
        if not self.configs:
            problems.append("the sweep is empty")
        if not self.groups:
            problems.append("no groups")
        if self.parallelism < 1:
            problems.append("parallelism must be ≥ 1")
        if self.backend not in ("live", "scripted"):
            problems.append(f"unknown backend {self.backend!r}")
        if self.backend == "scripted" and (self.script is None or not self.script.is_file()):
            problems.append(f"scripted backend needs an existing --script file, got {self.script}")
        names = [g.name + "/" + g.category.value for g in self.groups]
        if len(names) != len(set(names)):
            problems.append("duplicate (group name, category) pairs")
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            problems.append(f"output directory not writable: {exc}")
        else:
            if not os.access(self.out, os.W_OK):
                problems.append(f"output directory not writable: {self.out}")
        if problems:
            raise PlanError("; ".join(problems))

    def make_backend(self) -> ChatBackend:
        if self.backend == "scripted":
            return ScriptedBackend.from_file(self.script)
        return OpenAICompatibleBackend.from_env()


@dataclass
class StoreContents:
    records: list[TranscriptRecord] = field(default_factory=list)
    skipped: list[tuple[int, str]] = field(default_factory=list)


def read_store(path: str | Path) -> StoreContents:
    """Load every parseable line; corrupt lines are logged and skipped with their line number."""
    contents = StoreContents()
    path = Path(path)
    if not path.exists():
        return contents
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                contents.records.append(TranscriptRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                logger.warning("%s:%d: skipping corrupt transcript line (%s)", path, lineno, exc)
                contents.skipped.append((lineno, str(exc)))
    return contents


class TranscriptWriter:
    """Appends records to the store. Only the dispatching thread calls ``write``."""

    def __init__(self, path: Path):
        self.path = path
        torn = path.exists() and path.stat().st_size and not path.read_bytes().endswith(b"\n")
        self._fh = open(path, "a", encoding="utf-8")
        if torn:
            # A crash mid-write left a partial line; keep it on its own (corrupt) line.
            self._fh.write("\n")

    def write(self, record: TranscriptRecord) -> None:
        self._fh.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _jobs(plan: ExperimentPlan) -> Iterator[tuple[GroupSpec, Any, RunConfig]]:
    corpus = load_corpus(plan.corpus)
    groups = [(spec, sample_group(corpus, spec)) for spec in plan.groups]
    for spec, segments in groups:
        for segment in segments:
            for config in plan.configs:
                yield spec, segment, config


def run_experiment(plan: ExperimentPlan, backend: ChatBackend | None = None) -> MetricsReport:
    """Run every (group, segment, config) combination not already in the store.

    Transcripts are appended as each discussion completes. The returned report
    covers the whole store (earlier runs included when resuming) and is also
    written to ``report.json``, ``report.txt`` and figures in ``plan.out``.
    """
    plan.validate()
    templates = load_templates(plan.templates)
    backend = backend if backend is not None else plan.make_backend()
    jobs = list(_jobs(plan))

    store = plan.out / STORE_NAME
    previous = StoreContents()
    if store.exists() and store.stat().st_size:
        if not plan.resume:
            raise PlanError(f"{store} already has transcripts; pass --resume to continue it")
        previous = read_store(store)
    done = {r.key for r in previous.records}
    pending = [(g, s, c) for g, s, c in jobs
               if (g.name, s.id, c.approach.value, c.prompt_style.value) not in done]
    logger.info("%d jobs, %d already stored, %d to run", len(jobs), len(jobs) - len(pending), len(pending))

    def work(group: GroupSpec, segment, config: RunConfig) -> TranscriptRecord:
        transcript = engine.run(segment, config, backend.fork(), templates)
        problems = transcript.check(config)
        if problems:
            logger.warning("segment %s: transcript invariants violated: %s", segment.id, problems)
        return TranscriptRecord(transcript, config, group.name, segment.category, segment.label)

    records = list(previous.records)
    writer = TranscriptWriter(store)
    try:
        with ThreadPoolExecutor(max_workers=plan.parallelism) as pool:
            futures = {pool.submit(work, *job) for job in pending}
            while futures:
                finished, futures = wait(futures, return_when=FIRST_EXCEPTION)
                error = None
                for fut in finished:
                    if fut.exception() is None:
                        record = fut.result()
                        writer.write(record)
                        records.append(record)
                    elif error is None:
                        error = fut.exception()
                if error is not None:
                    for other in futures:
                        other.cancel()
                    raise error
    finally:
        writer.close()

    report = MetricsReport.from_records(records, skipped_lines=len(previous.skipped))
    write_report(report, plan.out)
    return report


def report_store(store: str | Path) -> MetricsReport:
    """Recompute metrics from the transcripts alone."""
    contents = read_store(store)
    return MetricsReport.from_records(contents.records, skipped_lines=len(contents.skipped))


def write_report(report: MetricsReport, out_dir: str | Path, figures: bool = True) -> list[Path]:
    from .plotting import render_figures

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT_JSON).write_text(report.to_json(), encoding="utf-8")
    (out_dir / REPORT_TXT).write_text(report.render_text(), encoding="utf-8")
    written = [out_dir / REPORT_JSON, out_dir / REPORT_TXT]
    if figures:
        written += render_figures(report, out_dir)
    return written
