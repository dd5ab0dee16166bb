"""Precision/recall/F1 per experiment cell, token totals, and Table 1 checks.

Undefined ratios (zero denominators) are ``None`` everywhere, never 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

from .core import Approach, PromptStyle, TranscriptRecord, VulnCategory

TABLE_TOLERANCE = 0.002
METRICS = ("precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    unparseable: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn + self.unparseable

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn,
                               self.fn + other.fn, self.unparseable + other.unparseable)


class PRF(NamedTuple):
    precision: float | None
    recall: float | None
    f1: float | None


def confusion(outcomes: Iterable[tuple[bool, int | None]]) -> ConfusionCounts:
    """Tally (ground truth, predicted verdict) pairs; a None prediction counts as unparseable."""
    tp = fp = tn = fn = unparseable = 0
    for truth, predicted in outcomes:
        if predicted is None:
            unparseable += 1
        elif predicted == 1:
            if truth:
                tp += 1
            else:
                fp += 1
        elif predicted == 0:
            if truth:
                fn += 1
            else:
                tn += 1
        else:
            raise ValueError(f"predicted verdict must be 0, 1 or None, got {predicted!r}")
    return ConfusionCounts(tp, fp, tn, fn, unparseable)


def _ratio(num: float, den: float) -> float | None:
    return num / den if den else None


def harmonic_mean(p: float | None, r: float | None) -> float | None:
    if p is None or r is None:
        return None
    return _ratio(2 * p * r, p + r)


def prf(counts: ConfusionCounts) -> PRF:
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    return PRF(precision, recall, harmonic_mean(precision, recall))


class CellKey(NamedTuple):
    group: str
    category: str
    approach: str
    prompt_style: str

    @property
    def pair_key(self) -> tuple[str, str, str]:
        """Key shared by the single-role and multi-role cells of one comparison."""
        return (self.group, self.category, self.prompt_style)


@dataclass(frozen=True)
class CellMetrics:
    precision: float | None
    recall: float | None
    f1: float | None
    counts: ConfusionCounts | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    consensus: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass
class MetricsReport:
    cells: dict[CellKey, CellMetrics] = field(default_factory=dict)
    skipped_lines: int = 0

    @classmethod
    def from_records(cls, records: Iterable[TranscriptRecord], skipped_lines: int = 0) -> "MetricsReport":
        counts: dict[CellKey, ConfusionCounts] = defaultdict(ConfusionCounts)
        tokens: dict[CellKey, list[int]] = defaultdict(lambda: [0, 0, 0])
        for rec in records:
            key = CellKey(rec.group, rec.category.value, rec.config.approach.value, rec.config.prompt_style.value)
            verdict = None if rec.transcript.final_judgment is None else rec.transcript.final_judgment.verdict
            counts[key] = counts[key] + confusion([(rec.label, verdict)])
            t = tokens[key]
            t[0] += rec.transcript.prompt_tokens
            t[1] += rec.transcript.completion_tokens
            t[2] += int(rec.transcript.consensus_reached)
        cells = {}
        for key in sorted(counts):
            p, r, f = prf(counts[key])
            pt, ct, agreed = tokens[key]
            cells[key] = CellMetrics(p, r, f, counts[key], pt, ct, agreed)
        return cls(cells, skipped_lines)

    def select(self, approach: Approach | str) -> "MetricsReport":
        approach = Approach(approach).value
        return MetricsReport({k: v for k, v in self.cells.items() if k.approach == approach}, self.skipped_lines)

    def to_dict(self) -> dict[str, Any]:
        cells = []
        for key in sorted(self.cells):
            m = self.cells[key]
            row: dict[str, Any] = dict(key._asdict())
            row.update(precision=m.precision, recall=m.recall, f1=m.f1)
            if m.counts is not None:
                row.update(tp=m.counts.tp, fp=m.counts.fp, tn=m.counts.tn, fn=m.counts.fn,
                           unparseable=m.counts.unparseable, segments=m.counts.total, consensus=m.consensus)
            row.update(prompt_tokens=m.prompt_tokens, completion_tokens=m.completion_tokens,
                       total_tokens=m.total_tokens)
            cells.append(row)
        out: dict[str, Any] = {"cells": cells, "skipped_lines": self.skipped_lines}
        multi, single = self.select(Approach.MULTI_ROLE), self.select(Approach.SINGLE_ROLE)
        if multi.cells and single.cells:
            out["improvement"] = improvement_summary(multi, single).to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render_text(self) -> str:
        return render_table(self)


@dataclass(frozen=True)
class ImprovementSummary:
    """Mean relative increase (percent) of multi-role over single-role, per metric."""

    increase_pct: dict[str, float | None]
    cells_used: dict[str, int]
    skipped: dict[str, int]
    token_ratio: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "increase_pct": self.increase_pct,
            "cells_used": self.cells_used,
            "skipped": self.skipped,
            "token_ratio": self.token_ratio,
        }


def improvement_summary(report_multi: MetricsReport, report_single: MetricsReport) -> ImprovementSummary:
    """Average (multi - single) / single uniformly over matching (group, category, style) cells.

    Cells where either side's metric is undefined or the single-role value is
    zero are skipped and counted. ``token_ratio`` is total multi-role tokens
    over total single-role tokens across the matched cells, when both are known.
    """
    multi = {k.pair_key: v for k, v in report_multi.cells.items()}
    single = {k.pair_key: v for k, v in report_single.cells.items()}
    if set(multi) != set(single):
        only_multi = sorted(set(multi) - set(single))
        only_single = sorted(set(single) - set(multi))
        raise ValueError(f"cell keys differ: only multi-role {only_multi}, only single-role {only_single}")

    increase: dict[str, float | None] = {}
    used: dict[str, int] = {}
    skipped: dict[str, int] = {}
    for metric in METRICS:
        deltas = []
        for key in sorted(multi):
            m, s = multi[key].metric(metric), single[key].metric(metric)
            if m is None or s is None or s == 0:
                continue
            deltas.append((m - s) / s)
        used[metric] = len(deltas)
        skipped[metric] = len(multi) - len(deltas)
        increase[metric] = 100 * math.fsum(deltas) / len(deltas) if deltas else None

    multi_tokens = sum(v.total_tokens for v in multi.values())
    single_tokens = sum(v.total_tokens for v in single.values())
    ratio = multi_tokens / single_tokens if single_tokens and multi_tokens else None
    return ImprovementSummary(increase, used, skipped, ratio)


# ----------------------------------------------------------------- Table 1


class TableRow(NamedTuple):
    key: CellKey
    precision: float
    recall: float
    f1: float


TABLE1_GROUPS = ("Group1", "Group2", "Group3")
REPORTED_IMPROVEMENT_PCT = {"precision": 13.48, "recall": 18.25, "f1": 16.13}


def table1_keys() -> list[CellKey]:
    return [
        CellKey(g, c.value, a.value, s.value)
        for g in TABLE1_GROUPS for c in VulnCategory for a in Approach for s in PromptStyle
    ]


def load_table1(path: str | Path | None = None) -> list[TableRow]:
    """Read a Table 1 transcription (CSV). Defaults to the bundled copy."""
    if path is None:
        text = (resources.files("consilium") / "data" / "table1.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        key = CellKey(rec["group"], rec["category"], rec["approach"], rec["prompt_style"])
        rows.append(TableRow(key, float(rec["precision"]), float(rec["recall"]), float(rec["f1"])))
    return rows


def table1_consistency(fixture: Sequence[TableRow], tolerance: float = TABLE_TOLERANCE) -> list[TableRow]:
    """Return the rows whose F1 differs from 2PR/(P+R) by more than ``tolerance``.

    Raises ValueError if the fixture does not hold exactly one row per Table 1 cell.
    """
    keys = [row.key for row in fixture]
    expected = set(table1_keys())
    if len(keys) != len(set(keys)) or set(keys) != expected:
        missing = sorted(expected - set(keys))
        raise ValueError(f"incomplete Table 1 fixture: {len(set(keys))} of {len(expected)} cells, missing {missing[:3]}")
    violations = []
    for row in fixture:
        f1 = harmonic_mean(row.precision, row.recall)
        if f1 is None or abs(row.f1 - f1) > tolerance:
            violations.append(row)
    return violations


def report_from_table(rows: Iterable[TableRow]) -> MetricsReport:
    return MetricsReport({r.key: CellMetrics(r.precision, r.recall, r.f1) for r in rows})


# --------------------------------------------------------------- rendering

_COLUMNS = [(a, s) for a in Approach for s in PromptStyle]
_SHORT = {Approach.SINGLE_ROLE: "single", Approach.MULTI_ROLE: "multi", PromptStyle.BASIC: "basic",
          PromptStyle.COT: "CoT"}


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def render_table(report: MetricsReport) -> str:
    """Plain-text table laid out like Table 1: one row per (group, category)."""
    rows = sorted({(k.group, k.category) for k in report.cells})
    sub = [f"{_SHORT[a]}-{_SHORT[s]}" for a, s in _COLUMNS]
    header = ["group", "cat"] + [f"{m[0].upper()}:{c}" for m in ("precision", "recall", "f1") for c in sub]
    body = []
    for group, category in rows:
        line = [group, category]
        for metric in METRICS:
            for a, s in _COLUMNS:
                cell = report.cells.get(CellKey(group, category, a.value, s.value))
                line.append("-" if cell is None else _fmt(cell.metric(metric)))
        body.append(line)
    out = _align([header] + body)

    counted = [(k, v) for k, v in sorted(report.cells.items()) if v.counts is not None]
    if counted:
        detail_header = ["group", "cat", "approach", "style", "n", "tp", "fp", "tn", "fn", "unparsed",
                         "consensus", "tokens"]
        detail = [[k.group, k.category, k.approach, k.prompt_style, str(v.counts.total), str(v.counts.tp),
                   str(v.counts.fp), str(v.counts.tn), str(v.counts.fn), str(v.counts.unparseable),
                   str(v.consensus), str(v.total_tokens)] for k, v in counted]
        out += "\n" + _align([detail_header] + detail)

    multi, single = report.select(Approach.MULTI_ROLE), report.select(Approach.SINGLE_ROLE)
    if multi.cells and single.cells:
        try:
            summary = improvement_summary(multi, single)
        except ValueError as exc:
            out += f"\nimprovement: not computed ({exc})\n"
        else:
            parts = [f"{m} {'n/a' if v is None else f'{v:+.2f}%'}" for m, v in summary.increase_pct.items()]
            out += "\nmean relative increase (multi vs single): " + ", ".join(parts) + "\n"
            if summary.token_ratio is not None:
                out += f"token ratio multi/single: {summary.token_ratio:.3f} ({100 * (summary.token_ratio - 1):+.1f}%)\n"
    if report.skipped_lines:
        out += f"skipped corrupt transcript lines: {report.skipped_lines}\n"
    return out


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))).rstrip()
             for r in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def improvement_deviation(summary: ImprovementSummary, reference: Mapping[str, float] = REPORTED_IMPROVEMENT_PCT) -> dict[str, float | None]:
    return {
        m: None if summary.increase_pct.get(m) is None else summary.increase_pct[m] - reference[m]
        for m in reference
    }
