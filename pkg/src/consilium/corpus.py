"""Labeled code-segment corpora and fixed-composition evaluation groups.

Corpus files are JSONL, one ``{"id", "code", "label", "category"}`` object
per line. :func:`convert_slices` turns slice text files (blocks separated by
dashed lines, header line first, 0/1 label line last) into that format.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .core import CodeSegment, VulnCategory


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Corpus:
    segments: tuple[CodeSegment, ...]
    counts: Counter = field(init=False, compare=False)

    def __post_init__(self):
        seen = set()
        for seg in self.segments:
            if seg.id in seen:
                raise CorpusError(f"duplicate segment id {seg.id!r}")
            seen.add(seg.id)
        object.__setattr__(self, "counts", Counter((s.category, s.label) for s in self.segments))

    def __len__(self) -> int:
        return len(self.segments)

    def available(self, category: VulnCategory, label: bool) -> int:
        return self.counts[(category, label)]

    def summary(self) -> dict[str, dict[str, int]]:
        return {
            c.value: {"vulnerable": self.counts[(c, True)], "non_vulnerable": self.counts[(c, False)]}
            for c in VulnCategory
        }


@dataclass(frozen=True)
class GroupSpec:
    name: str
    vulnerable_count: int
    non_vulnerable_count: int
    category: VulnCategory
    seed: int = 0

    def __post_init__(self):
        if self.vulnerable_count < 0 or self.non_vulnerable_count < 0:
            raise ValueError(f"group {self.name!r}: counts must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "GroupSpec":
        return cls(
            name=str(data["name"]),
            vulnerable_count=int(data["vulnerable_count"]),
            non_vulnerable_count=int(data["non_vulnerable_count"]),
            category=VulnCategory.parse(data["category"]),
            seed=int(data.get("seed", 0)),
        )


# Compositions of the three evaluation groups (vulnerable, non-vulnerable).
REFERENCE_GROUPS = {"Group1": (800, 200), "Group2": (500, 500), "Group3": (200, 800)}


def reference_group_specs(seed: int = 42) -> list[GroupSpec]:
    return [
        GroupSpec(name, vuln, non_vuln, category, seed)
        for name, (vuln, non_vuln) in REFERENCE_GROUPS.items()
        for category in VulnCategory
    ]


def _parse_record(lineno: int, line: str) -> CodeSegment:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    missing = [k for k in ("id", "code", "label", "category") if k not in data]
    if missing:
        raise CorpusError(f"line {lineno}: missing field(s) {', '.join(missing)}")
    if not isinstance(data["id"], str) or not data["id"]:
        raise CorpusError(f"line {lineno}: id must be a non-empty string")
    if not isinstance(data["code"], str) or not data["code"].strip():
        raise CorpusError(f"line {lineno}: code must be a non-empty string")
    if isinstance(data["label"], (bool, float)) or data["label"] not in (0, 1):
        raise CorpusError(f"line {lineno}: label must be 0 or 1, got {data['label']!r}")
    try:
        category = VulnCategory.parse(data["category"])
    except ValueError:
        raise CorpusError(f"line {lineno}: unknown category {data['category']!r}") from None
    return CodeSegment(data["id"], data["code"], bool(data["label"]), category)


def load_corpus(path: str | Path) -> Corpus:
    segments = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            seg = _parse_record(lineno, line)
            if seg.id in seen:
                raise CorpusError(f"line {lineno}: duplicate id {seg.id!r} (first on line {seen[seg.id]})")
            seen[seg.id] = lineno
            segments.append(seg)
    return Corpus(tuple(segments))


def write_corpus(segments: Iterable[CodeSegment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in segments:
            record = {"id": s.id, "code": s.source_text, "label": int(s.label), "category": s.category.value}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def sample_group(corpus: Corpus, spec: GroupSpec) -> list[CodeSegment]:
    """Seeded shuffle-then-take per label, then a seeded shuffle of the union."""
    rng = random.Random(spec.seed)
    picked: list[CodeSegment] = []
    for label, wanted in ((True, spec.vulnerable_count), (False, spec.non_vulnerable_count)):
        pool = [s for s in corpus.segments if s.category is spec.category and s.label is label]
        if wanted > len(pool):
            kind = "vulnerable" if label else "non-vulnerable"
            raise CorpusError(
                f"group {spec.name!r}: wants {wanted} {kind} {spec.category.value} segments, corpus has {len(pool)}"
            )
        rng.shuffle(pool)
        picked.extend(pool[:wanted])
    rng.shuffle(picked)
    return picked


def _slice_blocks(lines: Iterable[str]) -> Iterator[list[str]]:
    block: list[str] = []
    for line in lines:
        stripped = line.rstrip("\n")
        if stripped.strip() and set(stripped.strip()) == {"-"}:
            if any(l.strip() for l in block):
                yield block
            block = []
        else:
            block.append(stripped)
    if any(l.strip() for l in block):
        yield block


def convert_slices(src: str | Path, category: VulnCategory, prefix: str | None = None) -> list[CodeSegment]:
    """Read a slice text file into segments.

    Each block: first line is a header (used in the id), last non-blank line is
    the 0/1 label, lines in between are code.
    """
    prefix = prefix or category.value
    segments = []
    with open(src, encoding="utf-8", errors="replace") as f:
        for n, block in enumerate(_slice_blocks(f)):
            lines = [l for l in block if l.strip()]
            if len(lines) < 3 or lines[-1].strip() not in ("0", "1"):
                raise CorpusError(f"{src}: block {n} is not header/code/label")
            header = lines[0].split()[0] if lines[0].split() else str(n)
            segments.append(
                CodeSegment(f"{prefix}-{n}-{header}", "\n".join(lines[1:-1]), lines[-1].strip() == "1", category)
            )
    return segments
