from __future__ import annotations

import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from consilium.core import CodeSegment, VulnCategory
from consilium.corpus import (
    Corpus,
    CorpusError,
    GroupSpec,
    convert_slices,
    load_corpus,
    reference_group_specs,
    sample_group,
    write_corpus,
)


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def make_corpus(n_per_cell=3):
    segs = [
        CodeSegment(f"{c.value}-{label}-{i}", f"code {c.value} {label} {i};", bool(label), c)
        for c in VulnCategory for label in (0, 1) for i in range(n_per_cell)
    ]
    return Corpus(tuple(segs))


def test_small_load(tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [
        {"id": "a", "code": "x = y + 1;", "label": 1, "category": "AE"},
        {"id": "b", "code": "p = q;", "label": 0, "category": "PU"},
        {"id": "c", "code": "buf[i] = 0;", "label": 1, "category": "AU"},
    ])
    corpus = load_corpus(path)
    assert len(corpus) == 3
    assert corpus.counts == Counter((s.category, s.label) for s in corpus.segments)
    assert corpus.available(VulnCategory.AE, True) == 1


def test_unknown_category_names_line_and_value(tmp_path):
    path = write_lines(tmp_path / "c.jsonl", [
        {"id": "a", "code": "x;", "label": 1, "category": "AE"},
        {"id": "b", "code": "y;", "label": 0, "category": "XX"},
    ])
    with pytest.raises(CorpusError, match=r"line 2.*'XX'"):
        load_corpus(path)


@pytest.mark.parametrize("record,message", [
    ({"id": "a", "code": "x;", "label": 2, "category": "AE"}, "label"),
    ({"id": "a", "code": "x;", "label": True, "category": "AE"}, "label"),
    ({"id": "a", "code": "   ", "label": 1, "category": "AE"}, "code"),
    ({"id": "a", "label": 1, "category": "AE"}, "missing"),
    ({"id": 5, "code": "x;", "label": 1, "category": "AE"}, "id"),
])
def test_malformed_records(tmp_path, record, message):
    with pytest.raises(CorpusError, match=message):
        load_corpus(write_lines(tmp_path / "c.jsonl", [record]))


def test_invalid_json_and_duplicate_ids(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "code": "x;", "label": 1, "category": "AE"}\n{oops\n')
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)
    rec = {"id": "a", "code": "x;", "label": 1, "category": "AE"}
    with pytest.raises(CorpusError, match="duplicate id 'a'"):
        load_corpus(write_lines(path, [rec, rec]))


def test_write_load_round_trip(tmp_path):
    corpus = make_corpus()
    write_corpus(corpus.segments, tmp_path / "c.jsonl")
    assert load_corpus(tmp_path / "c.jsonl") == corpus


def test_reference_group_sizes():
    corpus = make_corpus(n_per_cell=800)
    spec = GroupSpec("Group1", 800, 200, VulnCategory.FC, seed=42)
    group = sample_group(corpus, spec)
    assert len(group) == 1000
    assert sum(s.label for s in group) == 800
    specs = reference_group_specs()
    assert len(specs) == 12
    assert {(s.name, s.vulnerable_count, s.non_vulnerable_count) for s in specs} == {
        ("Group1", 800, 200), ("Group2", 500, 500), ("Group3", 200, 800)}


def test_empty_request_and_determinism():
    corpus = make_corpus()
    assert sample_group(corpus, GroupSpec("g", 0, 0, VulnCategory.AU)) == []
    spec = GroupSpec("g", 2, 2, VulnCategory.AU, seed=3)
    assert sample_group(corpus, spec) == sample_group(corpus, spec)


def test_insufficient_segments():
    with pytest.raises(CorpusError, match="wants 4 vulnerable"):
        sample_group(make_corpus(), GroupSpec("g", 4, 0, VulnCategory.FC))


@given(st.integers(0, 5), st.integers(0, 5), st.sampled_from(list(VulnCategory)), st.integers())
def test_group_composition(vuln, non_vuln, category, seed):
    corpus = make_corpus(n_per_cell=5)
    group = sample_group(corpus, GroupSpec("g", vuln, non_vuln, category, seed))
    assert sum(s.label for s in group) == vuln
    assert sum(not s.label for s in group) == non_vuln
    assert all(s.category is category for s in group)
    assert len({s.id for s in group}) == len(group)


SLICES = """\
1 CWE121/s01/wcsncat_01.c wcsncat 42
void sink(wchar_t *data)
{
    wcsncat(dest, data, 50 - wcslen(dest) - 1);
}
0
------------------------------
2 CWE121/s02/memcpy_03.c memcpy 17
memcpy(buf, src, len);

1
------------------------------
3 CWE122/s01/strcat_04.c strcat 9
strcat(dest, src);
1
------------------------------
"""


def test_convert_slices_counts_match_source(tmp_path):
    src = tmp_path / "api_function_call.txt"
    src.write_text(SLICES)
    segments = convert_slices(src, VulnCategory.FC)
    # Independent recount: separator lines and label lines of the raw file.
    text_lines = src.read_text().splitlines()
    blocks = sum(1 for l in text_lines if l.strip() and set(l.strip()) == {"-"})
    labels = [l.strip() for i, l in enumerate(text_lines)
              if i + 1 < len(text_lines) and set(text_lines[i + 1].strip() or "x") == {"-"}]
    assert len(segments) == blocks == 3
    assert sum(s.label for s in segments) == labels.count("1") == 2
    write_corpus(segments, tmp_path / "c.jsonl")
    corpus = load_corpus(tmp_path / "c.jsonl")
    assert corpus.summary()["FC"] == {"vulnerable": 2, "non_vulnerable": 1}
    assert "wcsncat" in segments[0].source_text and not segments[0].label


def test_convert_slices_rejects_bad_block(tmp_path):
    src = tmp_path / "bad.txt"
    src.write_text("1 header\ncode;\nmaybe\n-----\n")
    with pytest.raises(CorpusError, match="block 0"):
        convert_slices(src, VulnCategory.AU)
