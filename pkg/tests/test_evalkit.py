from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from consilium.evalkit import (
    PRF,
    CellKey,
    CellMetrics,
    ConfusionCounts,
    MetricsReport,
    confusion,
    improvement_summary,
    load_table1,
    prf,
    render_table,
    report_from_table,
    table1_consistency,
    table1_keys,
)


def brute_force(outcomes):
    """Recount by filtering, without the tallying loop under test."""
    tp = len([1 for t, p in outcomes if t and p == 1])
    fp = len([1 for t, p in outcomes if not t and p == 1])
    tn = len([1 for t, p in outcomes if not t and p == 0])
    fn = len([1 for t, p in outcomes if t and p == 0])
    skipped = len([1 for _, p in outcomes if p is None])
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    f1 = 2 * precision * recall / (precision + recall) if precision is not None and recall is not None \
        and precision + recall else None
    return (tp, fp, tn, fn, skipped), (precision, recall, f1)


def test_confusion_examples():
    assert confusion([(True, 1), (False, 0)]) == ConfusionCounts(tp=1, tn=1)
    assert confusion([(True, 0), (False, 1)]) == ConfusionCounts(fn=1, fp=1)


def test_confusion_with_unparseable():
    outcomes = [(True, 1), (True, 0), (False, 0), (False, 1), (True, None), (True, 1),
                (False, 0), (False, 0), (True, 1), (False, 1)]
    counts = confusion(outcomes)
    assert counts.total == 10 and counts.unparseable == 1
    assert (counts.tp, counts.fp, counts.tn, counts.fn, counts.unparseable) == brute_force(outcomes)[0]


def test_confusion_rejects_bad_verdict():
    with pytest.raises(ValueError):
        confusion([(True, 2)])


def test_prf_hand_arithmetic():
    p, r, f = prf(ConfusionCounts(tp=3, fp=1, fn=2))
    assert p == pytest.approx(0.75)
    assert r == pytest.approx(0.6)
    assert round(f, 3) == 0.667


def test_prf_undefined():
    assert prf(ConfusionCounts()) == PRF(None, None, None)
    assert prf(ConfusionCounts(tn=5)) == PRF(None, None, None)
    # P = R = 0: F1 is 0/0, undefined rather than 0.
    assert prf(ConfusionCounts(fp=1, fn=1)) == PRF(0.0, 0.0, None)


def test_table_row_f1_from_precision_recall():
    from consilium.evalkit import harmonic_mean

    assert abs(harmonic_mean(0.735, 0.610) - 0.667) <= 0.002


outcome_sets = st.lists(st.tuples(st.booleans(), st.sampled_from([0, 1, None])), max_size=60)


@given(outcome_sets)
def test_matches_brute_force(outcomes):
    counts = confusion(outcomes)
    expected_counts, expected_prf = brute_force(outcomes)
    assert (counts.tp, counts.fp, counts.tn, counts.fn, counts.unparseable) == expected_counts
    assert tuple(prf(counts)) == expected_prf


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(1, 20))
def test_prf_scale_invariant(tp, fp, tn, fn, k):
    base = prf(ConfusionCounts(tp, fp, tn, fn))
    scaled = prf(ConfusionCounts(k * tp, k * fp, k * tn, k * fn))
    for a, b in zip(base, scaled):
        assert (a is None) == (b is None)
        if a is not None:
            assert a == pytest.approx(b, rel=1e-12)


# --- improvement summary -------------------------------------------------------

def uniform_report(approach, value):
    return MetricsReport({
        CellKey(g, c, approach, s): CellMetrics(value, value, value)
        for g in ("G1", "G2") for c in ("FC", "AE") for s in ("basic", "cot")
    })


def test_identical_reports_zero_increase():
    single = uniform_report("single_role", 0.5)
    multi = MetricsReport({k._replace(approach="multi_role"): v for k, v in single.cells.items()})
    summary = improvement_summary(multi, single)
    assert summary.increase_pct == {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    assert improvement_summary(single, multi).increase_pct == summary.increase_pct


def test_uniform_ratio():
    summary = improvement_summary(uniform_report("multi_role", 0.6), uniform_report("single_role", 0.5))
    assert summary.increase_pct["precision"] == pytest.approx(20.0)
    assert summary.cells_used["precision"] == 8


def test_mismatched_keys_rejected():
    multi = uniform_report("multi_role", 0.6)
    multi.cells.pop(next(iter(multi.cells)))
    with pytest.raises(ValueError, match="cell keys differ"):
        improvement_summary(multi, uniform_report("single_role", 0.5))


def test_undefined_cells_skipped_and_counted():
    single = uniform_report("single_role", 0.5)
    key = next(iter(single.cells))
    single.cells[key] = CellMetrics(None, 0.5, None)
    summary = improvement_summary(uniform_report("multi_role", 0.6), single)
    assert summary.skipped["precision"] == 1 and summary.cells_used["precision"] == 7
    assert summary.skipped["recall"] == 0
    assert summary.increase_pct["precision"] == pytest.approx(20.0)


def test_token_ratio():
    multi = MetricsReport({CellKey("G", "FC", "multi_role", "basic"): CellMetrics(1, 1, 1, None, 400, 184)})
    single = MetricsReport({CellKey("G", "FC", "single_role", "basic"): CellMetrics(1, 1, 1, None, 80, 20)})
    assert improvement_summary(multi, single).token_ratio == pytest.approx(5.84)


# --- Table 1 -------------------------------------------------------------------

def test_table1_fixture_complete():
    rows = load_table1()
    assert len(rows) == 48 == len(table1_keys())


@pytest.mark.parametrize("key,p,r,f", [
    (CellKey("Group1", "FC", "single_role", "basic"), 0.735, 0.610, 0.667),
    (CellKey("Group2", "AU", "multi_role", "cot"), 0.639, 0.778, 0.702),
    (CellKey("Group3", "PU", "multi_role", "cot"), 0.237, 0.790, 0.364),
])
def test_table1_spot_anchors(key, p, r, f):
    row = {row.key: row for row in load_table1()}[key]
    assert (row.precision, row.recall, row.f1) == (p, r, f)
    assert abs(2 * p * r / (p + r) - f) <= 0.002


def test_table1_consistent():
    assert table1_consistency(load_table1()) == []


def test_corrupted_triple_reported():
    rows = load_table1()
    rows[5] = rows[5]._replace(f1=rows[5].f1 + 0.01)
    violations = table1_consistency(rows)
    assert [v.key for v in violations] == [rows[5].key]


def test_incomplete_fixture_rejected():
    with pytest.raises(ValueError, match="incomplete"):
        table1_consistency(load_table1()[:-1])
    rows = load_table1()
    with pytest.raises(ValueError, match="incomplete"):
        table1_consistency(rows[:-1] + rows[:1])


def test_render_table_layout():
    text = render_table(report_from_table(load_table1()))
    lines = text.splitlines()
    assert lines[0].split()[:2] == ["group", "cat"]
    assert sum(1 for l in lines if l.startswith("Group")) == 12
    assert "0.667" in text and "mean relative increase" in text


def test_report_json_is_deterministic():
    rows = load_table1()
    shuffled = list(rows)
    random.Random(1).shuffle(shuffled)
    assert report_from_table(rows).to_json() == report_from_table(shuffled).to_json()
