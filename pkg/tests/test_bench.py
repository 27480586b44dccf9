import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from eohazard import bench
from eohazard.agents import EventType
from eohazard.orchestrator import Mode, RunRecord
from oracles import pearson_reference


def rec(sid, mode, total, label="none", area=1.0, ok=True):
    return RunRecord(sid, Mode(mode), {"total": total}, [], {}, EventType(label), area,
                     None if ok else {"stage": "flood", "code": "node-failure"})


def pair(sid, base, routed, label="none", area=1.0):
    return rec(sid, "baseline", base, label, area), rec(sid, "routed", routed, label, area)


def samples_from(rows):
    recs = [r for row in rows for r in pair(*row)]
    return bench.compute_speedups(*bench.split_records(recs))


def test_speedup_example():
    (s,) = samples_from([("a", 400.0, 100.0)])
    assert s.speedup == 4.0 and s.reduction_pct == 75.0


def test_equal_times():
    (s,) = samples_from([("a", 250.0, 250.0)])
    assert s.speedup == 1.0 and s.reduction_pct == 0.0


def test_scene_set_mismatch():
    b1, r1 = pair("a", 1, 1)
    b2, _ = pair("b", 1, 1)
    with pytest.raises(bench.SceneSetMismatch) as exc:
        bench.compute_speedups([b1, b2], [r1])
    assert exc.value.code == "scene-set-mismatch"


def test_failed_record_counts_as_missing():
    b, _ = pair("a", 1, 1)
    with pytest.raises(bench.SceneSetMismatch):
        bench.compute_speedups([b], [rec("a", "routed", 1.0, ok=False)])


def test_zero_routed_time():
    with pytest.raises(bench.ZeroRoutedTime):
        samples_from([("a", 10.0, 0.0)])


def test_group_stats_example():
    stats = bench.group_stats(samples_from([("a", 2.0, 1.0), ("b", 4.0, 1.0)]))
    (g,) = stats
    assert g.group == "no_event" and g.n == 2
    assert g.speedup_mean == pytest.approx(3.0)
    assert g.speedup_std == pytest.approx(math.sqrt(2), abs=1e-4)
    assert bench.missing_groups(stats) == ["event"]


def test_single_sample_flag():
    (g,) = bench.group_stats(samples_from([("a", 3.0, 1.0, "flood")]))
    assert g.group == "event" and g.single_sample and g.speedup_std == 0.0
    assert "single sample" in bench.text_table([g])


@given(st.lists(st.tuples(st.floats(1.0, 1e4), st.floats(1.0, 1e4)), min_size=1, max_size=20))
def test_reduction_consistent_with_speedup(times):
    for s in samples_from([(f"s{i}", b, r) for i, (b, r) in enumerate(times)]):
        assert s.reduction_pct == pytest.approx(100 * (1 - 1 / s.speedup), abs=1e-9)


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=40))
def test_pearson_matches_reference(pts):
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    got = bench.pearson(xs, ys)
    # near-constant inputs leave the reference formula itself ill-conditioned
    assume(min(np.ptp(xs), np.ptp(ys)) >= 1e-3)
    assert got == pytest.approx(pearson_reference(xs, ys), abs=1e-9)


def test_linear_pairs():
    x = np.linspace(1, 50, 17)
    assert bench.pearson(x, 3 * x + 2) == pytest.approx(1.0, abs=1e-9)
    assert bench.pearson(x, -x) == pytest.approx(-1.0, abs=1e-9)
    assert bench.spearman(x, np.exp(x / 10)) == pytest.approx(1.0)


def test_simpson_construction():
    # two strata: each perfectly linear in area, with the small-area stratum sitting higher
    rows = []
    for i, a in enumerate(np.linspace(1, 10, 10)):
        rows.append((f"q{i}", 100.0 * (4 + 0.5 * a), 100.0, "none", float(a)))
    for i, a in enumerate(np.linspace(4, 13, 10)):
        rows.append((f"e{i}", 100.0 * (0.5 + 0.1 * a), 100.0, "wildfire", float(a)))
    samples = samples_from(rows)
    corr = bench.stratified_correlation(samples)
    assert corr.no_event_rho == pytest.approx(1.0, abs=1e-9)
    assert corr.event_rho == pytest.approx(1.0, abs=1e-9)
    areas = [s.area_km2 for s in samples]
    speedups = [s.speedup for s in samples]
    assert corr.global_rho == pytest.approx(pearson_reference(areas, speedups), abs=1e-9)
    assert abs(corr.global_rho) < 0.3


def test_constant_speedups_note():
    corr = bench.stratified_correlation(samples_from([(f"s{i}", 2.0, 1.0, "none", float(i)) for i in range(5)]))
    assert corr.no_event_rho is None and corr.global_rho is None
    assert any("variance" in n for n in corr.notes)
    assert any("event: insufficient samples" in n for n in corr.notes)


def test_unknown_method():
    with pytest.raises(bench.BenchError):
        bench.stratified_correlation([], "kendall")


def test_emit_report_round_trip(tmp_path):
    rows = [(f"s{i}", 100.0 + 30 * i, 50.0, "none" if i % 2 else "flood", 1.0 + i) for i in range(8)]
    samples = samples_from(rows)
    stats = bench.group_stats(samples)
    corr = bench.stratified_correlation(samples, "spearman")
    paths = bench.emit_report(stats, corr, tmp_path / "rep", samples)
    assert all(p.exists() for p in paths.values())
    doc = json.loads(paths["json"].read_text())
    back_stats, back_corr = bench.stats_from_report(doc)
    assert back_stats == stats
    assert (back_corr.global_rho, back_corr.no_event_rho, back_corr.event_rho) == (
        corr.global_rho, corr.no_event_rho, corr.event_rho)
    assert doc["reference_targets"]["no_event"]["speedup_mean"] == 4.78
    text = paths["text"].read_text()
    assert "No event" in text and "Event (wildfire or flood)" in text
    lines = paths["csv"].read_text().splitlines()
    assert lines[0] == "area_km2,speedup,group" and len(lines) == 9


def test_reference_targets_recorded():
    t = bench.REFERENCE_TARGETS
    assert (t["no_event"]["speedup_mean"], t["no_event"]["speedup_std"]) == (4.78, 2.54)
    assert (t["event"]["speedup_mean"], t["event"]["speedup_std"]) == (1.3, 0.45)
    assert (t["no_event"]["reduction_mean"], t["event"]["reduction_mean"]) == (73.2, 13.5)
    assert t["correlation"] == {"global": 0.08, "no_event": 0.99, "event": 0.92}
