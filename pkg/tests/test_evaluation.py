from __future__ import annotations

import csv
import io
import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from subgraph_detect.detection_pipeline import Box, Detection, Searcher
from subgraph_detect.evaluation import (
    BenchInstance,
    GroundTruthInstance,
    MethodSpec,
    average_precision,
    benchmark,
    evaluate,
    frontier_methods,
    frontier_table,
    interpolated_ap,
    mean_average_precision,
    per_instance_overlaps,
    spatiotemporal_overlap,
    temporal_overlap,
    voxel_overlap,
)
from subgraph_detect.spacetime_graph import graph_from_weights


def det(start, end, score=1.0, label="activity", boxes=None, rank=0):
    return Detection("test", (0,), score, (start, end), boxes, rank=rank, label=label)


def gt(start, end, label="activity", boxes=None, video="video"):
    return GroundTruthInstance(label, (start, end), boxes, video)


def test_temporal_overlap_examples():
    assert temporal_overlap((0, 100), (50, 150)) == pytest.approx(1 / 3, abs=1e-12)
    assert temporal_overlap((10, 20), (10, 20)) == 1.0
    assert temporal_overlap((0, 10), (10, 20)) == 0.0
    with pytest.raises(ValueError):
        temporal_overlap((5, 5), (0, 10))
    with pytest.raises(ValueError):
        gt(7, 3)


def test_voxel_overlap():
    truth = (Box(0, 10, 0, 0, 10, 10),)
    half = (Box(0, 10, 0, 0, 5, 10),)
    assert voxel_overlap(half, truth) == 0.5
    assert voxel_overlap((Box(20, 30, 0, 0, 10, 10),), truth) == 0.0
    split = (Box(0, 5, 0, 0, 10, 10), Box(5, 10, 0, 0, 10, 10))
    assert voxel_overlap(split, truth) == 1.0


def test_spatiotemporal_overlap_whole_frame():
    truth = gt(0, 10, boxes=(Box(0, 10, 0, 0, 10, 20),))
    whole = det(0, 10)
    with pytest.raises(ValueError):
        spatiotemporal_overlap(whole, truth)
    assert spatiotemporal_overlap(whole, truth, frame_size=(20, 20)) == 0.5
    with pytest.raises(ValueError):
        spatiotemporal_overlap(whole, gt(0, 10), frame_size=(20, 20))


def test_interpolated_ap():
    assert interpolated_ap([True, False, True], 2) == pytest.approx(5 / 6, abs=1e-12)
    assert interpolated_ap([], 3) == 0.0
    assert interpolated_ap([False, True], 1) == 0.5
    with pytest.raises(ValueError):
        interpolated_ap([True], 0)


def test_average_precision_examples():
    truths = {"v": [gt(0, 10, video="v"), gt(50, 60, video="v")]}
    dets = {"v": [det(0, 10, 3.0), det(20, 30, 2.0), det(50, 60, 1.0)]}
    assert average_precision(dets, truths, "activity") == pytest.approx(5 / 6, abs=1e-12)
    assert average_precision({}, truths, "activity") == 0.0
    single = {"v": [gt(0, 10, video="v")]}
    assert mean_average_precision({"v": [det(0, 10)]}, single) == 1.0
    for bad in (0.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            mean_average_precision(dets, truths, iou_threshold=bad)
    with pytest.raises(ValueError):
        mean_average_precision(dets, {})


def test_greedy_matching_never_reuses_a_truth():
    truths = {"v": [gt(0, 10)]}
    dets = {"v": [det(0, 10, 2.0), det(0, 10, 1.0)]}
    assert average_precision(dets, truths, "activity") == 1.0
    # the duplicate is a false positive, which lowers AP once it ranks first
    dets = {"v": [det(0, 10, 2.0), det(0, 10, 1.0), det(40, 50, 0.5)]}
    truths = {"v": [gt(0, 10), gt(40, 50)]}
    assert average_precision(dets, truths, "activity") == pytest.approx(0.5 + 0.5 * 2 / 3, abs=1e-12)


def test_labels_without_truth_are_ignored():
    truths = {"v": [gt(0, 10)]}
    dets = {"v": [det(0, 10), det(0, 10, label="other")]}
    assert mean_average_precision(dets, truths) == 1.0


def test_per_instance_and_report():
    truths = {"a": [gt(0, 10, video="a")], "b": [gt(0, 20, video="b")]}
    dets = {"a": [det(0, 10)], "b": [det(10, 20)]}
    assert per_instance_overlaps(dets, truths) == [1.0, 0.5]
    rep = evaluate(dets, truths)
    assert rep.mean_overlap == 0.75
    assert rep.average_precision == 1.0  # an overlap equal to the threshold matches
    assert evaluate(dets, truths, iou_threshold=0.6).average_precision == 0.5


def reference_ap(scored, truths, thr):
    """Independent loop version: all-point interpolation over greedy matches."""
    order = sorted(range(len(scored)), key=lambda i: -scored[i][2])
    used, hits = set(), []
    for i in order:
        s, e, _ = scored[i]
        best, arg = -1.0, None
        for j, (ts, te) in enumerate(truths):
            if j in used:
                continue
            o = temporal_overlap((s, e), (ts, te))
            if o > best:
                best, arg = o, j
        ok = arg is not None and best >= thr
        if ok:
            used.add(arg)
        hits.append(ok)
    ap, tp = 0.0, 0
    prec, rec = [], []
    for k, h in enumerate(hits, 1):
        tp += h
        prec.append(tp / k)
        rec.append(tp / len(truths))
    prev = 0.0
    for k in range(len(hits)):
        ap += (rec[k] - prev) * max(prec[k:])
        prev = rec[k]
    return ap


intervals = st.tuples(st.integers(0, 40), st.integers(1, 20)).map(lambda t: (t[0], t[0] + t[1]))


@given(
    st.lists(st.tuples(intervals, st.integers(0, 5)), max_size=8, unique_by=lambda t: t[1]),
    st.lists(intervals, min_size=1, max_size=4),
    st.sampled_from([0.1, 0.5, 0.9]),
)
def test_ap_matches_reference_and_is_bounded(scored, truths, thr):
    scored = [(s, e, float(p)) for (s, e), p in scored]
    dets = {"video": [det(s, e, p) for s, e, p in scored]}
    gts = {"video": [gt(s, e) for s, e in truths]}
    ap = average_precision(dets, gts, "activity", thr)
    assert 0.0 <= ap <= 1.0
    assert ap == pytest.approx(reference_ap(scored, truths, thr), abs=1e-9)
    # a stricter threshold can only remove matches
    assert mean_average_precision(dets, gts, min(1.0, thr + 0.05)) <= ap + 1e-12


def test_benchmark_rows_and_csv():
    ticks = itertools.count()
    inst = BenchInstance("toy", graph_from_weights([-1, 3, 2, -4]), (gt(10, 30),))
    methods = [MethodSpec("sub", Searcher.SUBGRAPH), MethodSpec("win", Searcher.T_SLIDING)]
    res = benchmark(methods, [inst], repetitions=3, clock=lambda: float(next(ticks)))
    assert len(res.rows) == 6
    assert res.methods() == ["sub", "win"]
    summ = res.summary()
    assert [s["runs"] for s in summ] == [3, 3]
    assert summ[0]["mean_overlap"] == 1.0 and summ[0]["time_ms_mean"] == 1000.0
    rows = list(csv.DictReader(io.StringIO(res.to_csv())))
    assert list(rows[0]) == ["method", "instance", "rep", "score", "overlap", "time_ms"]
    assert len(rows) == 6 and rows[0]["score"] == "5.0"
    with pytest.raises(ValueError):
        benchmark(methods, [inst], repetitions=0)


def test_frontier_methods_and_table():
    specs = frontier_methods()
    assert [s.name for s in specs] == [
        "t-sliding[1]", "t-sliding[8]", "t-sliding[32]", "t-sliding[128]", "t-sliding[exhaustive]", "subgraph",
    ]
    inst = BenchInstance("toy", graph_from_weights([-1, 3, 2, -4] * 3), (gt(10, 30),))
    table = frontier_table(benchmark(specs, [inst], repetitions=1))
    assert [r["method"] for r in table] == [s.name for s in specs]
    assert all(0.0 <= r["accuracy"] <= 1.0 for r in table)
