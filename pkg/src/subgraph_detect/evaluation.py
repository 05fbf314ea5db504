"""Detection quality and cost: overlap, average precision, and timing.

Overlap is intersection over union of frame intervals, or of voxel sets when
the truth carries spatial boxes. Average precision follows the usual
detection-challenge recipe: detections of one class are pooled across
videos, sorted by score, greedily matched to unclaimed truths, and the
area under the interpolated precision-recall curve is taken.
"""

from __future__ import annotations

import csv
import gc
import io
import statistics
import time
from collections import defaultdict
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .baseline_search import EXHAUSTIVE
from .detection_pipeline import Box, Detection, SearchOptions, Searcher, detect_single
from .spacetime_graph import SpaceTimeGraph


@dataclass(frozen=True)
class GroundTruthInstance:
    label: str
    temporal_extent: tuple[int, int]
    spatial_boxes: tuple[Box, ...] | None = None  # disjoint boxes, or None for whole-frame truth
    video: str = "video"

    def __post_init__(self):
        s, e = self.temporal_extent
        if not s < e:
            raise ValueError(f"empty ground-truth interval {self.temporal_extent}")
        if self.spatial_boxes is not None:
            object.__setattr__(self, "spatial_boxes", tuple(self.spatial_boxes))
            for b in self.spatial_boxes:
                if b.volume <= 0:
                    raise ValueError(f"degenerate ground-truth box {b}")

    def check_within(self, num_frames: int, width: int, height: int) -> None:
        if self.temporal_extent[0] < 0 or self.temporal_extent[1] > num_frames:
            raise ValueError(f"truth interval {self.temporal_extent} outside 0..{num_frames}")
        for b in self.spatial_boxes or ():
            if b.x0 < 0 or b.y0 < 0 or b.x1 > width or b.y1 > height:
                raise ValueError(f"truth box {b} outside a {width}x{height} frame")


@dataclass(frozen=True)
class TimingStats:
    samples: tuple[float, ...]  # seconds

    @property
    def mean(self) -> float:
        return statistics.fmean(self.samples)

    @property
    def median(self) -> float:
        return statistics.median(self.samples)

    @property
    def stdev(self) -> float:
        return statistics.stdev(self.samples) if len(self.samples) > 1 else 0.0


@dataclass(frozen=True)
class EvalReport:
    overlaps: tuple[float, ...]
    mean_overlap: float
    average_precision: float | None = None
    timing: dict[str, TimingStats] = field(default_factory=dict)


def temporal_overlap(pred: tuple[int, int], truth: tuple[int, int]) -> float:
    """Intersection over union of two half-open frame intervals."""
    (a0, a1), (b0, b1) = pred, truth
    if not (a0 < a1 and b0 < b1):
        raise ValueError(f"empty interval in {pred} / {truth}")
    inter = max(0, min(a1, b1) - max(a0, b0))
    return inter / ((a1 - a0) + (b1 - b0) - inter)


def _box_inter(a: Box, b: Box) -> int:
    t = min(a.frame_end, b.frame_end) - max(a.frame_start, b.frame_start)
    x = min(a.x1, b.x1) - max(a.x0, b.x0)
    y = min(a.y1, b.y1) - max(a.y0, b.y0)
    return t * x * y if t > 0 and x > 0 and y > 0 else 0


def voxel_overlap(pred: Sequence[Box], truth: Sequence[Box]) -> float:
    """Voxel IoU of two unions of boxes; boxes within each side must be disjoint."""
    inter = sum(_box_inter(a, b) for a in pred for b in truth)
    union = sum(a.volume for a in pred) + sum(b.volume for b in truth) - inter
    return inter / union if union else 0.0


def spatiotemporal_overlap(pred: Detection, truth: GroundTruthInstance, frame_size: tuple[int, int] | None = None) -> float:
    """Voxel IoU of a detection against a truth with spatial boxes.

    Whole-frame detections need ``frame_size = (width, height)``.
    """
    if truth.spatial_boxes is None:
        raise ValueError("ground truth has no spatial boxes")
    boxes = pred.boxes
    if boxes is None:
        if frame_size is None:
            raise ValueError("a whole-frame detection needs frame_size for voxel overlap")
        boxes = (Box(*pred.temporal_extent, 0, 0, *frame_size),)
    return voxel_overlap(boxes, truth.spatial_boxes)


def overlap(pred: Detection, truth: GroundTruthInstance, spatial: bool = False, frame_size=None) -> float:
    if spatial and truth.spatial_boxes is not None:
        return spatiotemporal_overlap(pred, truth, frame_size)
    return temporal_overlap(pred.temporal_extent, truth.temporal_extent)


def per_instance_overlaps(
    detections: Mapping[str, Sequence[Detection]],
    truths: Mapping[str, Sequence[GroundTruthInstance]],
    spatial: bool = False,
    frame_size=None,
) -> list[float]:
    """Best overlap each truth gets from any same-label detection of its video (0 if none)."""
    out = []
    for video in sorted(truths):
        for gt in truths[video]:
            cands = [d for d in detections.get(video, ()) if d.label == gt.label]
            out.append(max((overlap(d, gt, spatial, frame_size) for d in cands), default=0.0))
    return out


def interpolated_ap(hits: Sequence[bool], num_truths: int) -> float:
    """Area under the precision envelope of a ranked hit list."""
    if num_truths == 0:
        raise ValueError("average precision is undefined without ground truth")
    if not hits:
        return 0.0
    tp = np.cumsum(np.asarray(hits, dtype=np.float64))
    precision = tp / np.arange(1, len(hits) + 1)
    recall = tp / num_truths
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev) * envelope))


def average_precision(
    detections: Mapping[str, Sequence[Detection]],
    truths: Mapping[str, Sequence[GroundTruthInstance]],
    label: str,
    iou_threshold: float = 0.5,
    spatial: bool = False,
    frame_size=None,
) -> float:
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    pool = [
        (video, i, d)
        for video in sorted(detections)
        for i, d in enumerate(detections[video])
        if d.label == label
    ]
    # stable: equal scores keep per-video rank order, videos in name order
    pool.sort(key=lambda t: -t[2].score)
    gts = {v: [g for g in truths.get(v, ()) if g.label == label] for v in truths}
    num = sum(len(g) for g in gts.values())
    claimed = {v: [False] * len(g) for v, g in gts.items()}
    hits = []
    for video, _, d in pool:
        best, arg = -1.0, -1
        for j, g in enumerate(gts.get(video, ())):
            if claimed[video][j]:
                continue
            o = overlap(d, g, spatial, frame_size)
            if o > best:
                best, arg = o, j
        if arg >= 0 and best >= iou_threshold:
            claimed[video][arg] = True
            hits.append(True)
        else:
            hits.append(False)
    return interpolated_ap(hits, num)


def mean_average_precision(
    detections: Mapping[str, Sequence[Detection]],
    truths: Mapping[str, Sequence[GroundTruthInstance]],
    iou_threshold: float = 0.5,
    spatial: bool = False,
    frame_size=None,
) -> float:
    """Mean AP over the labels that have ground truth."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    labels = sorted({g.label for gs in truths.values() for g in gs})
    if not labels:
        raise ValueError("no ground truth to evaluate against")
    return statistics.fmean(
        average_precision(detections, truths, lab, iou_threshold, spatial, frame_size) for lab in labels
    )


def evaluate(
    detections: Mapping[str, Sequence[Detection]],
    truths: Mapping[str, Sequence[GroundTruthInstance]],
    iou_threshold: float = 0.5,
    spatial: bool = False,
    frame_size=None,
) -> EvalReport:
    overlaps = per_instance_overlaps(detections, truths, spatial, frame_size)
    return EvalReport(
        overlaps=tuple(overlaps),
        mean_overlap=statistics.fmean(overlaps) if overlaps else 0.0,
        average_precision=mean_average_precision(detections, truths, iou_threshold, spatial, frame_size),
    )


# --------------------------------------------------------------------------
# benchmarking
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchInstance:
    name: str
    graph: SpaceTimeGraph
    truths: tuple[GroundTruthInstance, ...]


@dataclass(frozen=True)
class MethodSpec:
    """A named searcher configuration, e.g. a sliding window with one duration pool."""

    name: str
    searcher: Searcher | str
    options: SearchOptions = SearchOptions()

    def run(self, graph: SpaceTimeGraph) -> Detection:
        return detect_single(graph, self.searcher, self.options)


@dataclass(frozen=True)
class BenchRow:
    method: str
    instance: str
    rep: int
    score: float
    overlap: float
    time_ms: float


@dataclass(frozen=True)
class BenchmarkResult:
    rows: tuple[BenchRow, ...]

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    def report(self, method: str) -> EvalReport:
        """Accuracy from the first repetition (results are deterministic), timing from all."""
        rows = [r for r in self.rows if r.method == method]
        first = [r.overlap for r in rows if r.rep == 0]
        times = tuple(r.time_ms / 1000.0 for r in rows)
        return EvalReport(tuple(first), statistics.fmean(first) if first else 0.0, None, {method: TimingStats(times)})

    def summary(self) -> list[dict]:
        out = []
        for m in self.methods():
            rep = self.report(m)
            t = rep.timing[m]
            scores = [r.score for r in self.rows if r.method == m and r.rep == 0]
            out.append({
                "method": m,
                "mean_overlap": rep.mean_overlap,
                "mean_score": statistics.fmean(scores) if scores else 0.0,
                "time_ms_mean": t.mean * 1000.0,
                "time_ms_stdev": t.stdev * 1000.0,
                "time_ms_median": t.median * 1000.0,
                "runs": len(t.samples),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "instance", "rep", "score", "overlap", "time_ms"])
        for r in self.rows:
            w.writerow([r.method, r.instance, r.rep, repr(r.score), repr(r.overlap), f"{r.time_ms:.6f}"])
        return buf.getvalue()


def _best_overlap(det: Detection, truths: Sequence[GroundTruthInstance]) -> float:
    return max((temporal_overlap(det.temporal_extent, g.temporal_extent) for g in truths), default=0.0)


def benchmark(
    methods: Sequence[MethodSpec],
    instances: Sequence[BenchInstance],
    repetitions: int = 3,
    clock: Callable[[], float] = time.perf_counter,
    warmup: int = 1,
) -> BenchmarkResult:
    """Time every method on every instance; accuracy is the top detection's best temporal overlap.

    ``warmup`` untimed runs precede the timed repetitions of each pair. The
    garbage collector is paused while a run is timed.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    rows = []
    for m in methods:
        for inst in instances:
            for _ in range(warmup):
                m.run(inst.graph)
            for rep in range(repetitions):
                gc_was_on = gc.isenabled()
                gc.disable()
                try:
                    t0 = clock()
                    det = m.run(inst.graph)
                    dt = clock() - t0
                finally:
                    if gc_was_on:
                        gc.enable()
                rows.append(BenchRow(m.name, inst.name, rep, det.score, _best_overlap(det, inst.truths), dt * 1000.0))
    return BenchmarkResult(tuple(rows))


FRONTIER_POOLS = ((1,), tuple(range(1, 9)), tuple(range(1, 33)), tuple(range(1, 129)), EXHAUSTIVE)


def frontier_methods(pools=FRONTIER_POOLS, subgraph: Searcher | str = Searcher.SUBGRAPH) -> list[MethodSpec]:
    """Sliding windows over growing duration pools, followed by the subgraph searcher."""
    specs = []
    for pool in pools:
        tag = pool if isinstance(pool, str) else f"{len(pool)}"
        specs.append(MethodSpec(f"t-sliding[{tag}]", Searcher.T_SLIDING, SearchOptions(durations=pool)))
    specs.append(MethodSpec("subgraph", subgraph))
    return specs


def frontier_table(result: BenchmarkResult) -> list[dict]:
    """Accuracy-versus-time rows, one per method, in method order.

    Time is the median run, which a single scheduler stall cannot move.
    """
    return [
        {"method": s["method"], "accuracy": s["mean_overlap"], "time_ms": s["time_ms_median"]}
        for s in result.summary()
    ]


def group_by_video(items) -> dict[str, list]:
    out: dict[str, list] = defaultdict(list)
    for video, item in items:
        out[video].append(item)
    return dict(out)
